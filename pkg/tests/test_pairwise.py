import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covplan.errors import CovplanError
from covplan.generator import Plan
from covplan.pairwise import (
    holm_sidak_adjust,
    pairwise_report,
    proportion_ztest,
    report_csv,
    report_text,
    verdict,
)
from covplan.scores import sample_stats
from helpers import dataset_from_counts
from oracles import holm_sidak_textbook, pooled_z, two_sided_normal_p

# 13 rows in the shape of the worked example: row 2 perfect, row 7 one miss,
# the rest clustered lower
THIRTEEN_COUNTS = {1: 24, 2: 30, 3: 23, 4: 25, 5: 22, 6: 24, 7: 29, 8: 26, 9: 23, 10: 25,
                   11: 21, 12: 24, 13: 22}


def plan_of(n):
    return Plan(("x",), [(str(i),) for i in range(1, n + 1)])


def report_for(counts, n=30, alpha=0.05):
    plan = plan_of(len(counts))
    ds = dataset_from_counts(plan, {k: (v, n) for k, v in counts.items()})
    return pairwise_report(sample_stats(ds), alpha)


class TestZTest:
    def test_thirty_vs_twentynine(self):
        out = proportion_ztest(30, 30, 29, 30)
        assert out.p_raw == pytest.approx(0.313, abs=1e-3)
        assert out.z == pytest.approx(pooled_z(30, 30, 29, 30), abs=1e-12)
        assert out.p_raw == pytest.approx(0.31324377340130777, abs=1e-12)

    def test_identical(self):
        assert proportion_ztest(15, 30, 15, 30) == (0.0, 1.0)

    def test_hand_example(self):
        # z^2 = (1/3)^2 / (2/3 * 1/3 * 2/30) = 7.5
        out = proportion_ztest(25, 30, 15, 30)
        assert out.z == pytest.approx(math.sqrt(7.5), abs=1e-12)
        assert out.z == pytest.approx(2.739, abs=5e-4)
        assert out.p_raw == pytest.approx(0.006169899320544167, rel=1e-9)

    @pytest.mark.parametrize("s", [0, 30])
    def test_zero_pooled_variance(self, s):
        assert proportion_ztest(s, 30, s, 30) == (0.0, 1.0)

    def test_bad_input(self):
        with pytest.raises(CovplanError):
            proportion_ztest(5, 4, 1, 4)
        with pytest.raises(CovplanError):
            proportion_ztest(0, 0, 1, 4)

    @given(st.integers(1, 60), st.integers(1, 60), st.data())
    @settings(max_examples=200, deadline=None)
    def test_symmetry_and_range(self, n1, n2, data):
        s1 = data.draw(st.integers(0, n1))
        s2 = data.draw(st.integers(0, n2))
        a = proportion_ztest(s1, n1, s2, n2)
        b = proportion_ztest(s2, n2, s1, n1)
        assert a.z == -b.z
        assert a.p_raw == b.p_raw
        assert 0 <= a.p_raw <= 1
        if 0 < s1 + s2 < n1 + n2:
            assert a.p_raw == pytest.approx(two_sided_normal_p(pooled_z(s1, n1, s2, n2)),
                                            rel=1e-9, abs=1e-300)


class TestHolmSidak:
    def test_hand_example(self):
        # sorted 0.01, 0.02, 0.30 with m = 3: 1-(.99)^3, max(prev, 1-(.98)^2), max(prev, .30)
        got = holm_sidak_adjust([0.01, 0.02, 0.30])
        assert got == pytest.approx([0.029701, 0.0396, 0.30], abs=1e-12)

    def test_input_order_kept(self):
        got = holm_sidak_adjust([0.30, 0.01, 0.02])
        assert got == pytest.approx([0.30, 0.029701, 0.0396], abs=1e-12)

    def test_single(self):
        assert holm_sidak_adjust([0.5]) == [0.5]

    def test_empty(self):
        assert holm_sidak_adjust([]) == []

    def test_out_of_range(self):
        with pytest.raises(CovplanError):
            holm_sidak_adjust([0.2, 1.5])

    def test_largest_of_78(self):
        others = [0.25 + 0.06 * i / 76 for i in range(77)]
        adj = holm_sidak_adjust(others + [0.313])
        assert f"{adj[-1]:.3f}" == "1.000"

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=6))
    @settings(max_examples=300, deadline=None)
    def test_matches_textbook(self, p):
        assert holm_sidak_adjust(p) == holm_sidak_textbook(p)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_properties(self, p):
        adj = holm_sidak_adjust(p)
        assert all(0 <= a <= 1 for a in adj)
        assert all(a >= q for a, q in zip(adj, p))
        for i in range(len(p)):
            for j in range(len(p)):
                if p[i] <= p[j]:
                    assert adj[i] <= adj[j]

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20), st.integers(1, 10))
    @settings(max_examples=200, deadline=None)
    def test_adding_null_tests_never_lowers(self, p, extra):
        before = holm_sidak_adjust(p)
        after = holm_sidak_adjust(p + [1.0] * extra)[: len(p)]
        assert all(b >= a for a, b in zip(before, after))


class TestReport:
    def test_thirteen_row_example(self):
        rep = report_for(THIRTEEN_COUNTS)
        assert len(rep.pairs) == math.comb(13, 2) == 78
        assert (rep.best, rep.runner_up) == (2, 7)
        head = rep.best_vs_runner_up
        assert head.p_raw == pytest.approx(0.313, abs=1e-3)
        assert not head.significant
        assert head.approx_questionable
        assert verdict(rep) == ("best: row 2 (mean 1.000); difference vs row 7 not significant "
                                "(adjusted p = 1.000)")

    def test_identical_rows(self):
        rep = report_for({i: 17 for i in range(1, 6)})
        assert all(t.p_adjusted == 1.0 and not t.significant for t in rep.pairs)
        assert rep.best == 1  # tie goes to the lowest row id

    def test_three_rows(self):
        rep = report_for({1: 30, 2: 0, 3: 15})
        assert rep.best == 1
        t = rep.pair(1, 2)
        assert t.z == pytest.approx(math.sqrt(60), abs=1e-12)  # 7.75
        assert t.p_adjusted < 0.05 and t.significant

    def test_needs_two_rows(self):
        with pytest.raises(CovplanError, match="at least 2"):
            report_for({1: 3})

    def test_bad_alpha(self):
        with pytest.raises(CovplanError):
            report_for({1: 3, 2: 4}, alpha=1.5)

    def test_best_is_argmax(self):
        rng = random.Random(8)
        for _ in range(20):
            counts = {i: rng.randint(0, 30) for i in range(1, 9)}
            rep = report_for(counts)
            top = max(counts.values())
            assert rep.best == min(i for i, v in counts.items() if v == top)
            assert all(t.p_adjusted >= t.p_raw for t in rep.pairs)

    def test_csv_format(self):
        rep = report_for({1: 25, 2: 15})
        lines = report_csv(rep).splitlines()
        assert lines[0] == "row_i,row_j,mean_i,mean_j,n_i,n_j,z,p_raw,p_adjusted,significant"
        assert lines[1] == "1,2,0.833333,0.5,30,30,2.73861,0.0061699,0.0061699,true"

    def test_text_report(self):
        text = report_text(report_for(THIRTEEN_COUNTS))
        assert text.startswith("best: row 2")
        assert "78 tests" in text
        assert "approx?" in text
