"""All-pairs two-proportion z-tests with Holm-Sidak step-down adjustment."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from scipy.stats import norm

from .errors import CovplanError
from .scores import SampleStats


class TestOutcome(NamedTuple):
    z: float
    p_raw: float

    __test__ = False  # not a pytest class


def proportion_ztest(successes1: int, n1: int, successes2: int, n2: int) -> TestOutcome:
    """Pooled two-sample proportion z-test, two-sided, no continuity correction.

    When the pooled proportion is 0 or 1 the two samples are identical and the
    result is ``z = 0, p = 1``.
    """
    if n1 < 1 or n2 < 1:
        raise CovplanError("sample sizes must be at least 1")
    if not (0 <= successes1 <= n1 and 0 <= successes2 <= n2):
        raise CovplanError("successes must lie between 0 and the sample size")
    pooled = (successes1 + successes2) / (n1 + n2)
    var = pooled * (1 - pooled) * (1 / n1 + 1 / n2)
    if var <= 0:
        return TestOutcome(0.0, 1.0)
    z = (successes1 / n1 - successes2 / n2) / math.sqrt(var)
    return TestOutcome(z, float(min(1.0, 2 * norm.sf(abs(z)))))


def holm_sidak_adjust(p_values: Sequence[float]) -> list:
    """Step-down Sidak adjusted p-values, returned in input order."""
    p = list(p_values)
    for v in p:
        if not 0 <= v <= 1:
            raise CovplanError(f"p-value {v} outside [0, 1]")
    m = len(p)
    order = sorted(range(m), key=p.__getitem__)
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        # floor at p guards against rounding in 1 - (1 - p)^e
        term = min(1.0, max(p[i], 1 - (1 - p[i]) ** (m - rank)))
        running = max(running, term)
        adjusted[i] = running
    return adjusted


def _approx_questionable(s1: int, n1: int, s2: int, n2: int) -> bool:
    """Rule of thumb: expected successes and failures under the pooled rate below 5."""
    pooled = (s1 + s2) / (n1 + n2)
    return min(n * q for n in (n1, n2) for q in (pooled, 1 - pooled)) < 5


@dataclass(frozen=True)
class PairTest:
    row_i: int
    row_j: int
    mean_i: float
    mean_j: float
    n_i: int
    n_j: int
    z: float
    p_raw: float
    p_adjusted: float
    significant: bool
    approx_questionable: bool


@dataclass(frozen=True)
class PairwiseReport:
    pairs: tuple
    alpha: float
    best: int
    runner_up: int
    best_vs_runner_up: PairTest

    @property
    def best_significant(self) -> bool:
        return self.best_vs_runner_up.significant

    def pair(self, a: int, b: int) -> Optional[PairTest]:
        for t in self.pairs:
            if {t.row_i, t.row_j} == {a, b}:
                return t
        return None


def pairwise_report(stats: SampleStats, alpha: float = 0.05) -> PairwiseReport:
    """Test every unordered pair of scored rows and adjust the whole family jointly."""
    if not 0 < alpha < 1:
        raise CovplanError("alpha must lie in (0, 1)")
    rows = list(stats.rows.values())
    if len(rows) < 2:
        raise CovplanError("pairwise analysis needs at least 2 scored rows")
    raw = []
    for a, b in itertools.combinations(rows, 2):
        raw.append((a, b, proportion_ztest(a.successes, a.n, b.successes, b.n)))
    adjusted = holm_sidak_adjust([t.p_raw for _, _, t in raw])
    pairs = tuple(
        PairTest(
            a.row_id, b.row_id, a.mean, b.mean, a.n, b.n, t.z, t.p_raw, padj, padj < alpha,
            _approx_questionable(a.successes, a.n, b.successes, b.n),
        )
        for (a, b, t), padj in zip(raw, adjusted)
    )
    ranked = sorted(rows, key=lambda r: (-r.mean, r.row_id))
    best, runner = ranked[0].row_id, ranked[1].row_id
    head = next(t for t in pairs if {t.row_i, t.row_j} == {best, runner})
    return PairwiseReport(pairs, alpha, best, runner, head)


def fmt6(x: float) -> str:
    return f"{x:.6g}"


PAIRWISE_COLUMNS = (
    "row_i", "row_j", "mean_i", "mean_j", "n_i", "n_j", "z", "p_raw", "p_adjusted", "significant",
)


def report_csv(report: PairwiseReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAIRWISE_COLUMNS)
    for t in report.pairs:
        w.writerow((
            t.row_i, t.row_j, fmt6(t.mean_i), fmt6(t.mean_j), t.n_i, t.n_j,
            fmt6(t.z), fmt6(t.p_raw), fmt6(t.p_adjusted), "true" if t.significant else "false",
        ))
    return buf.getvalue()


def verdict(report: PairwiseReport) -> str:
    h = report.best_vs_runner_up
    best_mean = h.mean_i if h.row_i == report.best else h.mean_j
    state = "significant" if h.significant else "not significant"
    return (
        f"best: row {report.best} (mean {best_mean:.3f}); difference vs row "
        f"{report.runner_up} {state} (adjusted p = {h.p_adjusted:.3f})"
    )


def report_text(report: PairwiseReport) -> str:
    header = ("row_i", "row_j", "mean_i", "mean_j", "n_i", "n_j", "z", "p_raw", "p_adj", "sig", "")
    body = [
        (
            str(t.row_i), str(t.row_j), fmt6(t.mean_i), fmt6(t.mean_j), str(t.n_i), str(t.n_j),
            fmt6(t.z), fmt6(t.p_raw), fmt6(t.p_adjusted), "*" if t.significant else "",
            "approx?" if t.approx_questionable else "",
        )
        for t in report.pairs
    ]
    lines = [verdict(report), f"alpha = {report.alpha:g}; {len(report.pairs)} tests, Holm-Sidak adjusted", ""]
    lines += align([header] + body)
    if any(t.approx_questionable for t in report.pairs):
        lines += ["", "approx?: expected successes or failures below 5 in a sample; "
                      "normal approximation questionable"]
    return "\n".join(lines) + "\n"


def align(table: Sequence[Sequence[str]]) -> list:
    """Right-align all but the first column to a common width."""
    widths = [max(len(r[c]) for r in table) for c in range(len(table[0]))]
    out = []
    for r in table:
        cells = [r[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(r[1:], widths[1:])]
        out.append("  ".join(cells).rstrip())
    return out
