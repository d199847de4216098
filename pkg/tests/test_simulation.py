import math

import numpy as np
import pytest
from scipy import stats

from covplan.coverage import CoverageRequirement
from covplan.errors import CovplanError
from covplan.generator import Plan, random_plan
from covplan.model import load_example_model
from covplan.regression import INTERCEPT
from covplan.simulation import (
    SimulationConfig,
    beta_draw,
    bernoulli_draws,
    effect_columns,
    gamma_draw,
    parse_effects,
    run_paper_simulation,
    sample_theta,
    simulate_with_effects,
    substream,
    theta_csv,
)


@pytest.fixture(scope="module")
def default_run():
    m = load_example_model()
    return run_paper_simulation(m, CoverageRequirement.for_model(m, 2))


class TestSamplers:
    @pytest.mark.parametrize("shape,rate", [(5.0, 1.0), (2.0, 1.0), (0.5, 2.0)])
    def test_gamma_moments(self, shape, rate):
        rng = substream(11, 7)
        n = 100_000
        x = np.array([gamma_draw(rng, shape, rate) for _ in range(n)])
        mean, var = shape / rate, shape / rate**2
        assert abs(x.mean() - mean) < 3 * math.sqrt(var / n)
        assert x.var() == pytest.approx(var, rel=0.05)

    def test_gamma_five_one(self):
        rng = substream(0, 99)
        n = 100_000
        x = np.array([gamma_draw(rng, 5.0) for _ in range(n)])
        assert abs(x.mean() - 5) < 5 / math.sqrt(n) * 3

    def test_gamma_ks(self):
        rng = substream(3, 1)
        x = [gamma_draw(rng, 2.0) for _ in range(5000)]
        assert stats.kstest(x, stats.gamma(2.0).cdf).pvalue > 1e-3

    def test_beta_ks(self):
        rng = substream(3, 2)
        x = [beta_draw(rng, 5.0, 2.0) for _ in range(5000)]
        assert stats.kstest(x, stats.beta(5.0, 2.0).cdf).pvalue > 1e-3

    def test_bad_gamma_params(self):
        with pytest.raises(CovplanError):
            gamma_draw(substream(0, 0), 0.0)

    def test_bernoulli_rate(self):
        draws = bernoulli_draws(substream(1, 1), 0.3, 100_000)
        assert set(np.unique(draws)) <= {0, 1}
        assert abs(draws.mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 100_000)

    def test_theta_mean_matches_monte_carlo_oracle(self):
        # oracle: numpy's own gamma sampler, one million draws
        g = np.random.default_rng(2024)
        a = g.gamma(5.0, 1.0, 1_000_000)
        b = g.gamma(2.0, 1.0, 1_000_000)
        oracle = g.beta(a, b).mean()
        assert oracle == pytest.approx(5 / 7, abs=2e-3)
        rng = substream(5, 5)
        cfg = SimulationConfig()
        ours = np.mean([sample_theta(cfg, rng) for _ in range(50_000)])
        assert abs(ours - oracle) < 4 * 0.16 / math.sqrt(50_000)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"alpha_shape": 0}, {"beta_rate": -1}, {"samples_per_row": 0}, {"generations": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(CovplanError):
            SimulationConfig(**kwargs)


class TestPaperSimulation:
    def test_shape(self, default_run):
        plan = default_run.plan
        assert 100 <= len(plan) <= 400
        assert len(set(plan.rows)) == len(plan)
        assert len(default_run.dataset) == len(plan) * 30
        counts = default_run.dataset.scores_by_row()
        assert all(len(v) == 30 for v in counts.values())

    def test_theta_range_and_mean(self, default_run):
        th = np.array(list(default_run.theta.values()))
        assert ((0 <= th) & (th <= 1)).all()
        assert abs(th.mean() - 5 / 7) < 0.05

    def test_rows_track_theta(self, default_run):
        by_row = default_run.dataset.scores_by_row()
        # a few hundred rows at a ~0.1% exceedance rate
        outside = sum(
            abs(np.mean(s) - default_run.theta[r])
            > 4 * math.sqrt(default_run.theta[r] * (1 - default_run.theta[r]) / len(s))
            for r, s in by_row.items()
        )
        assert outside <= 2

    def test_deterministic(self, default_run):
        m = load_example_model()
        again = run_paper_simulation(m, CoverageRequirement.for_model(m, 2))
        assert again.dataset.observations == default_run.dataset.observations
        assert theta_csv(again) == theta_csv(default_run)

    def test_seed_changes_data(self):
        m = load_example_model()
        req = CoverageRequirement.for_model(m, 2)
        a = run_paper_simulation(m, req, SimulationConfig(generations=1, seed=1))
        b = run_paper_simulation(m, req, SimulationConfig(generations=1, seed=2))
        assert a.dataset.observations != b.dataset.observations

    def test_single_generation_counts(self):
        m = load_example_model()
        req = CoverageRequirement.for_model(m, 2)
        sim = run_paper_simulation(m, req, SimulationConfig(generations=1))
        assert len(sim.dataset) == len(sim.plan) * 30
        one = run_paper_simulation(m, req, SimulationConfig(generations=1, samples_per_row=1))
        assert len(one.dataset) == len(one.plan)


def test_per_row_bound_holds_at_scale():
    """|mean - theta| <= 4 sd for at least 99.9% of rows.

    The true exceedance rate for Beta(5, 2)-ish thetas and n = 30 is close to the
    0.1% limit, so this is a one-sided binomial test of H0: rate <= 0.001.
    """
    cfg = SimulationConfig()
    n_rows, n = 200_000, 30
    rng = substream(17, 3)
    thetas = np.array([sample_theta(cfg, rng) for _ in range(n_rows)])
    # same uniform-threshold rule as bernoulli_draws, vectorized over rows
    means = (rng.random((n_rows, n)) < thetas[:, None]).mean(axis=1)
    sd = np.sqrt(thetas * (1 - thetas) / n)
    outside = int(np.sum(np.abs(means - thetas) > 4 * sd))
    assert stats.binomtest(outside, n_rows, 0.001, alternative="greater").pvalue > 1e-3


@pytest.fixture(scope="module")
def setup():
    m = load_example_model()
    return m, random_plan(m, 40, seed=2)


class TestEffects:
    def test_all_zero(self, setup):
        m, plan = setup
        sim = simulate_with_effects(m, plan, {}, samples_per_row=30, seed=1)
        assert set(sim.theta.values()) == {0.5}
        scores = [s for _, _, s in sim.dataset.observations]
        assert abs(np.mean(scores) - 0.5) < 4 * math.sqrt(0.25 / len(scores))

    def test_ln9_effect(self, setup):
        m, plan = setup
        col = "C(PROMPTfactor1)[T.True]"
        sim = simulate_with_effects(m, plan, {INTERCEPT: 0.0, col: math.log(9)})
        j = m.names.index("PROMPTfactor1")
        for rid, row in zip(plan.row_ids, plan.rows):
            expected = 0.9 if row[j] == "True" else 0.5
            assert sim.theta[rid] == pytest.approx(expected, abs=1e-12)

    def test_unknown_column(self, setup):
        m, plan = setup
        with pytest.raises(CovplanError, match="unknown effect"):
            simulate_with_effects(m, plan, {"C(nope)[T.x]": 1.0})

    def test_appending_rows_keeps_draws(self, setup):
        m, plan = setup
        short = Plan(plan.factor_names, plan.rows[:20], plan.row_ids[:20])
        a = simulate_with_effects(m, short, {INTERCEPT: 0.3}, seed=5)
        b = simulate_with_effects(m, plan, {INTERCEPT: 0.3}, seed=5)
        assert b.dataset.observations[: len(a.dataset)] == a.dataset.observations

    def test_effect_columns(self):
        cols = effect_columns(load_example_model())
        assert len(cols) == 19 and cols[0] == INTERCEPT


class TestEffectsFile:
    def test_parse(self):
        assert parse_effects('{"Intercept": 1, "C(x)[T.T]": -0.5}') == {
            "Intercept": 1.0, "C(x)[T.T]": -0.5}

    @pytest.mark.parametrize("text", ["[1]", '{"a": "b"}', "{bad", '{"a": true}'])
    def test_reject(self, text):
        with pytest.raises(CovplanError):
            parse_effects(text)


def test_theta_sidecar(default_run):
    lines = theta_csv(default_run).splitlines()
    assert lines[0] == "row_id,theta_true"
    assert len(lines) == len(default_run.plan) + 1
    rid, value = lines[1].split(",")
    assert float(value) == default_run.theta[int(rid)]


def test_generator_streams_are_independent_of_count():
    m = load_example_model()
    req = CoverageRequirement.for_model(m, 2)
    a = run_paper_simulation(m, req, SimulationConfig(generations=2))
    b = run_paper_simulation(m, req, SimulationConfig(generations=3))
    assert b.plan.rows[: len(a.plan)] == a.plan.rows
    assert b.theta[1] == a.theta[1]
