"""Synthetic score data: the hierarchical Gamma/Beta/Bernoulli scheme and effect injection.

Random streams
--------------
Every stream is a Philox generator seeded from ``SeedSequence(master_seed,
spawn_key=key)``. Plan generation ``g`` uses key ``(0, g)`` (its integer seed is
the first word of that sequence's state) and plan row ``r`` uses key ``(1, r)``.
A row's draws therefore depend only on the master seed and its row id, so
appending rows never changes the draws of rows already present.
"""
from __future__ import annotations

import csv
import json
import io
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .coverage import CoverageRequirement
from .errors import CovplanError
from .generator import Plan, generate_plan, merge_plans
from .model import FactorModel
from .regression import INTERCEPT, dummy_name
from .scores import ScoreDataset

PLAN_STREAM = 0
ROW_STREAM = 1


def substream(master_seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def derived_seed(master_seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(master_seed, spawn_key=key).generate_state(1)[0])


def gamma_draw(rng: np.random.Generator, shape: float, rate: float = 1.0) -> float:
    """One Gamma(shape, rate) variate by Marsaglia-Tsang squeeze/rejection."""
    if shape <= 0 or rate <= 0:
        raise CovplanError("gamma shape and rate must be positive")
    if shape < 1:
        # boost: Gamma(a) = Gamma(a + 1) * U^(1/a)
        u = rng.random()
        return gamma_draw(rng, shape + 1.0, rate) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.standard_normal()
        v = 1.0 + c * x
        if v <= 0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * x**4:
            return d * v / rate
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v / rate


def beta_draw(rng: np.random.Generator, a: float, b: float) -> float:
    x = gamma_draw(rng, a)
    y = gamma_draw(rng, b)
    return x / (x + y)


def bernoulli_draws(rng: np.random.Generator, theta: float, size: int) -> np.ndarray:
    return (rng.random(size) < theta).astype(int)


@dataclass(frozen=True)
class SimulationConfig:
    alpha_shape: float = 5.0
    alpha_rate: float = 1.0
    beta_shape: float = 2.0
    beta_rate: float = 1.0
    samples_per_row: int = 30
    generations: int = 20
    seed: int = 0

    def __post_init__(self):
        for name in ("alpha_shape", "alpha_rate", "beta_shape", "beta_rate"):
            if not getattr(self, name) > 0:
                raise CovplanError(f"{name} must be positive")
        if self.samples_per_row < 1:
            raise CovplanError("samples_per_row must be at least 1")
        if self.generations < 1:
            raise CovplanError("generations must be at least 1")


@dataclass(frozen=True)
class SimulatedDataset:
    dataset: ScoreDataset
    theta: dict  # row_id -> latent success probability

    @property
    def plan(self) -> Plan:
        return self.dataset.plan


def sample_theta(cfg: SimulationConfig, rng: np.random.Generator) -> float:
    a = gamma_draw(rng, cfg.alpha_shape, cfg.alpha_rate)
    b = gamma_draw(rng, cfg.beta_shape, cfg.beta_rate)
    return beta_draw(rng, a, b)


def _score_rows(plan: Plan, thetas: Mapping, samples: int, streams: Mapping) -> ScoreDataset:
    obs = []
    width = len(str(samples))
    for rid in plan.row_ids:
        draws = bernoulli_draws(streams[rid], thetas[rid], samples)
        obs.extend((rid, f"s{j + 1:0{width}d}", int(s)) for j, s in enumerate(draws))
    return ScoreDataset(plan, tuple(obs))


def merged_plans(model: FactorModel, req: CoverageRequirement, cfg: SimulationConfig) -> Plan:
    """``cfg.generations`` covering plans with derived seeds, merged without duplicates."""
    plans = [
        generate_plan(model, req, derived_seed(cfg.seed, PLAN_STREAM, g))
        for g in range(cfg.generations)
    ]
    return merge_plans(plans)


def run_paper_simulation(
    model: FactorModel, req: CoverageRequirement, cfg: SimulationConfig = SimulationConfig()
) -> SimulatedDataset:
    """Hierarchical simulation: alpha ~ Gamma, beta ~ Gamma, theta ~ Beta(alpha, beta) per
    unique plan row, then ``samples_per_row`` Bernoulli(theta) scores."""
    plan = merged_plans(model, req, cfg)
    streams = {rid: substream(cfg.seed, ROW_STREAM, rid) for rid in plan.row_ids}
    thetas = {rid: sample_theta(cfg, streams[rid]) for rid in plan.row_ids}
    return SimulatedDataset(_score_rows(plan, thetas, cfg.samples_per_row, streams), thetas)


def effect_columns(model: FactorModel) -> tuple:
    """Order-1 design column names, intercept first."""
    cols = [INTERCEPT]
    for f in model.factors:
        cols += [dummy_name(f.name, v) for v in f.values[1:]]
    return tuple(cols)


def row_log_odds(model: FactorModel, row, coefficients: Mapping[str, float]) -> float:
    eta = coefficients.get(INTERCEPT, 0.0)
    for f, v in zip(model.factors, row):
        if v != f.values[0]:
            eta += coefficients.get(dummy_name(f.name, v), 0.0)
    return eta


def simulate_with_effects(
    model: FactorModel,
    plan: Plan,
    true_coefficients: Mapping[str, float],
    samples_per_row: int = 30,
    seed: int = 0,
) -> SimulatedDataset:
    """Scores with theta = logistic(x'beta) for known coefficients; unnamed columns are 0."""
    known = set(effect_columns(model))
    unknown = sorted(set(true_coefficients) - known)
    if unknown:
        raise CovplanError(f"unknown effect column(s): {', '.join(unknown)}")
    if samples_per_row < 1:
        raise CovplanError("samples_per_row must be at least 1")
    thetas = {}
    for rid, row in zip(plan.row_ids, plan.rows):
        eta = row_log_odds(model, row, true_coefficients)
        thetas[rid] = 1.0 / (1.0 + math.exp(-eta))
    streams = {rid: substream(seed, ROW_STREAM, rid) for rid in plan.row_ids}
    return SimulatedDataset(_score_rows(plan, thetas, samples_per_row, streams), thetas)


def theta_csv(sim: SimulatedDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row_id", "theta_true"))
    for rid in sim.plan.row_ids:
        w.writerow((rid, repr(float(sim.theta[rid]))))
    return buf.getvalue()


def parse_effects(document: str) -> dict:
    """An effects file is a JSON object mapping design column name to log-odds coefficient."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CovplanError(f"malformed effects file: {exc}") from None
    if not isinstance(doc, dict) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in doc.values()
    ):
        raise CovplanError("effects file must be a JSON object of column -> number")
    return {str(k): float(v) for k, v in doc.items()}
