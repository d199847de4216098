"""Logistic regression of binary scores on factor levels, with coefficient and Wald tables.

Factors enter with treatment coding against their first declared value. Columns
are named ``C(factor)[T.level]``; order-2 interaction columns join two of those
with ``:``.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.special import expit
from scipy.stats import chi2 as chi2_dist
from scipy.stats import norm

from .errors import FitError, CovplanError
from .model import FactorModel
from .pairwise import align, fmt6
from .scores import ScoreDataset

log = logging.getLogger(__name__)

INTERCEPT = "Intercept"
Z_975 = 1.96
MAX_ITER = 25
GRAD_TOL = 1e-8
STEP_TOL = 1e-10
SEPARATION_BOUND = 15.0


def dummy_name(factor: str, level: str) -> str:
    return f"C({factor})[T.{level}]"


def group_name(factor: str) -> str:
    return f"C({factor})"


@dataclass(frozen=True)
class DesignMatrix:
    columns: tuple
    X: np.ndarray
    y: np.ndarray
    groups: dict  # group name -> column names, in column order
    dropped: tuple = ()
    row_ids: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.X.shape

    def repeated_rows(self) -> bool:
        """Whether several observations share one plan row (they are treated as independent)."""
        if self.row_ids is None:
            return False
        return len(np.unique(self.row_ids)) < len(self.row_ids)


def build_design_matrix(
    model: FactorModel,
    plan,
    dataset: ScoreDataset,
    interaction_order: int = 1,
) -> DesignMatrix:
    """One design row per observation: intercept, level dummies, optional pairwise products.

    Columns that are identically zero in the data (a level, or a pair of levels,
    never observed in the scored rows) are dropped with a warning.
    """
    if interaction_order not in (1, 2):
        raise CovplanError("interaction order must be 1 or 2")
    if len(dataset) == 0:
        raise CovplanError("no observations to fit")
    by_id = plan.as_dict()
    encoded = {rid: model.encode(row) for rid, row in by_id.items()}

    names = [INTERCEPT]
    groups = {INTERCEPT: [INTERCEPT]}
    main = []  # (factor index, level index, column name)
    for fi, f in enumerate(model.factors):
        g = group_name(f.name)
        groups[g] = []
        for li in range(1, f.size):
            col = dummy_name(f.name, f.values[li])
            main.append((fi, li, col))
            names.append(col)
            groups[g].append(col)
    inter = []
    if interaction_order == 2:
        for a, b in itertools.combinations(range(model.n), 2):
            g = f"{group_name(model.factors[a].name)}:{group_name(model.factors[b].name)}"
            groups[g] = []
            for (fa, la, ca), (fb, lb, cb) in itertools.product(
                [m for m in main if m[0] == a], [m for m in main if m[0] == b]
            ):
                col = f"{ca}:{cb}"
                inter.append((fa, la, fb, lb, col))
                names.append(col)
                groups[g].append(col)

    obs = dataset.observations
    X = np.zeros((len(obs), len(names)))
    X[:, 0] = 1.0
    y = np.array([s for _, _, s in obs], dtype=float)
    rids = np.array([r for r, _, _ in obs])
    for i, (rid, _, _) in enumerate(obs):
        code = encoded[rid]
        c = 1
        for fi, li, _ in main:
            X[i, c] = code[fi] == li
            c += 1
        for fa, la, fb, lb, _ in inter:
            X[i, c] = code[fa] == la and code[fb] == lb
            c += 1

    zero = [j for j in range(1, len(names)) if not X[:, j].any()]
    dropped = tuple(names[j] for j in zero)
    if dropped:
        log.warning("dropping inestimable all-zero columns: %s", ", ".join(dropped))
        keep = [j for j in range(len(names)) if j not in set(zero)]
        X = X[:, keep]
        names = [names[j] for j in keep]
    kept = set(names)
    groups = {g: tuple(c for c in cols if c in kept) for g, cols in groups.items()}
    groups = {g: cols for g, cols in groups.items() if cols}
    return DesignMatrix(tuple(names), X, y, groups, dropped, rids)


def log_likelihood(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score_vector(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood."""
    return X.T @ (y - expit(X @ beta))


def collinear_columns(X: np.ndarray, columns) -> list:
    """Columns that are linear combinations of the columns before them."""
    bad, kept = [], []
    for j in range(X.shape[1]):
        trial = kept + [j]
        if np.linalg.matrix_rank(X[:, trial]) == len(trial):
            kept = trial
        else:
            bad.append(columns[j])
    return bad


@dataclass(frozen=True)
class RegressionFit:
    columns: tuple
    coef: np.ndarray
    cov: np.ndarray
    loglik: float
    iterations: int
    grad_norm: float
    groups: dict = field(default_factory=dict)
    n_obs: int = 0
    dropped: tuple = ()
    repeated_rows: bool = False

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))


def fit_logistic(dm: DesignMatrix, max_iter: int = MAX_ITER) -> RegressionFit:
    """Maximum-likelihood logistic fit by Newton-Raphson (IRLS)."""
    X, y = dm.X, dm.y
    if np.linalg.matrix_rank(X) < X.shape[1]:
        bad = collinear_columns(X, dm.columns)
        raise FitError(f"design matrix is rank deficient; collinear columns: {', '.join(bad)}", bad)
    beta = np.zeros(X.shape[1])
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(X @ beta)
        hess = X.T @ (X * (p * (1 - p))[:, None])
        try:
            step = np.linalg.solve(hess, X.T @ (y - p))
        except np.linalg.LinAlgError:
            break
        beta = beta + step
        grad = score_vector(X, y, beta)
        if np.max(np.abs(grad)) < GRAD_TOL or np.max(np.abs(step)) < STEP_TOL:
            converged = True
            break
    worst = int(np.argmax(np.abs(beta)))
    if abs(beta[worst]) > SEPARATION_BOUND:
        raise FitError(
            f"separation detected: coefficient of {dm.columns[worst]} diverges", [dm.columns[worst]]
        )
    if not converged:
        raise FitError(f"logistic fit did not converge in {max_iter} iterations")
    p = expit(X @ beta)
    hess = X.T @ (X * (p * (1 - p))[:, None])
    cov = np.linalg.inv(hess)
    cov = (cov + cov.T) / 2
    return RegressionFit(
        dm.columns, beta, cov, log_likelihood(X, y, beta), it,
        float(np.max(np.abs(score_vector(X, y, beta)))),
        dict(dm.groups), len(y), dm.dropped, dm.repeated_rows(),
    )


def significance_symbol(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


@dataclass(frozen=True)
class CoefficientRow:
    name: str
    coef: float
    se: float
    z: float
    p_value: float
    ci_low: float
    ci_high: float
    odds_ratio: float
    symbol: str


@dataclass(frozen=True)
class WaldRow:
    name: str
    chi2: float
    p_value: float
    df: int
    symbol: str


def coefficient_table(fit: RegressionFit) -> list:
    rows = []
    for name, b, se in zip(fit.columns, fit.coef, fit.se):
        z = b / se
        p = float(min(1.0, 2 * norm.sf(abs(z))))
        rows.append(CoefficientRow(
            name, float(b), float(se), float(z), p,
            float(b - Z_975 * se), float(b + Z_975 * se), float(np.exp(b)), significance_symbol(p),
        ))
    return rows


def wald_table(fit: RegressionFit, grouping: Optional[Mapping[str, tuple]] = None) -> list:
    """Joint Wald chi-square test that each group's coefficients are all zero."""
    grouping = fit.groups if grouping is None else grouping
    pos = {c: i for i, c in enumerate(fit.columns)}
    rows = []
    for name, cols in grouping.items():
        try:
            idx = [pos[c] for c in cols]
        except KeyError as exc:
            raise CovplanError(f"group {name!r} names unknown column {exc.args[0]!r}") from None
        b = fit.coef[idx]
        sub = fit.cov[np.ix_(idx, idx)]
        if np.linalg.matrix_rank(sub) < len(idx):
            raise FitError(f"covariance block of group {name!r} is singular", cols)
        stat = float(b @ np.linalg.solve(sub, b))
        stat = max(stat, 0.0)
        p = float(chi2_dist.sf(stat, len(idx)))
        rows.append(WaldRow(name, stat, p, len(idx), significance_symbol(p)))
    return rows


def coefficient_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("term", "coefficient", "std_error", "ci_0.025", "ci_0.975", "p_value",
                "odds_ratio", "symbol"))
    for r in rows:
        w.writerow((r.name, fmt6(r.coef), fmt6(r.se), fmt6(r.ci_low), fmt6(r.ci_high),
                    fmt6(r.p_value), fmt6(r.odds_ratio), r.symbol))
    return buf.getvalue()


def wald_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("term", "chi2", "p_value", "df", "symbol"))
    for r in rows:
        w.writerow((r.name, fmt6(r.chi2), fmt6(r.p_value), r.df, r.symbol))
    return buf.getvalue()


def _notes(fit: RegressionFit) -> list:
    notes = []
    if fit.dropped:
        notes.append("dropped (level never observed): " + ", ".join(fit.dropped))
    if fit.repeated_rows:
        notes.append(
            "note: several observations share each plan row; they are treated as "
            "independent, so p-values may be optimistic"
        )
    return notes


def coefficient_text(rows, fit: Optional[RegressionFit] = None) -> str:
    table = [("", "coefficient", "[0.025", "0.975]", "p-value", "odds ratio", "symbol")]
    table += [(r.name, fmt6(r.coef), fmt6(r.ci_low), fmt6(r.ci_high), fmt6(r.p_value),
               fmt6(r.odds_ratio), r.symbol) for r in rows]
    lines = align(table)
    if fit is not None:
        lines = [f"logistic regression: {fit.n_obs} observations, {len(fit.columns)} columns, "
                 f"log-likelihood {fmt6(fit.loglik)}, {fit.iterations} iterations", ""] + lines
        extra = _notes(fit)
        if extra:
            lines += [""] + extra
    lines.append("")
    lines.append("symbols: *** p<0.001, ** p<0.01, * p<0.05, . p<0.1")
    return "\n".join(lines) + "\n"


def wald_text(rows) -> str:
    table = [("", "chi2", "p-value", "df constraint", "symbol")]
    table += [(r.name, fmt6(r.chi2), fmt6(r.p_value), str(r.df), r.symbol) for r in rows]
    return "\n".join(align(table)) + "\n"
