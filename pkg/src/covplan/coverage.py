"""k-way interaction requirements and plan coverage checks."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import CoverageError
from .model import FactorModel


@dataclass(frozen=True)
class CoverageRequirement:
    """Strength ``k``, the factors whose interactions must be covered, and pinned values.

    Build it with :meth:`for_model`, which resolves the default scope and validates
    against a model.
    """

    strength: int
    scope: tuple
    fixed: tuple = ()  # ((factor, value), ...) in model order

    @classmethod
    def for_model(
        cls,
        model: FactorModel,
        strength: int,
        scope: Optional[Sequence[str]] = None,
        fixed: Optional[Mapping[str, str]] = None,
    ) -> "CoverageRequirement":
        fixed = dict(fixed or {})
        for name, value in fixed.items():
            model.value_index(name, value)
        if scope is None:
            scope = [n for n in model.names if n not in fixed]
        else:
            scope = list(scope)
            for name in scope:
                model.factor_index(name)
            if len(set(scope)) != len(scope):
                raise CoverageError("scope lists a factor twice")
        overlap = sorted(set(scope) & set(fixed))
        if overlap:
            raise CoverageError(f"fixed factors cannot be in scope: {', '.join(overlap)}")
        if not isinstance(strength, int) or strength < 1:
            raise CoverageError("strength must be a positive integer")
        if strength > len(scope):
            raise CoverageError(
                f"strength {strength} exceeds the {len(scope)} factor(s) in scope"
            )
        order = {n: i for i, n in enumerate(model.names)}
        scope_t = tuple(sorted(scope, key=order.__getitem__))
        fixed_t = tuple(sorted(fixed.items(), key=lambda kv: order[kv[0]]))
        return cls(strength, scope_t, fixed_t)

    @property
    def fixed_map(self) -> dict:
        return dict(self.fixed)

    def to_dict(self) -> dict:
        return {"strength": self.strength, "scope": list(self.scope), "fixed": dict(self.fixed)}


@dataclass(frozen=True, order=True)
class Interaction:
    """Value labels for exactly k distinct factors, in model factor order."""

    items: tuple  # ((factor, value), ...)

    def __str__(self):
        return ", ".join(f"{f}={v}" for f, v in self.items)


@dataclass
class CoverageReport:
    required: int
    covered: int
    missing: list = field(default_factory=list)

    @property
    def coverage_ratio(self) -> float:
        return 1.0 if self.required == 0 else self.covered / self.required

    @property
    def complete(self) -> bool:
        return not self.missing


def _base_partial(model: FactorModel, req: CoverageRequirement) -> list:
    partial = [None] * model.n
    for name, value in req.fixed:
        partial[model.factor_index(name)] = model.value_index(name, value)
    return partial


def interaction_feasible(model: FactorModel, req: CoverageRequirement, t: Interaction) -> bool:
    """Whether ``t`` together with the fixed values extends to a valid full combination."""
    partial = _base_partial(model, req)
    for name, value in t.items:
        fi = model.factor_index(name)
        vi = model.value_index(name, value)
        if partial[fi] is not None and partial[fi] != vi:
            return False
        partial[fi] = vi
    return model.extendable(partial)


def _candidate_interactions(model: FactorModel, req: CoverageRequirement):
    scope_idx = [model.factor_index(n) for n in req.scope]
    for subset in itertools.combinations(scope_idx, req.strength):
        factors = [model.factors[i] for i in subset]
        for values in itertools.product(*(f.values for f in factors)):
            yield Interaction(tuple((f.name, v) for f, v in zip(factors, values)))


def required_interactions(model: FactorModel, req: CoverageRequirement) -> list:
    """Feasible k-way interactions over the scope, ordered by factor then value order."""
    return [t for t in _candidate_interactions(model, req) if interaction_feasible(model, req, t)]


def infeasible_interactions(model: FactorModel, req: CoverageRequirement) -> list:
    """The interactions dropped from the requirement because no valid row can contain them."""
    return [
        t for t in _candidate_interactions(model, req) if not interaction_feasible(model, req, t)
    ]


def check_plan_rows(model: FactorModel, req: CoverageRequirement, plan) -> None:
    """Raise if any plan row is constraint-invalid or disagrees with the fixed values."""
    fixed = [(model.factor_index(n), v) for n, v in req.fixed]
    for row_id, row in zip(plan.row_ids, plan.rows):
        if len(row) != model.n:
            raise CoverageError(f"plan row {row_id}: expected {model.n} values, got {len(row)}")
        idx = model.encode(row)
        if model.forbidden_status(idx) is not False:
            raise CoverageError(f"plan row {row_id} violates a model constraint")
        for fi, value in fixed:
            if row[fi] != value:
                raise CoverageError(
                    f"plan row {row_id} has {model.names[fi]}={row[fi]}, fixed value is {value}"
                )


def coverage_report(model: FactorModel, req: CoverageRequirement, plan) -> CoverageReport:
    """Count which required interactions appear in at least one plan row."""
    check_plan_rows(model, req, plan)
    required = required_interactions(model, req)
    positions = {n: i for i, n in enumerate(model.names)}
    seen = set()
    scope_pos = [positions[n] for n in req.scope]
    for row in plan.rows:
        for subset in itertools.combinations(scope_pos, req.strength):
            seen.add(tuple((model.names[i], row[i]) for i in subset))
    missing = [t for t in required if t.items not in seen]
    return CoverageReport(len(required), len(required) - len(missing), missing)
