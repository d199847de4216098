"""Greedy covering-plan construction and the plan CSV format."""
from __future__ import annotations

import csv
import io
import itertools
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .coverage import CoverageRequirement, required_interactions
from .errors import CoverageError, CovplanError
from .model import FactorModel

CANDIDATES_PER_STEP = 50


@dataclass(frozen=True)
class Plan:
    """Ordered, distinct, complete combinations. Row ids are 1-based unless given."""

    factor_names: tuple
    rows: tuple
    row_ids: tuple = None
    seed: Optional[int] = None
    requirement: Optional[CoverageRequirement] = None

    def __post_init__(self):
        object.__setattr__(self, "factor_names", tuple(self.factor_names))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if self.row_ids is None:
            object.__setattr__(self, "row_ids", tuple(range(1, len(self.rows) + 1)))
        else:
            object.__setattr__(self, "row_ids", tuple(int(i) for i in self.row_ids))
        if len(self.row_ids) != len(self.rows):
            raise CovplanError("row_ids and rows differ in length")
        if len(set(self.row_ids)) != len(self.row_ids):
            raise CovplanError("duplicate row_id in plan")
        width = len(self.factor_names)
        for rid, row in zip(self.row_ids, self.rows):
            if len(row) != width:
                raise CovplanError(f"plan row {rid}: expected {width} values, got {len(row)}")

    def __len__(self):
        return len(self.rows)

    def row(self, row_id: int) -> tuple:
        return self.rows[self.row_ids.index(row_id)]

    def as_dict(self) -> dict:
        return dict(zip(self.row_ids, self.rows))


def generate_plan(
    model: FactorModel,
    req: CoverageRequirement,
    seed: int = 0,
    candidates: int = CANDIDATES_PER_STEP,
) -> Plan:
    """Build a plan covering every feasible k-way interaction of ``req``.

    Each step builds ``candidates`` rows and keeps the one covering the most
    still-uncovered interactions. Among equally good candidates the one leaving the
    smallest lower bound on further rows wins (the largest uncovered count within a
    single k-subset of factors, since a row covers at most one interaction per
    subset); remaining ties go to the earliest candidate. A candidate
    starts from a randomly chosen uncovered interaction plus the fixed values;
    the remaining factors are visited in random order, each taking the value that
    covers the most uncovered interactions together with the factors already set
    (ties broken by the RNG). A value that leaves the partial row with no valid
    completion is skipped in favour of the next best.
    """
    required = required_interactions(model, req)
    if not required:
        raise CoverageError("nothing to cover: the requirement has no feasible interactions")
    k = req.strength
    scope = [model.factor_index(n) for n in req.scope]
    in_scope = set(scope)
    base = [None] * model.n
    for name, value in req.fixed:
        base[model.factor_index(name)] = model.value_index(name, value)
    sizes = [f.size for f in model.factors]
    constrained = bool(model.constraints)

    def encode(t):
        return tuple((model.factor_index(f), model.value_index(f, v)) for f, v in t.items)

    uncovered = {encode(t) for t in required}
    rng = random.Random(seed)

    def gain_of(partial, assigned_scope, fi, vi):
        if fi not in in_scope:
            return 0
        if k == 1:
            return ((fi, vi),) in uncovered
        if k == 2:
            new = (fi, vi)
            return sum(
                (((o, partial[o]), new) if o < fi else (new, (o, partial[o]))) in uncovered
                for o in assigned_scope
            )
        gain = 0
        for others in itertools.combinations(assigned_scope, k - 1):
            cut = sum(o < fi for o in others)
            items = [(o, partial[o]) for o in others]
            if tuple(items[:cut] + [(fi, vi)] + items[cut:]) in uncovered:
                gain += 1
        return gain

    subsets = list(itertools.combinations(scope, k))
    per_subset = {s: 0 for s in subsets}
    for t in uncovered:
        per_subset[tuple(i for i, _ in t)] += 1

    def project(row, s):
        if k == 2:
            return ((s[0], row[s[0]]), (s[1], row[s[1]]))
        return tuple((i, row[i]) for i in s)

    def score(row):
        gain, bound = 0, 0
        for s in subsets:
            left = per_subset[s]
            if project(row, s) in uncovered:
                gain += 1
                left -= 1
            bound = max(bound, left)
        return gain, -bound

    def build(pool):
        partial = list(base)
        for fi, vi in rng.choice(pool):
            partial[fi] = vi
        assigned_scope = sorted(i for i in scope if partial[i] is not None)
        free = [i for i in range(model.n) if partial[i] is None]
        rng.shuffle(free)
        for fi in free:
            ranked = sorted(
                range(sizes[fi]),
                key=lambda vi, ties=[rng.random() for _ in range(sizes[fi])]: (
                    -gain_of(partial, assigned_scope, fi, vi),
                    ties[vi],
                ),
            )
            for vi in ranked:
                partial[fi] = vi
                if not constrained or model.extendable(partial):
                    break
            else:
                raise RuntimeError("row completion dead-ended on an extendable partial row")
            if fi in in_scope:
                assigned_scope.append(fi)
                assigned_scope.sort()
        return tuple(partial)

    rows = []
    while uncovered:
        pool = sorted(uncovered)
        best, best_score = None, (0, 0)
        for _ in range(candidates):
            row = build(pool)
            sc = score(row)
            if sc[0] > 0 and (best is None or sc > best_score):
                best, best_score = row, sc
        if best is None:
            raise RuntimeError("greedy step made no progress")
        rows.append(best)
        for s in subsets:
            t = project(best, s)
            if t in uncovered:
                uncovered.discard(t)
                per_subset[s] -= 1
    return Plan(model.names, [model.decode(r) for r in rows], seed=seed, requirement=req)


def random_plan(model: FactorModel, n_rows: int, seed: int = 0) -> Plan:
    """``n_rows`` distinct valid combinations drawn uniformly by rejection."""
    rng = random.Random(seed)
    seen, rows = set(), []
    limit = n_rows * 1000
    attempts = 0
    while len(rows) < n_rows:
        attempts += 1
        if attempts > limit:
            raise CovplanError(f"could not draw {n_rows} distinct valid combinations")
        idx = tuple(rng.randrange(f.size) for f in model.factors)
        if idx in seen or model.forbidden_status(idx) is not False:
            continue
        seen.add(idx)
        rows.append(model.decode(idx))
    return Plan(model.names, rows, seed=seed)


def merge_plans(plans: Sequence[Plan]) -> Plan:
    """Concatenate plans, keeping the first occurrence of each combination."""
    names = plans[0].factor_names
    seen, rows = set(), []
    for p in plans:
        if p.factor_names != names:
            raise CovplanError("cannot merge plans over different factors")
        for r in p.rows:
            if r not in seen:
                seen.add(r)
                rows.append(r)
    return Plan(names, rows)


def write_plan(plan: Plan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row_id",) + plan.factor_names)
    for rid, row in zip(plan.row_ids, plan.rows):
        w.writerow((rid,) + row)
    return buf.getvalue()


def read_plan(text: str, model: Optional[FactorModel] = None) -> Plan:
    """Parse a plan CSV. With a model, the header and values are checked against it."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CovplanError("plan file is empty") from None
    if not header or header[0].strip() != "row_id" or len(header) < 2:
        raise CovplanError("plan header must be 'row_id,<factor>,...'")
    names = tuple(h.strip() for h in header[1:])
    if model is not None and names != model.names:
        raise CovplanError(
            f"plan factors {list(names)} do not match model factors {list(model.names)}"
        )
    ids, rows = [], []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise CovplanError(f"plan line {lineno}: expected {len(header)} fields")
        try:
            ids.append(int(rec[0]))
        except ValueError:
            raise CovplanError(f"plan line {lineno}: row_id {rec[0]!r} is not an integer") from None
        row = tuple(c.strip() for c in rec[1:])
        if model is not None:
            try:
                model.encode(row)
            except CovplanError as exc:
                raise CovplanError(f"plan row {ids[-1]}: {exc}") from None
        rows.append(row)
    if len(set(rows)) != len(rows):
        raise CovplanError("plan contains duplicate combinations")
    return Plan(names, rows, ids)
