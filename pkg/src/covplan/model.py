"""Factor models: attributes, their discrete levels, and forbidding constraints.

A model file is JSON::

    {"factors": [{"name": "temperature", "values": ["low", "medium", "high"]}, ...],
     "constraints": [{"op": "and", "args": [{"factor": "generation", "value": "greedy"},
                                            {"factor": "temperature", "value": "high"}]}]}

Every constraint describes combinations that are *not allowed*. A top-level
``implies`` constraint is read as a rule: it forbids combinations where the
left side holds and the right side does not.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, Optional, Sequence, Union

from .errors import ModelError

ENUMERATION_CAP = 10**6

_OPS = ("not", "and", "or", "implies")


@dataclass(frozen=True)
class Atom:
    factor: str
    value: str


@dataclass(frozen=True)
class Op:
    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in _OPS:
            raise ModelError(f"unknown constraint operator {self.op!r}")
        if self.op == "not" and len(self.args) != 1:
            raise ModelError("'not' takes exactly one argument")
        if self.op == "implies" and len(self.args) != 2:
            raise ModelError("'implies' takes exactly two arguments")
        if self.op in ("and", "or") and len(self.args) < 1:
            raise ModelError(f"'{self.op}' needs at least one argument")


Expr = Union[Atom, Op]


@dataclass(frozen=True)
class Factor:
    name: str
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not isinstance(self.name, str) or not self.name:
            raise ModelError("factor name must be a nonempty string")
        if len(self.values) < 2:
            raise ModelError(f"factor {self.name!r} needs at least 2 values")
        if any(not isinstance(v, str) or not v for v in self.values):
            raise ModelError(f"factor {self.name!r}: values must be nonempty strings")
        if len(set(self.values)) != len(self.values):
            raise ModelError(f"factor {self.name!r} has duplicate values")

    @property
    def size(self) -> int:
        return len(self.values)


# Compiled node forms, index based: ("atom", fi, vi) | ("not", n) | ("and", ns) | ("or", ns)
# | ("implies", a, b).

def _eval3(node, partial):
    """Kleene three-valued evaluation; ``None`` in ``partial`` means unassigned."""
    tag = node[0]
    if tag == "atom":
        v = partial[node[1]]
        return None if v is None else v == node[2]
    if tag == "not":
        r = _eval3(node[1], partial)
        return None if r is None else not r
    if tag == "and":
        unknown = False
        for child in node[1]:
            r = _eval3(child, partial)
            if r is False:
                return False
            if r is None:
                unknown = True
        return None if unknown else True
    if tag == "or":
        unknown = False
        for child in node[1]:
            r = _eval3(child, partial)
            if r is True:
                return True
            if r is None:
                unknown = True
        return None if unknown else False
    # implies: (not a) or b
    a = _eval3(node[1], partial)
    if a is False:
        return True
    b = _eval3(node[2], partial)
    if b is True:
        return True
    if a is True and b is False:
        return False
    return None


@dataclass(frozen=True)
class Constraint:
    expr: Expr

    def to_json(self) -> dict:
        return _expr_to_json(self.expr)


@dataclass(frozen=True)
class FactorModel:
    factors: tuple
    constraints: tuple = ()
    _index: dict = field(default=None, repr=False, compare=False)
    _compiled: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.factors:
            raise ModelError("model must declare at least one factor")
        index = {}
        for i, f in enumerate(self.factors):
            if f.name in index:
                raise ModelError(f"duplicate factor name {f.name!r}")
            index[f.name] = i
        object.__setattr__(self, "_index", index)
        object.__setattr__(
            self, "_compiled", tuple(self._compile_constraint(c) for c in self.constraints)
        )

    def _compile(self, expr):
        if isinstance(expr, Atom):
            if expr.factor not in self._index:
                raise ModelError(f"unknown factor {expr.factor!r} in constraint")
            fi = self._index[expr.factor]
            try:
                vi = self.factors[fi].values.index(expr.value)
            except ValueError:
                raise ModelError(
                    f"unknown value {expr.value!r} for factor {expr.factor!r} in constraint"
                ) from None
            return ("atom", fi, vi)
        if expr.op == "not":
            return ("not", self._compile(expr.args[0]))
        if expr.op == "implies":
            return ("implies", self._compile(expr.args[0]), self._compile(expr.args[1]))
        return (expr.op, tuple(self._compile(a) for a in expr.args))

    def _compile_constraint(self, c: Constraint):
        node = self._compile(c.expr)
        if node[0] == "implies":
            # a rule: the forbidden region is where it is violated
            return ("not", node)
        return node

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def names(self) -> tuple:
        return tuple(f.name for f in self.factors)

    def factor_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown factor {name!r}") from None

    def value_index(self, factor: str, value: str) -> int:
        f = self.factors[self.factor_index(factor)]
        try:
            return f.values.index(value)
        except ValueError:
            raise ModelError(f"unknown value {value!r} for factor {factor!r}") from None

    def encode(self, combination: Sequence[str]) -> tuple:
        """Value labels in factor order -> value indices."""
        if len(combination) != self.n:
            raise ModelError(
                f"combination has {len(combination)} values, model has {self.n} factors"
            )
        return tuple(self.value_index(f.name, v) for f, v in zip(self.factors, combination))

    def decode(self, indices: Sequence[int]) -> tuple:
        return tuple(f.values[i] for f, i in zip(self.factors, indices))

    def forbidden_status(self, partial: Sequence[Optional[int]]):
        """True if some constraint is already violated, False if none can be, else None."""
        unknown = False
        for node in self._compiled:
            r = _eval3(node, partial)
            if r is True:
                return True
            if r is None:
                unknown = True
        return None if unknown else False

    def extendable(self, partial: Sequence[Optional[int]]) -> bool:
        """Whether some complete, valid combination agrees with ``partial``.

        Depth-first over unassigned factors in declared order, values in declared
        order, pruning as soon as a constraint is decided true.
        """
        partial = list(partial)
        if not self._compiled:
            return True
        free = [i for i, v in enumerate(partial) if v is None]
        sizes = [f.size for f in self.factors]

        def search(depth):
            status = self.forbidden_status(partial)
            if status is True:
                return False
            if status is False:
                return True
            if depth == len(free):
                return False  # unreachable: a full assignment is always decided
            fi = free[depth]
            for vi in range(sizes[fi]):
                partial[fi] = vi
                if search(depth + 1):
                    partial[fi] = None
                    return True
            partial[fi] = None
            return False

        return search(0)


def is_valid(model: FactorModel, combination: Sequence[str]) -> bool:
    """True iff the combination violates none of the model's constraints."""
    return model.forbidden_status(model.encode(combination)) is False


def space_size(model: FactorModel, cap: int = ENUMERATION_CAP) -> dict:
    """Full-factorial size and, when ``full <= cap``, the exact count of valid combinations."""
    full = math.prod(f.size for f in model.factors)
    if not model.constraints:
        return {"full": full, "valid": full}
    if full > cap:
        return {"full": full, "valid": "not-computed"}
    sizes = [f.size for f in model.factors]
    partial = [None] * model.n

    def count(depth):
        status = model.forbidden_status(partial)
        if status is True:
            return 0
        if status is False:
            return math.prod(sizes[depth:])
        total = 0
        for vi in range(sizes[depth]):
            partial[depth] = vi
            total += count(depth + 1)
        partial[depth] = None
        return total

    return {"full": full, "valid": count(0)}


def iter_valid(model: FactorModel):
    """All valid combinations (as label tuples) in lexicographic factor/value order."""
    for idx in itertools.product(*(range(f.size) for f in model.factors)):
        if model.forbidden_status(idx) is False:
            yield model.decode(idx)


# -- serialization ----------------------------------------------------------

def _expr_from_json(obj) -> Expr:
    if not isinstance(obj, Mapping):
        raise ModelError(f"constraint node must be an object, got {obj!r}")
    if "op" in obj:
        args = obj.get("args")
        if not isinstance(args, list):
            raise ModelError(f"constraint {obj['op']!r} node needs an 'args' list")
        return Op(obj["op"], tuple(_expr_from_json(a) for a in args))
    if "factor" in obj and "value" in obj:
        return Atom(str(obj["factor"]), str(obj["value"]))
    raise ModelError(f"malformed constraint node {obj!r}")


def _expr_to_json(expr: Expr) -> dict:
    if isinstance(expr, Atom):
        return {"factor": expr.factor, "value": expr.value}
    return {"op": expr.op, "args": [_expr_to_json(a) for a in expr.args]}


def model_from_dict(doc: Mapping) -> FactorModel:
    if not isinstance(doc, Mapping) or "factors" not in doc:
        raise ModelError("model document needs a 'factors' list")
    raw = doc["factors"]
    if not isinstance(raw, list):
        raise ModelError("'factors' must be a list")
    factors = []
    for f in raw:
        if not isinstance(f, Mapping) or "name" not in f or not isinstance(f.get("values"), list):
            raise ModelError(f"malformed factor entry {f!r}")
        factors.append(Factor(f["name"], tuple(f["values"])))
    constraints = doc.get("constraints", [])
    if not isinstance(constraints, list):
        raise ModelError("'constraints' must be a list")
    return FactorModel(tuple(factors), tuple(Constraint(_expr_from_json(c)) for c in constraints))


def parse_model(document: str) -> FactorModel:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model document: {exc}") from None
    return model_from_dict(doc)


def model_to_dict(model: FactorModel) -> dict:
    return {
        "factors": [{"name": f.name, "values": list(f.values)} for f in model.factors],
        "constraints": [c.to_json() for c in model.constraints],
    }


def dump_model(model: FactorModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def load_model(path) -> FactorModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def example_model_text() -> str:
    return resources.files("covplan.data").joinpath("running_example.json").read_text("utf-8")


def load_example_model() -> FactorModel:
    """The 15-factor code-summarization design space (12 binary, 3 three-level factors)."""
    return parse_model(example_model_text())
