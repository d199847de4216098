"""Small builders shared by the test modules."""
from hypothesis import strategies as st

from covplan.generator import Plan
from covplan.model import model_from_dict
from covplan.scores import ScoreDataset


def bool_doc(n, constraints=()):
    return {
        "factors": [{"name": f"x{i}", "values": ["0", "1"]} for i in range(n)],
        "constraints": list(constraints),
    }


def bool_model(n, constraints=()):
    return model_from_dict(bool_doc(n, constraints))


def forbid(*atoms):
    return {"op": "and", "args": [{"factor": f, "value": v} for f, v in atoms]}


def dataset_from_counts(plan, counts):
    """counts: {row_id: (successes, n)} -> ScoreDataset with successes first."""
    obs = []
    for rid, (s, n) in counts.items():
        obs += [(rid, f"s{j}", 1 if j < s else 0) for j in range(n)]
    return ScoreDataset(plan, tuple(obs))


def single_factor_plan():
    return Plan(("x",), [("F",), ("T",)])


@st.composite
def model_docs(draw, max_factors=4, max_levels=3):
    n = draw(st.integers(1, max_factors))
    factors = []
    for i in range(n):
        m = draw(st.integers(2, max_levels))
        factors.append({"name": f"f{i}", "values": [f"v{j}" for j in range(m)]})

    def atom():
        f = draw(st.sampled_from(factors))
        return {"factor": f["name"], "value": draw(st.sampled_from(f["values"]))}

    def expr(depth):
        kind = draw(st.sampled_from(["atom", "and", "or", "not", "implies"] if depth else ["atom"]))
        if kind == "atom":
            return atom()
        if kind == "not":
            return {"op": "not", "args": [expr(depth - 1)]}
        if kind == "implies":
            return {"op": "implies", "args": [expr(depth - 1), expr(depth - 1)]}
        return {"op": kind, "args": [expr(depth - 1) for _ in range(draw(st.integers(1, 3)))]}

    constraints = [expr(2) for _ in range(draw(st.integers(0, 3)))]
    return {"factors": factors, "constraints": constraints}
