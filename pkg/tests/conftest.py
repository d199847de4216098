import json

import pytest

from covplan.model import load_example_model, model_from_dict
from helpers import forbid


@pytest.fixture(scope="session")
def example_model():
    return load_example_model()


@pytest.fixture
def greedy_doc():
    return {
        "factors": [
            {"name": "generation", "values": ["sampling", "greedy"]},
            {"name": "temperature", "values": ["low", "medium", "high"]},
            {"name": "docs", "values": ["no", "yes"]},
        ],
        "constraints": [forbid(("generation", "greedy"), ("temperature", "high"))],
    }


@pytest.fixture
def greedy_model(greedy_doc):
    return model_from_dict(json.loads(json.dumps(greedy_doc)))
