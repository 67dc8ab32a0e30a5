"""
Shared fixtures: preset instances and small helpers for writing instance
files into a temporary directory.
"""

import json
import os
import sys

import pytest

# Add src directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from backend.instance_io import serialize_instance  # noqa: E402
from modules.valuation_core import Instance, Valuation  # noqa: E402
from presets import named_instances as presets  # noqa: E402


@pytest.fixture
def chop():
    return presets.chopsticks_instance("cents")


@pytest.fixture
def chop_dimes():
    return presets.chopsticks_instance("dimes")


@pytest.fixture
def gap4():
    return presets.cost_gap_instance(4)


@pytest.fixture
def single_seller():
    """One seller with cost 3 selling a good worth 10"""
    return Instance((3,), Valuation.explicit([0, 10]))


@pytest.fixture
def write_instance(tmp_path):
    def _write(inst, name="instance.json", tiebreak="max-card-lex"):
        path = tmp_path / name
        path.write_text(serialize_instance(inst, tiebreak), encoding="utf-8")
        return str(path)

    return _write


@pytest.fixture
def write_json(tmp_path):
    def _write(obj, name):
        path = tmp_path / name
        path.write_text(json.dumps(obj), encoding="utf-8")
        return str(path)

    return _write
