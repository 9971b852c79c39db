"""Shared fixtures: weight bases, small models and isolated settings."""

import json

import pytest

from tests import TEST_DATA_DIR
from config.settings import EngineSettings
from core.values import WeightBasis
from core.series import GenSeries
from core.valuation import ArcValuation, parse_arc
from core.model import initial_model


@pytest.fixture
def settings(tmp_path):
    """Settings backed by a throwaway JSON file."""
    config = tmp_path / "engine_config.json"
    config.write_text(json.dumps({"logging": {"level": "WARNING"}}), encoding="utf-8")
    return EngineSettings(config)


@pytest.fixture
def basis_1():
    return WeightBasis.parse(["1"])


@pytest.fixture
def basis_2():
    return WeightBasis.parse(["1", "sqrt2"])


@pytest.fixture
def basis_3():
    return WeightBasis.parse(["1", "sqrt2", "sqrt3"])


@pytest.fixture
def full_rank_model(basis_3):
    names = ("x1", "x2", "x3")
    return initial_model(names, 3, ArcValuation.initial(basis_3, names, 3, {}))


@pytest.fixture
def corank_one_model(basis_2):
    """x1, x2 independent; y along the arc y = x1*x2."""
    names = ("x1", "x2", "y")
    arcs = {"y": parse_arc("x1*x2", basis_2, names[:2])}
    return initial_model(names, 2, ArcValuation.initial(basis_2, names, 2, arcs))


@pytest.fixture
def invariant_model(basis_2):
    """x1, x2 independent; y vanishes along the arc."""
    names = ("x1", "x2", "y")
    arcs = {"y": GenSeries.zero(basis_2)}
    return initial_model(names, 2, ArcValuation.initial(basis_2, names, 2, arcs))


@pytest.fixture
def fixture_path():
    def resolve(name: str):
        return TEST_DATA_DIR / name
    return resolve


@pytest.fixture
def cusp_model(basis_1):
    """x independent; y along y = x^(3/2) + x^(7/4), known below value 8."""
    names = ("x", "y")
    arcs = {"y": parse_arc("x^(3/2) + x^(7/4)", basis_1, ("x",))}
    arc = ArcValuation.initial(basis_1, names, 1, arcs, basis_1.value([8]))
    return initial_model(names, 1, arc)


@pytest.fixture
def settings_factory(tmp_path):
    """Fresh settings per call, all reading the same throwaway JSON file."""
    config = tmp_path / "factory_config.json"
    config.write_text(json.dumps({"logging": {"level": "WARNING"}}), encoding="utf-8")
    return lambda: EngineSettings(config)
