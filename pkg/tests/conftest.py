"""
Shared fixtures for the duality-lab test-suite.

The demo parametrization q = w = sqrt(2), rho_- = 1/3 solved onto B_1^1
gives r = 2, ell = 1 and the single-shock rates d_l = 4/3, d_r = 3/2.
"""

import math
from pathlib import Path

import orjson
import pytest

from app.services.asep_open import (
    ManifoldSpec,
    Rates,
    rates_from_parametrization,
    solve_manifold,
)
from app.services.lattice_core import Lattice
from app.services.shock_measures import boundary_shock_profile

SQRT2 = math.sqrt(2.0)
Q2_GRID = (1.5, 2.0, 3.0)
RHO_MINUS_GRID = (0.2, 1.0 / 3.0, 0.45)


def manifold_rates(N: int = 1, M: int = 1, rho_minus: float = 1.0 / 3.0, q2: float = 2.0) -> Rates:
    """Rates on B_N^M with q = w = sqrt(q2); the defaults are the demo parameters."""
    q = math.sqrt(q2)
    return rates_from_parametrization(solve_manifold(q, q, rho_minus, ManifoldSpec(N=N, M=M)))


@pytest.fixture(params=Q2_GRID, ids=lambda q2: f"q2={q2}")
def q2(request) -> float:
    return request.param


@pytest.fixture
def demo_rates() -> Rates:
    return manifold_rates()


@pytest.fixture
def off_manifold_rates(demo_rates) -> Rates:
    """Demo rates with alpha moved 10% off B_1^1."""
    values = demo_rates.as_dict()
    values["alpha"] *= 1.1
    return Rates(**values)


@pytest.fixture
def lattice4() -> Lattice:
    return Lattice(1, 4)


@pytest.fixture
def lattice3() -> Lattice:
    return Lattice(1, 3)


@pytest.fixture
def demo_profile(demo_rates):
    return boundary_shock_profile(demo_rates, 1)


@pytest.fixture
def write_config(tmp_path):
    """Write an experiment document to tmp_path and return its path."""

    def _write(document: dict, name: str = "experiment.json") -> Path:
        path = tmp_path / name
        path.write_bytes(orjson.dumps(document))
        return path

    return _write


@pytest.fixture
def demo_document() -> dict:
    return {
        "lattice": {"l_minus": 1, "l_plus": 4},
        "parametrization": {
            "q": SQRT2,
            "w": SQRT2,
            "rho_minus": 1.0 / 3.0,
            "solve_for": {"N": 1, "M": 1},
        },
        "shocks": {"N": 1, "M": 1},
        "experiment": {"t_values": [0.5, 2.0], "n_traj": 4000, "seed": 7},
    }
