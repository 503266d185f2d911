"""
Tests for the correspondence between the ASEP Hamiltonian and the XXZ chain.
"""

import math

import pytest

from app.core.exceptions import ParameterValidationError
from app.services.asep_open import ManifoldSpec, manifold_residuals
from app.services.duality_lab import (
    integrability_residual,
    rates_from_xxz,
    submanifold_condition_residual,
    xxz_from_rates,
    xxz_residual,
)
from app.services.lattice_core import Lattice
from tests.conftest import manifold_rates


class TestParametrization:
    """Test suite for the XXZ parameter map."""

    def test_round_trip(self, demo_rates, lattice4):
        back = rates_from_xxz(xxz_from_rates(demo_rates, lattice4))
        for name, value in demo_rates.as_dict().items():
            assert getattr(back, name) == pytest.approx(value, rel=1e-12)

    def test_bulk_parameters(self, demo_rates, lattice4):
        params = xxz_from_rates(demo_rates, lattice4)
        assert params.theta == pytest.approx(0.5 * math.log(2.0))
        assert params.w == pytest.approx(math.sqrt(2.0))

    def test_boundary_twists_depend_on_lattice_offset(self, demo_rates):
        shifted = xxz_from_rates(demo_rates, Lattice(3, 6))
        base = xxz_from_rates(demo_rates, Lattice(1, 4))
        assert shifted.theta_minus - base.theta_minus == pytest.approx(2 * base.theta)


class TestSimilarityTransform:
    @pytest.mark.parametrize("lat", [Lattice(1, 2), Lattice(1, 3), Lattice(0, 4), Lattice(-2, 1)])
    def test_xxz_residual(self, demo_rates, lat):
        assert xxz_residual(demo_rates, lat) < 1e-10

    def test_off_manifold_rates_still_map(self, off_manifold_rates, lattice3):
        assert xxz_residual(off_manifold_rates, lattice3) < 1e-10


class TestManifoldConditions:
    """Test suite for the XXZ form of the manifold constraints."""

    @pytest.mark.parametrize("N", [1, 2])
    def test_integrability_on_manifold(self, N, lattice4):
        rates = manifold_rates(N=N)
        assert abs(integrability_residual(xxz_from_rates(rates, lattice4), lattice4, N)) < 1e-10

    def test_integrability_matches_res_N(self, off_manifold_rates, lattice4):
        residual = integrability_residual(xxz_from_rates(off_manifold_rates, lattice4), lattice4, 1)
        res_N = manifold_residuals(off_manifold_rates, ManifoldSpec(N=1)).res_N
        assert residual == pytest.approx(math.log1p(res_N / off_manifold_rates.q ** 2))
        assert abs(residual) > 1e-3

    @pytest.mark.parametrize("N,M", [(1, 1), (2, 1), (2, 2)])
    def test_submanifold_condition(self, N, M, lattice4):
        rates = manifold_rates(N=N, M=M)
        params = xxz_from_rates(rates, lattice4)
        assert abs(submanifold_condition_residual(params, lattice4, ManifoldSpec(N=N, M=M))) < 1e-10

    def test_integrability_needs_shocks(self, demo_rates, lattice4):
        with pytest.raises(ParameterValidationError):
            integrability_residual(xxz_from_rates(demo_rates, lattice4), lattice4, 0)
