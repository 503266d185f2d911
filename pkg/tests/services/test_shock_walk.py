"""
Tests for shock profiles, shock rates, the shock exclusion process and the
single-shock random walk.
"""

import math

import numpy as np
import pytest

from app.core.exceptions import ParameterValidationError, StabilityError
from app.services.lattice_core import Lattice, dense_eigs, expm_action
from app.services.shock_walk import (
    DualStateIndex,
    ShockProfile,
    build_Q,
    densities_from_stability,
    detailed_balance_residual,
    orthonormality_defect,
    reversed_generator,
    reversible_pi,
    reversible_weights,
    rw_eigenvectors,
    rw_propagator,
    rw_propagator_matrix,
    rw_spectrum,
    rw_stationary_weights,
    shock_exclusion_generator,
    shock_rates,
)
from app.services.shock_measures import boundary_shock_profile
from tests.conftest import RHO_MINUS_GRID, SQRT2, manifold_rates


class TestShockProfile:
    """Test suite for stable shock profiles."""

    def test_densities_from_stability(self):
        assert densities_from_stability(1.0 / 3.0, 2, SQRT2) == pytest.approx((1 / 3, 1 / 2, 2 / 3))

    def test_stability_check(self):
        stable = ShockProfile((1 / 3, 1 / 2), (0.4,))
        assert stable.is_stable(SQRT2)
        unstable = ShockProfile((1 / 3, 0.6), (0.4,))
        with pytest.raises(StabilityError) as exc_info:
            unstable.check_stable(SQRT2)
        assert exc_info.value.shock_index == 1

    def test_invalid_profile(self):
        with pytest.raises(ParameterValidationError) as exc_info:
            ShockProfile((0.2, 1.0, 0.5), (0.3,))
        assert len(exc_info.value.validation_errors) == 2

    @pytest.mark.parametrize("q", [1.0, 0.0])
    def test_stability_needs_asymmetry(self, q):
        with pytest.raises(ParameterValidationError):
            densities_from_stability(0.3, 1, q)


class TestShockRates:
    """Test suite for shock hopping rates."""

    def test_demo_rates(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        assert sr.d_l[0] == pytest.approx(4.0 / 3.0)
        assert sr.d_r[0] == pytest.approx(1.5)
        assert sr.d_asym[0] ** 2 == pytest.approx(9.0 / 8.0)
        assert sr.w[0] == pytest.approx(SQRT2)
        assert sr.velocity[0] == pytest.approx(1.0 / 6.0)

    def test_product_equals_bulk_product(self):
        rates = manifold_rates(N=3)
        sr = shock_rates(boundary_shock_profile(rates, 3), rates)
        assert np.asarray(sr.d_l) * np.asarray(sr.d_r) == pytest.approx([rates.r * rates.ell] * 3)

    def test_unstable_profile_rejected(self, demo_rates):
        with pytest.raises(StabilityError):
            shock_rates(ShockProfile((0.3, 0.6), (0.4,)), demo_rates)

    def test_unstable_profile_allowed_on_request(self, demo_rates):
        sr = shock_rates(ShockProfile((0.3, 0.6), (0.4,)), demo_rates, require_stable=False)
        assert sr.d_l[0] == pytest.approx(demo_rates.bias * 0.21 / 0.3)


class TestDualStateIndex:
    """Test suite for colexicographic ranking."""

    def test_colex_order(self):
        index = DualStateIndex(Lattice(1, 4), 2)
        assert index.size == 6
        assert [index.unrank(i) for i in range(4)] == [(1, 2), (1, 3), (2, 3), (1, 4)]

    def test_single_shock_rank_is_site_order(self):
        index = DualStateIndex(Lattice(3, 7), 1)
        assert [index.rank((x,)) for x in range(3, 8)] == list(range(5))

    def test_rank_unrank_bijection(self):
        index = DualStateIndex(Lattice(0, 6), 3)
        states = index.all_states()
        assert list(index.rank_many(states)) == list(range(index.size))
        assert all(index.rank(index.unrank(i)) == i for i in range(index.size))

    @pytest.mark.parametrize("xs", [(2, 2), (3, 1), (0, 2), (1,)])
    def test_inadmissible_positions(self, xs):
        with pytest.raises(ParameterValidationError):
            DualStateIndex(Lattice(1, 4), 2).check_positions(xs)


class TestShockExclusion:
    """Test suite for Q and its reversible measure."""

    def test_single_shock_walk(self, demo_rates, demo_profile, lattice4):
        Q = build_Q(demo_profile, demo_rates, lattice4).toarray()
        assert Q[0, 1] == pytest.approx(1.5)
        assert Q[1, 0] == pytest.approx(4.0 / 3.0)
        assert Q[0, 0] == pytest.approx(-1.5)
        assert Q[3, 3] == pytest.approx(-4.0 / 3.0)
        assert Q[0, 2] == 0.0

    def test_exclusion_blocks_neighbours(self):
        rates = manifold_rates(N=2)
        lat = Lattice(1, 3)
        Q = build_Q(boundary_shock_profile(rates, 2), rates, lat)
        index = DualStateIndex(lat, 2)
        # (1, 2): shock 1 is walled in, shock 2 can only move right
        row = Q.toarray()[index.rank((1, 2))]
        assert np.count_nonzero(row) == 2

    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_detailed_balance(self, N):
        rates = manifold_rates(N=N)
        lat = Lattice(1, 5)
        sr = shock_rates(boundary_shock_profile(rates, N), rates)
        Q = shock_exclusion_generator(sr, lat)
        pi = reversible_weights(sr, lat)
        assert pi.sum() == pytest.approx(1.0)
        assert detailed_balance_residual(Q, pi) < 1e-14
        reversed_gap = reversed_generator(Q, pi).toarray() - Q.toarray()
        assert np.abs(reversed_gap).max() < 1e-12

    @pytest.mark.parametrize("rho_minus", RHO_MINUS_GRID)
    @pytest.mark.parametrize("L", range(2, 9))
    def test_detailed_balance_grid(self, q2, rho_minus, L):
        for N in range(1, L + 1):
            rates = manifold_rates(N=N, rho_minus=rho_minus, q2=q2)
            lat = Lattice.of_length(L)
            sr = shock_rates(boundary_shock_profile(rates, N), rates)
            pi = reversible_weights(sr, lat)
            assert detailed_balance_residual(shock_exclusion_generator(sr, lat), pi) < 1e-12

    def test_reversible_pi_ratio(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        assert reversible_pi((3,), sr) / reversible_pi((2,), sr) == pytest.approx(9.0 / 8.0)


class TestSingleShockWalk:
    """Test suite for the closed-form random walk."""

    def test_two_site_stationary_weights(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        assert rw_stationary_weights(sr, Lattice(1, 2)) == pytest.approx([8 / 17, 9 / 17])

    def test_stationary_weights_match_reversible_measure(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        lat = Lattice(1, 6)
        assert rw_stationary_weights(sr, lat) == pytest.approx(reversible_weights(sr, lat))

    def test_spectrum_of_Q(self, demo_rates, demo_profile):
        lat = Lattice(1, 6)
        sr = shock_rates(demo_profile, demo_rates)
        eps = np.sort(rw_spectrum(sr, lat))
        numeric = np.sort((-dense_eigs(build_Q(demo_profile, demo_rates, lat))).real)
        assert eps == pytest.approx(numeric, abs=1e-10)

    def test_propagator_at_time_zero(self, demo_rates, demo_profile, lattice4):
        sr = shock_rates(demo_profile, demo_rates)
        assert rw_propagator_matrix(0.0, sr, lattice4) == pytest.approx(np.eye(4), abs=1e-12)

    @pytest.mark.parametrize("t", [0.3, 1.0, 5.0])
    def test_propagator_matches_uniformization(self, demo_rates, demo_profile, t):
        lat = Lattice(1, 5)
        sr = shock_rates(demo_profile, demo_rates)
        Q = build_Q(demo_profile, demo_rates, lat)
        numeric = expm_action(Q, np.eye(lat.length), t, tol=1e-14).T
        closed = rw_propagator_matrix(t, sr, lat)
        assert np.abs(closed - numeric).max() < 1e-10
        assert closed.sum(axis=1) == pytest.approx(np.ones(lat.length))

    @pytest.mark.parametrize("L", range(2, 11))
    def test_propagator_grid(self, q2, L):
        rates = manifold_rates(q2=q2)
        profile = boundary_shock_profile(rates, 1)
        lat = Lattice.of_length(L)
        sr = shock_rates(profile, rates)
        Q = build_Q(profile, rates, lat)
        for t in (0.0, 0.1 / rates.w, 1.0 / rates.w, 10.0 / rates.w):
            closed = rw_propagator_matrix(t, sr, lat)
            numeric = expm_action(Q, np.eye(L), t, tol=1e-14).T
            assert np.abs(closed - numeric).max() < 1e-9
            assert np.abs(closed.sum(axis=1) - 1.0).max() < 1e-11
        assert rw_propagator_matrix(0.0, sr, lat) == pytest.approx(np.eye(L), abs=1e-11)

    @pytest.mark.parametrize("L", [3, 5, 8])
    def test_chapman_kolmogorov(self, demo_rates, demo_profile, L):
        sr = shock_rates(demo_profile, demo_rates)
        lat = Lattice.of_length(L)
        s, t = 0.4, 1.3
        composed = rw_propagator_matrix(s, sr, lat) @ rw_propagator_matrix(t, sr, lat)
        assert np.abs(composed - rw_propagator_matrix(s + t, sr, lat)).max() < 1e-10

    def test_propagator_relaxes_to_stationary(self, demo_rates, demo_profile, lattice4):
        sr = shock_rates(demo_profile, demo_rates)
        P = rw_propagator_matrix(200.0, sr, lattice4)
        stationary = rw_stationary_weights(sr, lattice4)
        assert P == pytest.approx(np.tile(stationary, (4, 1)), abs=1e-12)

    def test_single_entry(self, demo_rates, demo_profile, lattice4):
        sr = shock_rates(demo_profile, demo_rates)
        assert rw_propagator(2, 3, 1.0, sr, lattice4) == pytest.approx(rw_propagator_matrix(1.0, sr, lattice4)[1, 2])

    def test_eigenvectors_orthonormal(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        assert orthonormality_defect(rw_eigenvectors(sr, Lattice(1, 7))) < 1e-12

    def test_needs_single_shock(self):
        rates = manifold_rates(N=2)
        sr = shock_rates(boundary_shock_profile(rates, 2), rates)
        with pytest.raises(ParameterValidationError):
            rw_spectrum(sr, Lattice(1, 4))

    def test_negative_time(self, demo_rates, demo_profile, lattice4):
        with pytest.raises(ParameterValidationError):
            rw_propagator_matrix(-1.0, shock_rates(demo_profile, demo_rates), lattice4)

    def test_time_scale(self, demo_rates, demo_profile):
        sr = shock_rates(demo_profile, demo_rates)
        assert sr.diffusion[0] == pytest.approx(0.5 * (4 / 3 + 1.5))
        assert math.isclose(sr.d_l[0] * sr.d_r[0], 2.0)
