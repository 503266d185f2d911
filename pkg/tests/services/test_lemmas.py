"""
Tests for the local-block algebra: boundary eigenvectors, projection
expansions of the bulk block and the stable-shock rate identities.
"""

import numpy as np
import pytest

from app.core.exceptions import LemmaHypothesisError, LinearDependenceError, ParameterValidationError
from app.services.duality_lab import (
    boundary_eigen,
    boundary_product_residual,
    corollary_identity_residuals,
    projection_coefficients,
    verify_projection_lemma,
)
from app.services.lattice_core import TwoVector
from app.services.shock_measures import boundary_shock_profile
from tests.conftest import manifold_rates


class TestBoundaryEigen:
    """Test suite for the boundary block eigenvectors."""

    def test_left(self, demo_rates):
        eigen = boundary_eigen(demo_rates, "left")
        assert eigen.z == pytest.approx(0.5)
        assert eigen.eps == pytest.approx(1.0 / 3.0)
        assert eigen.residual < 1e-12

    def test_right(self, demo_rates):
        eigen = boundary_eigen(demo_rates, "right")
        assert eigen.z == pytest.approx(1.0)
        assert eigen.eps == pytest.approx(-0.5)

    def test_unknown_side(self, demo_rates):
        with pytest.raises(ParameterValidationError):
            boundary_eigen(demo_rates, "top")

    def test_product_residual_at_eigen_densities(self, demo_rates):
        assert boundary_product_residual(demo_rates, 1.0 / 3.0, 0.5) < 1e-12
        assert boundary_product_residual(demo_rates, 0.4, 0.5) > 1e-3


class TestProjectionLemma:
    """Test suite for the three projection expansions."""

    def test_holds_for_q2_fugacity_ratio(self, demo_rates):
        a = TwoVector.from_density(1.0 / 3.0)
        a_tilde = TwoVector.from_density(0.5)
        residuals = verify_projection_lemma(a, a_tilde, (0.3, 0.7), demo_rates)
        assert residuals.ratio_matches_q2
        assert residuals.max_residual < 1e-12

    def test_holds_with_explicit_partners(self, demo_rates):
        a = TwoVector.from_fugacity(0.25)
        a_tilde = TwoVector.from_fugacity(0.5)
        residuals = verify_projection_lemma(
            a, a_tilde, (0.2, 0.8), demo_rates, b_tilde=(0.6, 0.4), c=(0.1, 0.9), c_tilde=(0.7, 0.3)
        )
        assert residuals.max_residual < 1e-12

    def test_fails_off_ratio(self, demo_rates):
        residuals = verify_projection_lemma(
            TwoVector.from_density(1.0 / 3.0), TwoVector.from_density(0.6), (0.3, 0.7), demo_rates
        )
        assert not residuals.ratio_matches_q2
        assert residuals.max_residual > 1e-6

    def test_degenerate_vector(self, demo_rates):
        with pytest.raises(LemmaHypothesisError):
            verify_projection_lemma((1.0, 0.0), (0.5, 0.5), (0.3, 0.7), demo_rates)

    def test_dependent_vectors(self, demo_rates):
        with pytest.raises(LemmaHypothesisError):
            verify_projection_lemma((2 / 3, 1 / 3), (0.5, 0.5), (1.0, 1.0), demo_rates)

    def test_coefficients_need_independence(self, demo_rates):
        with pytest.raises(LinearDependenceError):
            projection_coefficients((0.5, 0.5), (1.0, 1.0), demo_rates)

    def test_coefficients(self, demo_rates):
        coefficients = projection_coefficients((2 / 3, 1 / 3), (0.5, 0.5), demo_rates)
        assert coefficients.Delta == pytest.approx(1.0 / 6.0)
        # d(rho_0, rho_1) is the left shock rate 4/3
        assert coefficients.d == pytest.approx(4.0 / 3.0)


class TestCorollaryIdentities:
    @pytest.mark.parametrize("N", [1, 2, 3])
    def test_identities_on_manifold(self, N):
        rates = manifold_rates(N=N)
        chains = corollary_identity_residuals(boundary_shock_profile(rates, N), rates, include_boundary=True)
        assert max(chains.values()) < 1e-12
        assert {"vi", "wi", "epspi", "epsmi", "product", "boundary_left", "boundary_right"} == set(chains)

    def test_boundary_identity_fails_off_manifold(self, off_manifold_rates):
        chains = corollary_identity_residuals(
            boundary_shock_profile(off_manifold_rates, 1), off_manifold_rates, include_boundary=True
        )
        assert chains["product"] < 1e-12
        assert chains["boundary_right"] > 1e-6


def random_draws(n: int = 100, seed: int = 20240229):
    """Valid parameter points: q^2 in (1.2, 4), rho_- in (0.05, 0.6), N in 1..3."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        N = int(rng.integers(1, 4))
        rates = manifold_rates(N=N, rho_minus=float(rng.uniform(0.05, 0.6)), q2=float(rng.uniform(1.2, 4.0)))
        yield rates, boundary_shock_profile(rates, N), rng


class TestRandomDraws:
    """Lemma residuals on random points of B_N^1."""

    def test_boundary_eigenvectors(self):
        for rates, profile, _ in random_draws():
            left, right = boundary_eigen(rates, "left"), boundary_eigen(rates, "right")
            assert left.residual < 1e-12 * max(1.0, left.z)
            assert right.residual < 1e-12 * max(1.0, right.z)
            assert left.z == pytest.approx(profile.fugacities[0], rel=1e-12)

    def test_projection_expansions(self):
        for rates, profile, rng in random_draws():
            for i in range(1, profile.N + 1):
                a = TwoVector.from_density(profile.bulk_densities[i - 1])
                a_tilde = TwoVector.from_density(profile.bulk_densities[i])
                b = rng.uniform(0.1, 1.0, size=2)
                residuals = verify_projection_lemma(a, a_tilde, b, rates)
                assert residuals.ratio_matches_q2
                assert residuals.max_residual < 1e-12

    def test_shock_rate_identities(self):
        for rates, profile, _ in random_draws():
            chains = corollary_identity_residuals(profile, rates, include_boundary=True)
            assert max(chains.values()) < 1e-12

    def test_unstable_ratio_breaks_expansions(self):
        for rates, profile, rng in random_draws():
            rho0 = profile.bulk_densities[0]
            a = TwoVector.from_density(rho0)
            a_tilde = TwoVector.from_fugacity(1.1 * rates.q ** 2 * a.fugacity)
            residuals = verify_projection_lemma(a, a_tilde, rng.uniform(0.1, 1.0, size=2), rates)
            assert not residuals.ratio_matches_q2
            assert residuals.max_residual > 1e-4
