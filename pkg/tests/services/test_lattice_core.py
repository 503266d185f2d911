"""
Tests for configuration encoding, product vectors and the sparse kernels.
"""

from unittest.mock import patch

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    NumericalError,
    ParameterValidationError,
    ResourceCapError,
)
from app.services.asep_open import build_W
from app.services.lattice_core import (
    GeneratorConvention,
    Lattice,
    SparseGenerator,
    TwoVector,
    check_probability_vector,
    config_index,
    dense_eigs,
    expm_action,
    index_config,
    kron_vector,
    occupation_table,
    sparse_matvec,
    stationary_distribution,
    total_variation,
    uniformization_terms,
)


class TestLattice:
    """Test suite for the lattice interval."""

    def test_length_and_sites(self):
        lat = Lattice(3, 6)
        assert lat.length == 4
        assert list(lat.sites) == [3, 4, 5, 6]
        assert lat.n_configs == 16

    def test_single_site_rejected(self):
        with pytest.raises(ParameterValidationError):
            Lattice(2, 2)

    def test_of_length(self):
        assert Lattice.of_length(5, l_minus=-2) == Lattice(-2, 2)


class TestConfigurationEncoding:
    """Test suite for config_index / index_config."""

    def test_left_site_is_most_significant_bit(self):
        assert config_index((1, 0, 0)) == 4
        assert config_index((0, 0, 1)) == 1
        assert index_config(4, 3) == (1, 0, 0)

    def test_bijection_on_small_lattice(self):
        for i in range(1 << 5):
            assert config_index(index_config(i, 5)) == i

    def test_rejects_non_binary_occupation(self):
        with pytest.raises(ParameterValidationError):
            config_index((0, 2, 1))

    def test_rejects_out_of_range_index(self):
        with pytest.raises(ParameterValidationError):
            index_config(8, 3)

    def test_occupation_table_rows(self):
        table = occupation_table(Lattice(1, 3))
        assert table.shape == (8, 3)
        assert tuple(table[6]) == (1, 1, 0)


class TestProductVectors:
    """Test suite for TwoVector and kron_vector."""

    def test_density_vector(self):
        v = TwoVector.from_density(0.25)
        assert v.as_array() == pytest.approx([0.75, 0.25])
        assert v.fugacity == pytest.approx(1.0 / 3.0)
        assert v.is_density_vector()

    def test_fugacity_round_trip(self):
        assert TwoVector.from_fugacity(2.0).density == pytest.approx(2.0 / 3.0)

    def test_invalid_density(self):
        with pytest.raises(ParameterValidationError):
            TwoVector.from_density(1.5)

    def test_kron_vector_matches_configuration_order(self):
        vector = kron_vector([TwoVector.from_density(0.2), TwoVector.from_density(0.7)])
        # index 2 = (1, 0): first site occupied, second empty
        assert vector[2] == pytest.approx(0.2 * 0.3)
        assert vector.sum() == pytest.approx(1.0)

    def test_kron_vector_needs_factors(self):
        with pytest.raises(ParameterValidationError):
            kron_vector([])


class TestSparseGenerator:
    """Test suite for generator storage and validation."""

    def test_from_triplets_sums_duplicates(self):
        G = SparseGenerator.from_triplets(
            np.array([0, 0, 0, 1, 1]),
            np.array([1, 1, 0, 0, 1]),
            np.array([1.0, 2.0, -3.0, 0.5, -0.5]),
            2,
        )
        assert G.toarray() == pytest.approx(np.array([[-3.0, 3.0], [0.5, -0.5]]))
        assert G.validate() is G

    def test_validate_rejects_nonzero_row_sum(self):
        G = SparseGenerator(sp.csr_matrix(np.array([[-1.0, 2.0], [1.0, -1.0]])))
        with pytest.raises(NumericalError):
            G.validate()

    def test_validate_rejects_negative_off_diagonal(self):
        G = SparseGenerator(sp.csr_matrix(np.array([[1.0, -1.0], [1.0, -1.0]])))
        with pytest.raises(NumericalError):
            G.validate()

    def test_convention_round_trip(self, demo_rates, lattice3):
        W = build_W(demo_rates, lattice3)
        H = W.to_hamiltonian()
        assert H.convention == GeneratorConvention.HAMILTONIAN
        assert H.invariant_residual() < 1e-12
        assert np.abs(H.to_intensity().toarray() - W.toarray()).max() == 0.0


class TestSparseKernels:
    """Test suite for matvec, uniformization and eigen-solvers."""

    def test_sparse_matvec_threads_agree(self, demo_rates, lattice4):
        W = build_W(demo_rates, lattice4)
        v = np.linspace(0.0, 1.0, W.dim)
        single = sparse_matvec(W, v, threads=1)
        blocked = sparse_matvec(W, v, threads=3)
        assert np.array_equal(single, blocked)
        assert sparse_matvec(W, v, left=True) == pytest.approx(W.matrix.T @ v)

    def test_sparse_matvec_dimension_check(self, demo_rates, lattice3):
        with pytest.raises(DimensionMismatchError):
            sparse_matvec(build_W(demo_rates, lattice3), np.ones(5))

    def test_uniformization_tail(self):
        weights = uniformization_terms(3.0, 2.0, 1e-12)
        assert 1.0 - weights.sum() < 1e-12

    @pytest.mark.parametrize("t", [0.1, 1.0, 4.0])
    def test_expm_action_matches_dense_expm(self, demo_rates, lattice3, t):
        W = build_W(demo_rates, lattice3)
        v = np.full(W.dim, 1.0 / W.dim)
        exact = scipy.linalg.expm(W.toarray().T * t) @ v
        assert np.abs(expm_action(W, v, t, tol=1e-13) - exact).sum() < 1e-11

    @pytest.mark.parametrize("s,t", [(0.2, 0.5), (1.0, 1.0), (0.3, 3.0)])
    def test_expm_action_semigroup(self, demo_rates, lattice4, s, t):
        W = build_W(demo_rates, lattice4)
        v = np.eye(W.dim)[5]
        tol = 1e-10
        stepped = expm_action(W, expm_action(W, v, s, tol=tol), t, tol=tol)
        assert np.abs(stepped - expm_action(W, v, s + t, tol=tol)).sum() < 2 * tol

    def test_expm_action_error_follows_tolerance(self, demo_rates, lattice4):
        W = build_W(demo_rates, lattice4)
        v = np.full(W.dim, 1.0 / W.dim)
        exact = scipy.linalg.expm(W.toarray().T * 2.0) @ v
        errors = []
        for k in range(8):
            tol = 1e-4 / 2 ** k
            errors.append(np.abs(expm_action(W, v, 2.0, tol=tol) - exact).sum())
            assert errors[-1] <= tol + 1e-13
        assert errors[-1] < errors[0]

    def test_expm_action_block_of_vectors(self, demo_rates, lattice3):
        W = build_W(demo_rates, lattice3)
        evolved = expm_action(W, np.eye(W.dim), 0.7)
        assert evolved.sum(axis=0) == pytest.approx(np.ones(W.dim))

    def test_expm_action_time_zero_is_copy(self, demo_rates, lattice3):
        W = build_W(demo_rates, lattice3)
        v = np.eye(W.dim)[0]
        out = expm_action(W, v, 0.0)
        assert np.array_equal(out, v)
        assert out is not v

    def test_expm_action_rejects_negative_time(self, demo_rates, lattice3):
        with pytest.raises(ParameterValidationError):
            expm_action(build_W(demo_rates, lattice3), np.ones(8) / 8, -1.0)

    def test_expm_action_rejects_non_finite(self, demo_rates, lattice3):
        v = np.ones(8)
        v[3] = np.nan
        with pytest.raises(NumericalError):
            expm_action(build_W(demo_rates, lattice3), v, 1.0)

    def test_dense_eigs_sorted(self):
        values = dense_eigs(np.diag([3.0, -1.0, 2.0]))
        assert values.real == pytest.approx([-1.0, 2.0, 3.0])

    def test_dense_eigs_cap(self):
        with pytest.raises(ResourceCapError):
            dense_eigs(np.eye(5), cap=4)

    def test_stationary_distribution(self, demo_rates, lattice4):
        W = build_W(demo_rates, lattice4)
        pi = stationary_distribution(W)
        assert pi.sum() == pytest.approx(1.0)
        assert np.abs(W.matrix.T @ pi).max() < 1e-12
        assert check_probability_vector(pi) == []

    def test_stationary_distribution_cap(self, demo_rates, lattice4):
        with patch.object(settings, "DENSE_EIG_CAP", 8):
            with pytest.raises(ResourceCapError):
                stationary_distribution(build_W(demo_rates, lattice4))


class TestProbabilityHelpers:
    def test_total_variation(self):
        assert total_variation([0.5, 0.5], [1.0, 0.0]) == pytest.approx(0.5)

    def test_check_probability_vector_reports_problems(self):
        problems = check_probability_vector([-0.1, 0.5])
        assert len(problems) == 2
