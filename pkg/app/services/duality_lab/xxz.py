"""
Correspondence between the open ASEP Hamiltonian and the XXZ spin chain
with non-diagonal, non-hermitian boundary fields.

The diagonal similarity transformation is Q = prod_k q^{k n_k} over all
sites L- .. L+, with k the absolute site label.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from app.core.config import settings
from app.core.exceptions import ParameterValidationError, ParametrizationError
from app.core.resources import ensure_sites
from app.services.asep_open import ManifoldSpec, Rates, build_H, kappa
from app.services.lattice_core import Lattice, occupation_table

logger = logging.getLogger(__name__)

# Basis (empty, occupied); sigma^+ annihilates, sigma^- creates.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = 0.5 * (SIGMA_X + 1j * SIGMA_Y)
SIGMA_MINUS = 0.5 * (SIGMA_X - 1j * SIGMA_Y)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class XXZParams:
    theta: float
    w: float
    phi_minus: float
    psi_minus: float
    phi_plus: float
    psi_plus: float
    theta_minus: float
    theta_plus: float
    E0: float

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def rates_from_xxz(params: XXZParams) -> Rates:
    """Forward parametrization of all six rates from the XXZ parameters."""
    theta, w = params.theta, params.w
    prefactor = 0.5 * w * math.sinh(theta)
    left = prefactor / (math.sinh(params.phi_minus) * math.cosh(params.psi_minus))
    right = prefactor / (math.sinh(params.phi_plus) * math.cosh(params.psi_plus))
    return Rates(
        r=w * math.exp(theta),
        ell=w * math.exp(-theta),
        alpha=left * math.exp(params.phi_minus - params.psi_minus),
        beta=right * math.exp(params.phi_plus - params.psi_plus),
        gamma=left * math.exp(params.psi_minus - params.phi_minus),
        delta=right * math.exp(params.psi_plus - params.phi_plus),
    )


def xxz_from_rates(rates: Rates, lat: Lattice, tol: float = 1e-10) -> XXZParams:
    """
    Closed-form inverse parametrization, verified by a forward round trip.

    Raises:
        ParametrizationError: If the forward map misses the input rates
    """
    theta = math.log(rates.q)
    psi_minus = 0.5 * math.log(kappa(rates.alpha, rates.gamma, rates, +1))
    phi_minus = psi_minus + 0.5 * math.log(rates.alpha / rates.gamma)
    psi_plus = 0.5 * math.log(kappa(rates.beta, rates.delta, rates, +1))
    phi_plus = psi_plus + 0.5 * math.log(rates.beta / rates.delta)

    params = XXZParams(
        theta=theta,
        w=rates.w,
        phi_minus=phi_minus,
        psi_minus=psi_minus,
        phi_plus=phi_plus,
        psi_plus=psi_plus,
        theta_minus=psi_minus - phi_minus + theta * lat.l_minus,
        theta_plus=phi_plus - psi_plus + theta * lat.l_plus,
        E0=(lat.length - 1) * math.cosh(theta)
        + (rates.alpha + rates.beta + rates.gamma + rates.delta) / rates.w,
    )

    if phi_minus == 0.0 or phi_plus == 0.0:
        raise ParametrizationError(
            "Boundary angle phi vanishes; the forward parametrization is singular",
            details=params.as_dict(),
        )
    back = rates_from_xxz(params).as_dict()
    mismatch = max(
        abs(back[name] - value) / value for name, value in rates.as_dict().items()
    )
    if mismatch > tol:
        raise ParametrizationError(
            f"XXZ parametrization round trip misses the rates by {mismatch:.3e}",
            mismatch=mismatch,
        )
    return params


def _site_operator(op: np.ndarray, site: int, lat: Lattice) -> sp.csr_matrix:
    j = site - lat.l_minus
    left = sp.identity(1 << j, dtype=complex, format="csr")
    right = sp.identity(1 << (lat.length - j - 1), dtype=complex, format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def _bond_operator(op_a: np.ndarray, op_b: np.ndarray, site: int, lat: Lattice) -> sp.csr_matrix:
    return (_site_operator(op_a, site, lat) @ _site_operator(op_b, site + 1, lat)).tocsr()


def build_H_xxz(params: XXZParams, lat: Lattice) -> sp.csr_matrix:
    """The XXZ Hamiltonian with boundary fields, assembled from Pauli tensor blocks."""
    ensure_sites(lat.length, settings.MAX_GENERATOR_SITES, "XXZ Hamiltonian")
    dim = lat.n_configs
    cosh_theta = math.cosh(params.theta)
    sinh_theta = math.sinh(params.theta)

    bulk = sp.csr_matrix((dim, dim), dtype=complex)
    for k in range(lat.l_minus, lat.l_plus):
        bulk = bulk + (
            _bond_operator(SIGMA_X, SIGMA_X, k, lat)
            + _bond_operator(SIGMA_Y, SIGMA_Y, k, lat)
            + cosh_theta * _bond_operator(SIGMA_Z, SIGMA_Z, k, lat)
        )

    left_field = (
        math.exp(-params.theta_minus) * SIGMA_MINUS
        + math.exp(params.theta_minus) * SIGMA_PLUS
        + math.sinh(params.psi_minus) * math.cosh(params.phi_minus) * SIGMA_Z
    ) * (sinh_theta / (math.sinh(params.phi_minus) * math.cosh(params.psi_minus)))
    right_field = (
        math.exp(-params.theta_plus) * SIGMA_MINUS
        + math.exp(params.theta_plus) * SIGMA_PLUS
        - math.sinh(params.psi_plus) * math.cosh(params.phi_plus) * SIGMA_Z
    ) * (sinh_theta / (math.sinh(params.phi_plus) * math.cosh(params.psi_plus)))

    total = (
        bulk
        - params.E0 * sp.identity(dim, dtype=complex, format="csr")
        + _site_operator(left_field, lat.l_minus, lat)
        + _site_operator(right_field, lat.l_plus, lat)
    )
    return (-0.5 * params.w * total).tocsr()


def similarity_transform(H: sp.csr_matrix, q: float, lat: Lattice) -> sp.csr_matrix:
    """Q^-1 H Q with Q = prod_k q^{k n_k}; entry (a, b) picks up q^{e(b) - e(a)}."""
    occ = occupation_table(lat)
    energy = occ @ lat.sites.astype(float)
    scale = np.exp(math.log(q) * energy)
    return (sp.diags(1.0 / scale) @ H @ sp.diags(scale)).tocsr()


def xxz_residual(rates: Rates, lat: Lattice) -> float:
    """max |Q^-1 H Q - H^XXZ| over all matrix elements."""
    params = xxz_from_rates(rates, lat)
    transformed = similarity_transform(build_H(rates, lat).matrix, rates.q, lat)
    gap = (transformed.astype(complex) - build_H_xxz(params, lat)).tocsr()
    residual = float(np.max(np.abs(gap.data))) if gap.nnz else 0.0
    logger.debug(f"XXZ residual for L = {lat.length}: {residual:.3e}")
    return residual


def integrability_residual(params: XXZParams, lat: Lattice, N: int) -> float:
    """
    phi_- + psi_- + phi_+ + psi_+ - (theta_+ - theta_- + (2N - L + 1) theta).

    Equals ln(kappa_+(alpha, gamma) kappa_+(beta, delta) / q^{2N}), so it
    vanishes exactly on B_N.
    """
    if N < 1:
        raise ParameterValidationError(f"N = {N} must be at least 1", field_name="N")
    lhs = params.phi_minus + params.psi_minus + params.phi_plus + params.psi_plus
    rhs = params.theta_plus - params.theta_minus + (2 * N - lat.length + 1) * params.theta
    return lhs - rhs


def submanifold_condition_residual(
    params: XXZParams,
    lat: Lattice,
    spec: ManifoldSpec,
) -> float:
    """theta_+ - theta_- + theta (N - M - L + 1), zero on B_N^M."""
    return (
        params.theta_plus
        - params.theta_minus
        + params.theta * (spec.N - spec.M - lat.length + 1)
    )
