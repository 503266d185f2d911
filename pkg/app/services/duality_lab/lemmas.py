"""
Local-block algebra behind reverse duality: boundary eigenvectors, the
three-dimensional projection properties of the bulk block, and the rate
identities of stable shocks.

All checks act on the 4x4 bulk block and the 2x2 boundary blocks
directly, never on embedded L-site operators.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Union

import numpy as np

from app.core.config import settings
from app.core.exceptions import (
    LemmaHypothesisError,
    LinearDependenceError,
    NumericalError,
    ParameterValidationError,
)
from app.services.asep_open import Rates, kappa, local_blocks
from app.services.lattice_core import TwoVector, kron_vector
from app.services.shock_walk import ShockProfile, shock_rates

logger = logging.getLogger(__name__)

VectorLike = Union[TwoVector, tuple, list, np.ndarray]


def _two(v: VectorLike) -> TwoVector:
    if isinstance(v, TwoVector):
        return v
    c0, c1 = (float(x) for x in v)
    return TwoVector(c0, c1)


@dataclass(frozen=True)
class BoundaryEigen:
    side: str
    z: float
    eps: float
    residual: float


def boundary_eigen(rates: Rates, side: str, tol: Optional[float] = None) -> BoundaryEigen:
    """
    Fugacity and eigenvalue of the boundary block eigenvector (1, z).

    Left: z = 1 / kappa_+(alpha, gamma), eps = alpha - gamma z = (r - ell) z / (1 + z).
    Right: z = kappa_+(beta, delta), eps = delta - beta z = -(r - ell) z / (1 + z).

    Raises:
        ParameterValidationError: For an unknown side
        NumericalError: If either eigenvalue form or the eigen-equation fails
    """
    tol = settings.IDENTITY_TOL if tol is None else tol
    blocks = local_blocks(rates)
    if side == "left":
        z = 1.0 / kappa(rates.alpha, rates.gamma, rates, +1)
        eps = rates.alpha - rates.gamma * z
        closed = rates.bias * z / (1.0 + z)
        block = blocks["minus"]
    elif side == "right":
        z = kappa(rates.beta, rates.delta, rates, +1)
        eps = rates.delta - rates.beta * z
        closed = -rates.bias * z / (1.0 + z)
        block = blocks["plus"]
    else:
        raise ParameterValidationError(f"Unknown boundary side {side!r}", field_name="side")

    vector = np.array([1.0, z])
    residual = float(np.max(np.abs(block @ vector - eps * vector)))
    scale = max(1.0, abs(eps), z, rates.alpha, rates.beta, rates.gamma, rates.delta)
    if abs(eps - closed) > 10 * tol * scale or residual > 10 * tol * scale * max(1.0, z):
        raise NumericalError(
            f"{side} boundary eigenvector check failed",
            operation="boundary_eigen",
            details={"eps": eps, "closed_form": closed, "residual": residual},
        )
    return BoundaryEigen(side=side, z=z, eps=eps, residual=residual)


def eps_minus(v: VectorLike, rates: Rates) -> float:
    """alpha - gamma z(v)."""
    return rates.alpha - rates.gamma * _two(v).fugacity


def eps_plus(v: VectorLike, rates: Rates) -> float:
    """delta - beta z(v)."""
    return rates.delta - rates.beta * _two(v).fugacity


def determinant(a: VectorLike, b: VectorLike) -> float:
    a, b = _two(a), _two(b)
    return a.c0 * b.c1 - a.c1 * b.c0


def d_bulk(a: VectorLike, b: VectorLike, rates: Rates) -> float:
    """d(a, b) = (r - ell) a_1 a_0 / Delta(a, b)."""
    delta = _checked_determinant(a, b)
    a = _two(a)
    return rates.bias * a.c1 * a.c0 / delta


def d_tilde_bulk(a: VectorLike, b: VectorLike, rates: Rates) -> float:
    """d~(a, b) = (r - ell) a_1 b_0 / Delta(a, b)."""
    delta = _checked_determinant(a, b)
    a, b = _two(a), _two(b)
    return rates.bias * a.c1 * b.c0 / delta


def _checked_determinant(a: VectorLike, b: VectorLike) -> float:
    delta = determinant(a, b)
    if delta == 0.0:
        raise LinearDependenceError(
            f"Vectors {_two(a)} and {_two(b)} are linearly dependent",
            details={"a": list(_two(a).as_array()), "b": list(_two(b).as_array())},
        )
    return delta


@dataclass(frozen=True)
class ProjectionCoefficients:
    Delta: float
    d: float
    d_tilde: float
    d_minus: float
    d_plus: float
    d_tilde_minus: float
    d_tilde_plus: float


def projection_coefficients(a: VectorLike, b: VectorLike, rates: Rates) -> ProjectionCoefficients:
    """
    Determinant and the d-family of a pair of local vectors.

    Raises:
        LinearDependenceError: If Delta(a, b) = 0
    """
    a, b = _two(a), _two(b)
    delta = _checked_determinant(a, b)
    em, ep = eps_minus(a, rates), eps_plus(a, rates)
    a_sum, b_sum = a.c0 + a.c1, b.c0 + b.c1
    return ProjectionCoefficients(
        Delta=delta,
        d=rates.bias * a.c1 * a.c0 / delta,
        d_tilde=rates.bias * a.c1 * b.c0 / delta,
        d_minus=em * a.c0 * a_sum / delta,
        d_plus=ep * a.c0 * a_sum / delta,
        d_tilde_minus=em * a.c0 * b_sum / delta,
        d_tilde_plus=ep * a.c0 * b_sum / delta,
    )


@dataclass(frozen=True)
class ProjectionResiduals:
    """Max-norm residuals of the three projection expansions."""
    case_a: float
    case_b: float
    case_c: float
    fugacity_ratio: float
    ratio_matches_q2: bool

    @property
    def max_residual(self) -> float:
        return max(self.case_a, self.case_b, self.case_c)


def _check_nondegenerate(name: str, v: TwoVector) -> None:
    if v.c0 * v.c1 == 0.0:
        raise LemmaHypothesisError(
            f"{name} = {v} has a vanishing component", hypothesis=f"{name}_0 {name}_1 != 0"
        )


def _check_independent(name_a: str, a: TwoVector, name_b: str, b: TwoVector) -> None:
    if determinant(a, b) == 0.0:
        raise LemmaHypothesisError(
            f"{name_a} and {name_b} are linearly dependent",
            hypothesis=f"Delta({name_a}, {name_b}) != 0",
        )


def verify_projection_lemma(
    a: VectorLike,
    a_tilde: VectorLike,
    b: VectorLike,
    rates: Rates,
    b_tilde: Optional[VectorLike] = None,
    c: Optional[VectorLike] = None,
    c_tilde: Optional[VectorLike] = None,
) -> ProjectionResiduals:
    """
    Apply the bulk block to |ab>, |b a~> and |a a~> and measure the distance
    from the three-term expansions

        (A) h|ab>   = u|ab>   - v|b a~>  - w|a b~>,  u = ell - d~(b, b~), v = d(a, a~), w = -d(b, b~)
        (B) h|b a~> = u|b a~> - v|ab>    - w|b~ a~>, u = r + d~(b, b~),   v = -d(a~, a), w = d(b, b~)
        (C) h|a a~> = u|a a~> - w|c~ a~> - v|a c>,   u = d~(a, c~) - d~(a~, c), v = -d(a~, c), w = d(a, c~)

    The residuals vanish exactly when z(a~) = q^2 z(a); otherwise they are
    reported, not raised.

    Args:
        a, a_tilde, b: Local vectors
        rates: ASEP rates
        b_tilde: Partner of b, defaults to a_tilde
        c, c_tilde: Vectors of expansion (C), default to b

    Raises:
        LemmaHypothesisError: If a nondegeneracy or independence hypothesis fails
    """
    a, a_tilde, b = _two(a), _two(a_tilde), _two(b)
    b_tilde = _two(b_tilde) if b_tilde is not None else a_tilde
    c = _two(c) if c is not None else b
    c_tilde = _two(c_tilde) if c_tilde is not None else b

    _check_nondegenerate("a", a)
    _check_nondegenerate("a_tilde", a_tilde)
    _check_independent("b", b, "b_tilde", b_tilde)
    _check_independent("b", b, "a_tilde", a_tilde)
    _check_independent("a", a, "a_tilde", a_tilde)
    _check_independent("c_tilde", c_tilde, "a", a)
    _check_independent("c", c, "a_tilde", a_tilde)

    h = local_blocks(rates)["bulk"]

    def ket(x: TwoVector, y: TwoVector) -> np.ndarray:
        return kron_vector([x, y])

    # (A)
    u = rates.ell - d_tilde_bulk(b, b_tilde, rates)
    v = d_bulk(a, a_tilde, rates)
    w = -d_bulk(b, b_tilde, rates)
    res_a = h @ ket(a, b) - (u * ket(a, b) - v * ket(b, a_tilde) - w * ket(a, b_tilde))

    # (B)
    u = rates.r + d_tilde_bulk(b, b_tilde, rates)
    v = -d_bulk(a_tilde, a, rates)
    w = d_bulk(b, b_tilde, rates)
    res_b = h @ ket(b, a_tilde) - (u * ket(b, a_tilde) - v * ket(a, b) - w * ket(b_tilde, a_tilde))

    # (C)
    u = d_tilde_bulk(a, c_tilde, rates) - d_tilde_bulk(a_tilde, c, rates)
    v = -d_bulk(a_tilde, c, rates)
    w = d_bulk(a, c_tilde, rates)
    res_c = h @ ket(a, a_tilde) - (u * ket(a, a_tilde) - w * ket(c_tilde, a_tilde) - v * ket(a, c))

    ratio = a_tilde.fugacity / a.fugacity
    q2 = rates.q ** 2
    return ProjectionResiduals(
        case_a=float(np.max(np.abs(res_a))),
        case_b=float(np.max(np.abs(res_b))),
        case_c=float(np.max(np.abs(res_c))),
        fugacity_ratio=ratio,
        ratio_matches_q2=abs(ratio - q2) <= settings.IDENTITY_TOL * max(1.0, q2),
    )


def corollary_identity_residuals(
    profile: ShockProfile,
    rates: Rates,
    include_boundary: bool = False,
) -> Dict[str, float]:
    """
    Largest relative deviation within each chain of shock-rate identities.

    Chains per shock i: d(rho_{i-1}, rho_i) against its three alternative
    forms and d_i^l; -d(rho_i, rho_{i-1}) against its forms and d_i^r;
    eps_+(rho_i) = -(r - ell) z/(1 + z) against d_i^r - r; eps_-(rho_{i-1})
    against d_i^l - ell; and d_i^l d_i^r = r ell. With include_boundary the
    boundary forms alpha - gamma z_0 and delta - beta z_N are compared too,
    which holds on the manifold only.
    """
    sr = shock_rates(profile, rates)
    r, ell = rates.r, rates.ell
    rho = profile.bulk_densities
    chains = {"vi": 0.0, "wi": 0.0, "epspi": 0.0, "epsmi": 0.0, "product": 0.0}

    def spread(values) -> float:
        values = np.asarray(values, dtype=float)
        return float((values.max() - values.min()) / max(1.0, np.abs(values).max()))

    for i in range(1, profile.N + 1):
        prev, cur = TwoVector.from_density(rho[i - 1]), TwoVector.from_density(rho[i])
        d_l, d_r = sr.d_l[i - 1], sr.d_r[i - 1]
        chains["vi"] = max(chains["vi"], spread([
            d_bulk(prev, cur, rates),
            ell * (1 - rho[i - 1]) / (1 - rho[i]),
            r * rho[i - 1] / rho[i],
            ell * (1 - rho[i - 1]) + r * rho[i - 1],
            d_l,
        ]))
        chains["wi"] = max(chains["wi"], spread([
            -d_bulk(cur, prev, rates),
            ell * rho[i] / rho[i - 1],
            r * (1 - rho[i]) / (1 - rho[i - 1]),
            r * (1 - rho[i]) + ell * rho[i],
            d_r,
        ]))
        z_cur, z_prev = cur.fugacity, prev.fugacity
        chains["epspi"] = max(chains["epspi"], spread([-rates.bias * z_cur / (1 + z_cur), d_r - r]))
        chains["epsmi"] = max(chains["epsmi"], spread([rates.bias * z_prev / (1 + z_prev), d_l - ell]))
        chains["product"] = max(chains["product"], abs(d_l * d_r - r * ell) / (r * ell))

    if include_boundary:
        chains["boundary_left"] = spread([eps_minus(TwoVector.from_density(rho[0]), rates), sr.d_l[0] - ell])
        chains["boundary_right"] = spread([eps_plus(TwoVector.from_density(rho[-1]), rates), sr.d_r[-1] - r])
    return chains


def boundary_product_residual(rates: Rates, rho_minus: float, rho_plus: float) -> float:
    """
    Distance of |rho_-> (x) |rho_+> from being an eigenvector of the two
    boundary blocks h^- (x) 1 + 1 (x) h^+ with eigenvalue eps_-(rho_-) + eps_+(rho_+).

    Zero exactly when rho_- and rho_+ are the boundary eigen-densities
    1 / kappa_+(alpha, gamma) and kappa_+(beta, delta) in fugacity form.
    """
    blocks = local_blocks(rates)
    left, right = TwoVector.from_density(rho_minus), TwoVector.from_density(rho_plus)
    identity = np.eye(2)
    operator = np.kron(blocks["minus"], identity) + np.kron(identity, blocks["plus"])
    vector = kron_vector([left, right])
    eigenvalue = eps_minus(left, rates) + eps_plus(right, rates)
    return float(np.max(np.abs(operator @ vector - eigenvalue * vector)))
