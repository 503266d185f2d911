"""
The dual process: microscopically stable shock profiles, shock hopping
rates, the N-particle shock exclusion process and the closed-form single
shock random walk.

Shock positions are absolute lattice coordinates. Dual states are ordered
by colexicographic rank of their position vectors, which for N = 1 is the
plain site order.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from app.core.config import settings
from app.core.exceptions import (
    NumericalError,
    ParameterValidationError,
    StabilityError,
)
from app.core.resources import dense_matrix_estimate, ensure_memory, sparse_generator_estimate
from app.services.asep_open import Rates, density_from_fugacity, fugacity
from app.services.lattice_core import GeneratorConvention, Lattice, SparseGenerator

logger = logging.getLogger(__name__)


def densities_from_stability(rho0: float, N: int, q: float) -> Tuple[float, ...]:
    """
    Bulk densities rho_0 .. rho_N with fugacities z_i = q^{2i} z_0.

    Raises:
        ParameterValidationError: If q == 1, N < 1 or rho0 is outside (0, 1)
    """
    if q <= 0 or q == 1:
        raise ParameterValidationError(f"q = {q} must be positive and different from 1", field_name="q")
    if N < 1:
        raise ParameterValidationError(f"N = {N} must be at least 1", field_name="N")
    if not 0 < rho0 < 1:
        raise ParameterValidationError(f"rho0 = {rho0} must lie in (0, 1)", field_name="rho0")
    z0 = fugacity(rho0)
    return tuple(density_from_fugacity(q ** (2 * i) * z0) for i in range(N + 1))


@dataclass(frozen=True)
class ShockProfile:
    """Bulk densities rho_0 .. rho_N and shock densities rho*_1 .. rho*_N."""
    bulk_densities: Tuple[float, ...]
    shock_densities: Tuple[float, ...]

    def __post_init__(self):
        errors = []
        if len(self.bulk_densities) != len(self.shock_densities) + 1:
            errors.append(
                f"{len(self.bulk_densities)} bulk densities for "
                f"{len(self.shock_densities)} shocks"
            )
        if len(self.shock_densities) < 1:
            errors.append("at least one shock is required")
        if any(not 0 < rho < 1 for rho in self.bulk_densities):
            errors.append("bulk densities must lie in (0, 1)")
        if any(not 0 <= rho <= 1 for rho in self.shock_densities):
            errors.append("shock densities must lie in [0, 1]")
        if errors:
            raise ParameterValidationError(
                "Invalid shock profile", field_name="profile", validation_errors=errors
            )

    @property
    def N(self) -> int:
        return len(self.shock_densities)

    @property
    def fugacities(self) -> np.ndarray:
        rho = np.asarray(self.bulk_densities)
        return rho / (1.0 - rho)

    def stability_residuals(self, q: float) -> np.ndarray:
        """z_i / z_{i-1} - q^2 for i = 1 .. N."""
        z = self.fugacities
        return z[1:] / z[:-1] - q * q

    def is_stable(self, q: float, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.stability_residuals(q)) <= tol * max(1.0, q * q)))

    def check_stable(self, q: float, tol: float = 1e-12) -> "ShockProfile":
        residuals = self.stability_residuals(q)
        bad = np.flatnonzero(np.abs(residuals) > tol * max(1.0, q * q))
        if bad.size:
            raise StabilityError(
                f"Shock {int(bad[0]) + 1} is not microscopically stable "
                f"(fugacity ratio off by {residuals[bad[0]]:.3e})",
                shock_index=int(bad[0]) + 1,
            )
        return self


@dataclass(frozen=True)
class ShockRates:
    """Left and right hopping rates of each shock."""
    d_l: Tuple[float, ...]
    d_r: Tuple[float, ...]

    @property
    def N(self) -> int:
        return len(self.d_l)

    @property
    def d_asym(self) -> np.ndarray:
        """Shock asymmetries d_i = sqrt(d_i^r / d_i^l)."""
        return np.sqrt(np.asarray(self.d_r) / np.asarray(self.d_l))

    @property
    def velocity(self) -> np.ndarray:
        return np.asarray(self.d_r) - np.asarray(self.d_l)

    @property
    def diffusion(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.d_r) + np.asarray(self.d_l))

    @property
    def w(self) -> np.ndarray:
        """Per-shock time scales sqrt(d_i^r d_i^l)."""
        return np.sqrt(np.asarray(self.d_r) * np.asarray(self.d_l))


def _current(rho: float, rates: Rates) -> float:
    return rates.bias * rho * (1.0 - rho)


def shock_rates(
    profile: ShockProfile,
    rates: Rates,
    require_stable: bool = True,
    tol: Optional[float] = None,
) -> ShockRates:
    """
    Hopping rates d_i^l = j_{i-1} / (rho_i - rho_{i-1}), d_i^r = j_i / (rho_i - rho_{i-1}).

    For stable profiles the postcondition cross-checks the product forms
    d_i^l = ell (1 - rho_{i-1}) + r rho_{i-1}, d_i^r = r (1 - rho_i) + ell rho_i
    and d_i^l d_i^r = r ell.

    Args:
        profile: Shock profile
        rates: ASEP rates
        require_stable: Reject profiles violating microscopic stability
        tol: Relative tolerance of the postcondition

    Raises:
        StabilityError: If require_stable and the profile is unstable
        ParameterValidationError: If two neighbouring bulk densities coincide
        NumericalError: If the cross-checks fail
    """
    tol = settings.IDENTITY_TOL if tol is None else tol
    if require_stable:
        profile.check_stable(rates.q)

    rho = np.asarray(profile.bulk_densities)
    jumps = np.diff(rho)
    if np.any(jumps == 0):
        raise ParameterValidationError(
            "Neighbouring bulk densities coincide", field_name="bulk_densities"
        )
    currents = rates.bias * rho * (1.0 - rho)
    d_l = currents[:-1] / jumps
    d_r = currents[1:] / jumps

    if require_stable:
        alt_l = rates.ell * (1.0 - rho[:-1]) + rates.r * rho[:-1]
        alt_r = rates.r * (1.0 - rho[1:]) + rates.ell * rho[1:]
        gap = max(
            float(np.max(np.abs(d_l - alt_l) / alt_l)),
            float(np.max(np.abs(d_r - alt_r) / alt_r)),
            float(np.max(np.abs(d_l * d_r - rates.r * rates.ell))) / (rates.r * rates.ell),
        )
        if gap > 10 * tol:
            raise NumericalError(
                f"Shock rates disagree with their product forms (gap {gap:.3e})",
                operation="shock_rates",
            )
    return ShockRates(tuple(d_l.tolist()), tuple(d_r.tolist()))


class DualStateIndex:
    """Colexicographic ranking of N-subsets of the lattice."""

    def __init__(self, lat: Lattice, N: int):
        if not 1 <= N <= lat.length:
            raise ParameterValidationError(
                f"N = {N} must satisfy 1 <= N <= L = {lat.length}", field_name="N"
            )
        self.lat = lat
        self.N = N
        self._binom = np.array(
            [[math.comb(n, k) for k in range(N + 1)] for n in range(lat.length + 1)],
            dtype=np.int64,
        )

    @property
    def size(self) -> int:
        return math.comb(self.lat.length, self.N)

    def rank(self, xs: Sequence[int]) -> int:
        xs = self.check_positions(xs)
        return int(sum(math.comb(x - self.lat.l_minus, i) for i, x in enumerate(xs, start=1)))

    def rank_many(self, states: np.ndarray) -> np.ndarray:
        """Ranks of a (S, N) array of position vectors."""
        offsets = np.asarray(states, dtype=np.int64) - self.lat.l_minus
        columns = np.arange(1, self.N + 1)
        return self._binom[offsets, columns[None, :]].sum(axis=1)

    def unrank(self, index: int) -> Tuple[int, ...]:
        if not 0 <= index < self.size:
            raise ParameterValidationError(
                f"Dual state index {index} outside [0, {self.size - 1}]", field_name="index"
            )
        xs = []
        remainder = index
        c = self.lat.length - 1
        for i in range(self.N, 0, -1):
            while math.comb(c, i) > remainder:
                c -= 1
            xs.append(c + self.lat.l_minus)
            remainder -= math.comb(c, i)
            c -= 1
        return tuple(reversed(xs))

    def all_states(self) -> np.ndarray:
        """Position vectors of all dual states in rank order, shape (size, N)."""
        return np.array([self.unrank(i) for i in range(self.size)], dtype=np.int64).reshape(
            self.size, self.N
        )

    def check_positions(self, xs: Sequence[int]) -> Tuple[int, ...]:
        """
        Validate the single-file condition L- <= x_1 < ... < x_N <= L+.

        Raises:
            ParameterValidationError: If the positions are not admissible
        """
        xs = tuple(int(x) for x in xs)
        if len(xs) != self.N:
            raise ParameterValidationError(
                f"Expected {self.N} shock positions, got {len(xs)}", field_name="positions"
            )
        if any(not self.lat.contains(x) for x in xs):
            raise ParameterValidationError(
                f"Shock positions {xs} leave the lattice", field_name="positions"
            )
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ParameterValidationError(
                f"Shock positions {xs} are not strictly increasing", field_name="positions"
            )
        return xs


def shock_exclusion_generator(sr: ShockRates, lat: Lattice) -> SparseGenerator:
    """
    Intensity matrix of the shock exclusion process.

    Shock i hops left with d_i^l times the factor (1 - delta(x_i - 1, x_{i-1}))
    and right with d_i^r times (1 - delta(x_i + 1, x_{i+1})), with sentinels
    x_0 = L- - 1 and x_{N+1} = L+ + 1 supplying the reflecting walls.
    """
    index = DualStateIndex(lat, sr.N)
    ensure_memory(sparse_generator_estimate(index.size, 2 * sr.N + 1))
    states = index.all_states()
    size = index.size
    padded = np.hstack([
        np.full((size, 1), lat.l_minus - 1),
        states,
        np.full((size, 1), lat.l_plus + 1),
    ])

    rows, cols, vals = [], [], []
    source = np.arange(size)
    for i in range(1, sr.N + 1):
        for step, rate, neighbour in ((-1, sr.d_l[i - 1], i - 1), (1, sr.d_r[i - 1], i + 1)):
            allowed = (1 - (padded[:, i] + step == padded[:, neighbour])).astype(bool)
            if not allowed.any():
                continue
            moved = states[allowed].copy()
            moved[:, i - 1] += step
            rows.append(source[allowed])
            cols.append(index.rank_many(moved))
            vals.append(np.full(int(allowed.sum()), rate))

    if rows:
        off = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        ).tocsr()
    else:
        off = sp.csr_matrix((size, size))
    exit_rates = np.asarray(off.sum(axis=1)).ravel()
    matrix = (off - sp.diags(exit_rates)).tocsr()
    matrix.eliminate_zeros()
    logger.debug(f"Assembled shock exclusion generator: N = {sr.N}, L = {lat.length}, dim {size}")
    return SparseGenerator(matrix, GeneratorConvention.INTENSITY).validate()


def build_Q(profile: ShockProfile, rates: Rates, lat: Lattice) -> SparseGenerator:
    """
    Generator of the shock exclusion process for a stable profile.

    Raises:
        ParameterValidationError: If N is not in 1 .. L
    """
    if not 1 <= profile.N <= lat.length:
        raise ParameterValidationError(
            f"N = {profile.N} must satisfy 1 <= N <= L = {lat.length}", field_name="N"
        )
    return shock_exclusion_generator(shock_rates(profile, rates), lat)


def reversible_pi(xs: Sequence[int], sr: ShockRates) -> float:
    """Unnormalized reversible weight prod_i d_i^{2 x_i}."""
    d = sr.d_asym
    return float(np.prod(d ** (2 * np.asarray(xs, dtype=float))))


def reversible_weights(sr: ShockRates, lat: Lattice) -> np.ndarray:
    """Reversible measure over all dual states in rank order, normalized to 1."""
    states = DualStateIndex(lat, sr.N).all_states()
    log_pi = 2.0 * states @ np.log(sr.d_asym)
    weights = np.exp(log_pi - log_pi.max())
    return weights / weights.sum()


def detailed_balance_residual(Q: SparseGenerator, pi: np.ndarray) -> float:
    """max |pi(x) Q(x, y) - pi(y) Q(y, x)| over all pairs."""
    flux = sp.diags(np.asarray(pi, dtype=float)) @ Q.matrix
    gap = (flux - flux.T).tocsr()
    return float(np.max(np.abs(gap.data))) if gap.nnz else 0.0


def reversed_generator(Q: SparseGenerator, pi: np.ndarray) -> SparseGenerator:
    """Generator of the time-reversed process, diag(pi)^-1 Q^T diag(pi)."""
    pi = np.asarray(pi, dtype=float)
    matrix = (sp.diags(1.0 / pi) @ Q.matrix.T @ sp.diags(pi)).tocsr()
    return SparseGenerator(matrix, GeneratorConvention.INTENSITY)


def _require_single_shock(sr: ShockRates) -> Tuple[float, float]:
    if sr.N != 1:
        raise ParameterValidationError(
            f"The closed-form random walk needs N = 1, got N = {sr.N}", field_name="N"
        )
    return float(sr.d_asym[0]), float(sr.w[0])


def rw_stationary_weights(sr: ShockRates, lat: Lattice) -> np.ndarray:
    """Geometric weights (d^2 - 1) / (d^{2L} - 1) d^{2(y - L-)}; 1/L when d = 1."""
    d, _ = _require_single_shock(sr)
    L = lat.length
    offsets = np.arange(L)
    if d == 1.0:
        return np.full(L, 1.0 / L)
    return (d * d - 1.0) / (d ** (2 * L) - 1.0) * d ** (2.0 * offsets)


def rw_spectrum(sr: ShockRates, lat: Lattice) -> np.ndarray:
    """Relaxation rates eps_p = w (d + 1/d - 2 cos(pi p / L)), eps_0 = 0."""
    d, w = _require_single_shock(sr)
    p = np.arange(1, lat.length)
    eps = w * (d + 1.0 / d - 2.0 * np.cos(np.pi * p / lat.length))
    return np.concatenate([[0.0], eps])


def _psi(p: np.ndarray, offsets: np.ndarray, d: float, L: int) -> np.ndarray:
    """psi_p(y) = d sin(pi p (y + 1 - L-) / L) - sin(pi p (y - L-) / L), shape (len(p), L)."""
    angle = np.pi * p[:, None] / L
    return d * np.sin(angle * (offsets[None, :] + 1)) - np.sin(angle * offsets[None, :])


def rw_propagator_matrix(t: float, sr: ShockRates, lat: Lattice) -> np.ndarray:
    """
    Transition probabilities P(y, t | x, 0) of the reflecting biased walk,
    rows x and columns y in site order.

    The spectral sum carries the factor w / (d eps_p), which makes the t = 0
    value the identity.

    Raises:
        ParameterValidationError: If t < 0 or N != 1
    """
    if t < 0:
        raise ParameterValidationError(f"Negative time {t}", field_name="t")
    d, w = _require_single_shock(sr)
    L = lat.length
    ensure_memory(dense_matrix_estimate(L, L))
    offsets = np.arange(L)
    p = np.arange(1, L)

    stationary = rw_stationary_weights(sr, lat)
    eps = rw_spectrum(sr, lat)[1:]
    psi = _psi(p, offsets, d, L)
    modes = (w / (d * eps)) * np.exp(-eps * t)
    spectral = np.einsum("p,px,py->xy", modes, psi, psi)
    bias = d ** (offsets[None, :] - offsets[:, None])
    P = stationary[None, :] + (2.0 / L) * bias * spectral

    if not np.all(np.isfinite(P)):
        raise NumericalError("Propagator produced non-finite values", operation="rw_propagator")
    return P


def rw_propagator(x: int, y: int, t: float, sr: ShockRates, lat: Lattice) -> float:
    """Transition probability P(y, t | x, 0) of the single shock."""
    if not (lat.contains(x) and lat.contains(y)):
        raise ParameterValidationError(f"Sites {x}, {y} outside the lattice", field_name="x")
    P = rw_propagator_matrix(t, sr, lat)
    return float(P[x - lat.l_minus, y - lat.l_minus])


def rw_eigenvectors(sr: ShockRates, lat: Lattice) -> np.ndarray:
    """
    Eigenfunctions Psi_0 .. Psi_{L-1} as columns (complex), with
    Psi_p = sqrt(2/L) psi_p / (d - exp(-i pi p / L)) for p >= 1 and the
    normalized geometric mode for p = 0.
    """
    d, _ = _require_single_shock(sr)
    L = lat.length
    offsets = np.arange(L)
    p = np.arange(1, L)
    if d == 1.0:
        psi0 = np.full(L, 1.0 / math.sqrt(L))
    else:
        psi0 = math.sqrt((d * d - 1.0) / (d ** (2 * L) - 1.0)) * d ** offsets.astype(float)
    norm = math.sqrt(2.0 / L) / (d - np.exp(-1j * np.pi * p / L))
    modes = norm[:, None] * _psi(p, offsets, d, L)
    return np.vstack([psi0.astype(complex)[None, :], modes]).T


def orthonormality_defect(vectors: np.ndarray) -> float:
    """max |sum_y Psi_p(y) conj(Psi_q(y)) - delta_pq| over all mode pairs."""
    gram = vectors.T @ vectors.conj()
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
