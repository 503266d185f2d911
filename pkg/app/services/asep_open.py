"""
Open ASEP parameters, boundary manifolds and generator assembly.

Rates follow the hopping convention r (right), ell (left) in the bulk,
alpha / gamma for injection / extraction at site L- and delta / beta for
injection / extraction at site L+. The generator W uses the row (intensity)
convention; the Hamiltonian H = -W^T is assembled separately from local
blocks so that H + W^T = 0 is an independent cross-check.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from app.core.config import settings
from app.core.exceptions import (
    ManifoldSolveError,
    NumericalError,
    ParameterValidationError,
)
from app.core.resources import ensure_memory, ensure_sites, sparse_generator_estimate
from app.services.lattice_core import (
    GeneratorConvention,
    Lattice,
    SparseGenerator,
    TwoVector,
    kron_vector,
    occupation_table,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Rates:
    """The six strictly positive open-ASEP rates with r != ell."""
    r: float
    ell: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        errors = [
            f"{name} = {value} must be strictly positive"
            for name, value in asdict(self).items()
            if not (value > 0 and math.isfinite(value))
        ]
        if not errors and self.r == self.ell:
            errors.append("r and ell must differ")
        if errors:
            raise ParameterValidationError(
                "Invalid ASEP rates", field_name="rates", validation_errors=errors
            )

    @property
    def q(self) -> float:
        """Jump asymmetry sqrt(r / ell)."""
        return math.sqrt(self.r / self.ell)

    @property
    def w(self) -> float:
        """Time scale sqrt(r * ell)."""
        return math.sqrt(self.r * self.ell)

    @property
    def bias(self) -> float:
        return self.r - self.ell

    def scaled(self, c: float) -> "Rates":
        return Rates(*(c * value for value in asdict(self).values()))

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class BoundaryParametrization:
    """
    Boundary densities and jump barriers parametrizing the boundary rates.

    alpha = (r + omega_-) rho_-, gamma = (ell + omega_-)(1 - rho_-),
    beta = (r + omega_+)(1 - rho_+), delta = (ell + omega_+) rho_+.
    """
    q: float
    w: float
    rho_minus: float
    rho_plus: float
    omega_minus: float = 0.0
    omega_plus: float = 0.0

    def __post_init__(self):
        errors = []
        if not self.q > 0 or self.q == 1:
            errors.append(f"q = {self.q} must be positive and different from 1")
        if not self.w > 0:
            errors.append(f"w = {self.w} must be positive")
        for name in ("rho_minus", "rho_plus"):
            value = getattr(self, name)
            if not 0 < value < 1:
                errors.append(f"{name} = {value} must lie strictly between 0 and 1")
        if errors:
            raise ParameterValidationError(
                "Invalid boundary parametrization",
                field_name="parametrization",
                validation_errors=errors,
            )

    @property
    def r(self) -> float:
        return self.q * self.w

    @property
    def ell(self) -> float:
        return self.w / self.q

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class ManifoldSpec:
    """Shock count N and submanifold index M with 1 <= M <= N."""
    N: int
    M: int = 1

    def __post_init__(self):
        if self.N < 1:
            raise ParameterValidationError(f"N = {self.N} must be at least 1", field_name="N")
        if not 1 <= self.M <= self.N:
            raise ParameterValidationError(
                f"M = {self.M} must satisfy 1 <= M <= N = {self.N}", field_name="M"
            )

    def check_lattice(self, lat: Lattice) -> None:
        if self.N > lat.length:
            raise ParameterValidationError(
                f"N = {self.N} shocks do not fit on L = {lat.length} sites", field_name="N"
            )


@dataclass(frozen=True)
class ManifoldResiduals:
    """Residuals of the B_N and B_N^M constraints."""
    res_N: float
    res_M: float
    target_N: float
    target_M: float

    def on_B_N(self, tol: Optional[float] = None) -> bool:
        tol = settings.MANIFOLD_TOL if tol is None else tol
        return abs(self.res_N) <= tol * max(1.0, self.target_N)

    def on_B_NM(self, tol: Optional[float] = None) -> bool:
        tol = settings.MANIFOLD_TOL if tol is None else tol
        return self.on_B_N(tol) and abs(self.res_M) <= tol * max(1.0, self.target_M)


def rates_from_parametrization(p: BoundaryParametrization) -> Rates:
    """
    Boundary and bulk rates induced by a parametrization.

    Raises:
        ParameterValidationError: If any induced rate is not strictly positive
    """
    r, ell = p.r, p.ell
    values = dict(
        r=r,
        ell=ell,
        alpha=(r + p.omega_minus) * p.rho_minus,
        beta=(r + p.omega_plus) * (1.0 - p.rho_plus),
        gamma=(ell + p.omega_minus) * (1.0 - p.rho_minus),
        delta=(ell + p.omega_plus) * p.rho_plus,
    )
    bad = [f"{name} = {value}" for name, value in values.items() if not value > 0]
    if bad:
        raise ParameterValidationError(
            "Parametrization induces non-positive rates",
            field_name="parametrization",
            validation_errors=bad,
        )
    return Rates(**values)


def fugacity(rho: float) -> float:
    """
    Fugacity rho / (1 - rho).

    Raises:
        ParameterValidationError: For rho outside [0, 1)
    """
    if not 0.0 <= rho < 1.0:
        raise ParameterValidationError(f"Fugacity undefined for density {rho}", field_name="rho")
    return rho / (1.0 - rho)


def density_from_fugacity(z: float) -> float:
    return z / (1.0 + z)


def kappa_pair(x: float, y: float, rates: Rates) -> tuple:
    """
    Both roots (kappa_+, kappa_-) of x k^2 - (y - x + r - ell) k - y = 0.

    The root without cancellation is evaluated directly and the other from
    kappa_+ kappa_- = -y / x.

    Raises:
        ParameterValidationError: If x or y is not positive
        NumericalError: If the roots fail the quadratic or product check
    """
    if not x > 0:
        raise ParameterValidationError(f"kappa needs x > 0, got {x}", field_name="x")
    if not y > 0:
        raise ParameterValidationError(f"kappa needs y > 0, got {y}", field_name="y")

    b = y - x + rates.bias
    disc = math.sqrt(b * b + 4.0 * x * y)
    if b >= 0:
        k_plus = (b + disc) / (2.0 * x)
        k_minus = -y / (x * k_plus)
    else:
        k_minus = (b - disc) / (2.0 * x)
        k_plus = -y / (x * k_minus)

    for k in (k_plus, k_minus):
        scale = max(1.0, abs(x * k * k), abs(b * k), y)
        if abs(x * k * k - b * k - y) > 1e-12 * scale:
            raise NumericalError(
                f"kappa root {k} does not solve its quadratic",
                operation="kappa",
                details={"x": x, "y": y},
            )
    if abs(k_plus * k_minus + y / x) > 1e-12 * max(1.0, y / x):
        raise NumericalError("kappa roots violate kappa_+ kappa_- = -y/x", operation="kappa")
    return k_plus, k_minus


def kappa(x: float, y: float, rates: Rates, sign: Union[int, str] = 1) -> float:
    """kappa_+(x, y) for sign +1 / '+', kappa_-(x, y) for sign -1 / '-'."""
    k_plus, k_minus = kappa_pair(x, y, rates)
    if sign in (1, "+"):
        return k_plus
    if sign in (-1, "-"):
        return k_minus
    raise ParameterValidationError(f"Unknown kappa sign {sign!r}", field_name="sign")


def manifold_residuals(rates: Rates, spec: ManifoldSpec) -> ManifoldResiduals:
    left_plus, left_minus = kappa_pair(rates.alpha, rates.gamma, rates)
    right_plus, right_minus = kappa_pair(rates.beta, rates.delta, rates)
    target_N = rates.q ** (2 * spec.N)
    target_M = rates.q ** (-2 * spec.M)
    return ManifoldResiduals(
        res_N=left_plus * right_plus - target_N,
        res_M=left_minus * right_minus - target_M,
        target_N=target_N,
        target_M=target_M,
    )


def submanifold_ratio_residual(rates: Rates, spec: ManifoldSpec) -> float:
    """Relative residual of alpha beta / (gamma delta) = q^{-2(N-M)}, implied by B_N^M."""
    ratio = rates.alpha * rates.beta / (rates.gamma * rates.delta)
    return ratio * rates.q ** (2 * (spec.N - spec.M)) - 1.0


def _barrier_valid(omega: float, r: float, ell: float) -> bool:
    return r + omega > 0 and ell + omega > 0


def solve_manifold(
    q: float,
    w: float,
    rho_minus: float,
    spec: ManifoldSpec,
    omega_minus: Optional[float] = None,
    tol: Optional[float] = None,
) -> BoundaryParametrization:
    """
    Place a parametrization on the manifold B_N^M.

    rho_+ follows from z_+ = q^{2N} z_-. Without omega_minus the symmetric
    branch omega_- = omega_+ = (r - q^M ell) / (q^M - 1) is used; with
    omega_minus given, omega_+ is solved from the B_N^M constraint.

    Args:
        q: Jump asymmetry, q != 1
        w: Time scale
        rho_minus: Left boundary density
        spec: Manifold indices
        omega_minus: Optional left jump barrier
        tol: Relative tolerance for the final residual check

    Returns:
        Parametrization on B_N^M

    Raises:
        ManifoldSolveError: If rho_+ leaves (0, 1) or omega_minus admits no
            positive right barrier
        NumericalError: If the solved point misses the manifold
    """
    if q <= 0 or q == 1:
        raise ParameterValidationError(f"q = {q} must be positive and different from 1", field_name="q")
    r, ell = q * w, w / q
    z_plus = q ** (2 * spec.N) * fugacity(rho_minus)
    rho_plus = density_from_fugacity(z_plus)
    if not 0 < rho_plus < 1:
        raise ManifoldSolveError(
            f"Right boundary density {rho_plus} is not strictly inside (0, 1)",
            details={"rho_plus": rho_plus},
        )

    q_m = q ** spec.M
    if omega_minus is None:
        # r + omega and ell + omega share the sign of (q^2 - 1)(q^M - 1) > 0
        omega_minus = omega_plus = (r - q_m * ell) / (q_m - 1.0)
    else:
        c = q ** (2 * spec.M) * (ell + omega_minus) / (r + omega_minus)
        if c == 1.0 or not _barrier_valid(omega_minus, r, ell):
            raise ManifoldSolveError(
                f"omega_minus = {omega_minus} admits no right barrier",
                candidates={"omega_minus": omega_minus, "c": c},
            )
        omega_plus = (c * ell - r) / (1.0 - c)
        if not _barrier_valid(omega_plus, r, ell):
            raise ManifoldSolveError(
                f"Right barrier {omega_plus} yields non-positive rates",
                candidates={"omega_minus": omega_minus, "omega_plus": omega_plus},
            )

    p = BoundaryParametrization(q, w, rho_minus, rho_plus, omega_minus, omega_plus)
    residuals = manifold_residuals(rates_from_parametrization(p), spec)
    if not residuals.on_B_NM(tol):
        raise NumericalError(
            "Solved parametrization misses the manifold",
            operation="solve_manifold",
            details={"res_N": residuals.res_N, "res_M": residuals.res_M},
        )
    logger.debug(
        f"Solved B_{spec.N}^{spec.M}: rho_+ = {rho_plus:.6g}, "
        f"omega_- = {omega_minus:.6g}, omega_+ = {omega_plus:.6g}"
    )
    return p


def mpm_existence_warning(spec: ManifoldSpec, lat: Lattice) -> Optional[str]:
    """Warning text when the finite-dimensional matrix product measure cannot exist."""
    if lat.length <= spec.N - spec.M + 1:
        return (
            f"L = {lat.length} <= N - M + 1 = {spec.N - spec.M + 1}: no finite-dimensional "
            f"matrix product measure exists for this system size"
        )
    return None


def assemble_intensity(
    lat: Lattice,
    r: float,
    ell: float,
    alpha: float = 0.0,
    beta: float = 0.0,
    gamma: float = 0.0,
    delta: float = 0.0,
) -> SparseGenerator:
    """
    Intensity matrix from raw nonnegative rates; zero boundary rates give the
    particle-conserving limit.

    Raises:
        ResourceCapError: If L exceeds MAX_GENERATOR_SITES or the memory cap
    """
    ensure_sites(lat.length, settings.MAX_GENERATOR_SITES, "Generator assembly")
    dim = lat.n_configs
    ensure_memory(sparse_generator_estimate(dim, lat.length + 2))

    occ = occupation_table(lat)
    index = np.arange(dim, dtype=np.int64)
    L = lat.length
    rows, cols, vals = [], [], []

    def emit(mask: np.ndarray, target: np.ndarray, rate: float):
        if rate != 0.0 and mask.any():
            rows.append(index[mask])
            cols.append(target[mask])
            vals.append(np.full(int(mask.sum()), rate))

    for j in range(L - 1):
        swap = np.int64((1 << (L - 1 - j)) | (1 << (L - 2 - j)))
        emit((occ[:, j] == 1) & (occ[:, j + 1] == 0), index ^ swap, r)
        emit((occ[:, j] == 0) & (occ[:, j + 1] == 1), index ^ swap, ell)

    left_bit = np.int64(1 << (L - 1))
    emit(occ[:, 0] == 0, index ^ left_bit, alpha)
    emit(occ[:, 0] == 1, index ^ left_bit, gamma)
    right_bit = np.int64(1)
    emit(occ[:, L - 1] == 0, index ^ right_bit, delta)
    emit(occ[:, L - 1] == 1, index ^ right_bit, beta)

    if rows:
        rows_arr, cols_arr, vals_arr = map(np.concatenate, (rows, cols, vals))
    else:
        rows_arr = cols_arr = np.zeros(0, dtype=np.int64)
        vals_arr = np.zeros(0)
    off = sp.coo_matrix((vals_arr, (rows_arr, cols_arr)), shape=(dim, dim)).tocsr()
    exit_rates = np.asarray(off.sum(axis=1)).ravel()
    matrix = (off - sp.diags(exit_rates)).tocsr()
    matrix.eliminate_zeros()

    logger.debug(f"Assembled intensity matrix for L = {L}: dim {dim}, nnz {matrix.nnz}")
    return SparseGenerator(matrix, GeneratorConvention.INTENSITY)


def build_W(rates: Rates, lat: Lattice) -> SparseGenerator:
    """Intensity matrix of the open ASEP on lat."""
    return assemble_intensity(
        lat, rates.r, rates.ell, rates.alpha, rates.beta, rates.gamma, rates.delta
    ).validate()


def local_blocks(rates: Rates) -> Dict[str, np.ndarray]:
    """
    Local Hamiltonian blocks including the discrete-gradient terms.

    The bulk block acts on (00, 01, 10, 11) of a bond; the boundary blocks on
    (empty, occupied) of the edge site. The gradient terms telescope when the
    blocks are summed over the lattice.
    """
    r, ell = rates.r, rates.ell
    h_bulk = np.array([
        [0.0, 0.0, 0.0, 0.0],
        [0.0, r, -r, 0.0],
        [0.0, -ell, ell, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    h_minus = np.array([
        [rates.alpha, -rates.gamma],
        [-rates.alpha, rates.gamma + r - ell],
    ])
    h_plus = np.array([
        [rates.delta, -rates.beta],
        [-rates.delta, rates.beta - (r - ell)],
    ])
    return {"bulk": h_bulk, "minus": h_minus, "plus": h_plus}


def _embed(block: np.ndarray, first_site: int, lat: Lattice) -> sp.csr_matrix:
    width = int(round(math.log2(block.shape[0])))
    left = sp.identity(1 << first_site, format="csr")
    right = sp.identity(1 << (lat.length - first_site - width), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(block)), right, format="csr")


def build_H(rates: Rates, lat: Lattice) -> SparseGenerator:
    """Hamiltonian H = -W^T assembled from the local blocks."""
    ensure_sites(lat.length, settings.MAX_GENERATOR_SITES, "Hamiltonian assembly")
    ensure_memory(sparse_generator_estimate(lat.n_configs, lat.length + 2))

    blocks = local_blocks(rates)
    H = _embed(blocks["minus"], 0, lat) + _embed(blocks["plus"], lat.length - 1, lat)
    for j in range(lat.length - 1):
        H = H + _embed(blocks["bulk"], j, lat)
    H = H.tocsr()
    H.eliminate_zeros()
    return SparseGenerator(H, GeneratorConvention.HAMILTONIAN).validate()


def current_expectation(
    mu: np.ndarray,
    rates: Rates,
    lat: Lattice,
    k: Union[int, str],
) -> float:
    """
    Expected instantaneous particle current in the measure mu.

    Args:
        mu: Probability vector over the 2^L configurations
        rates: ASEP rates
        lat: Lattice
        k: Bulk bond (k, k+1) with L- <= k < L+, or 'left' / 'right'

    Raises:
        ParameterValidationError: For an invalid bond
    """
    mu = np.asarray(mu, dtype=float)
    occ = occupation_table(lat)
    if k == "left":
        eta = occ[:, 0]
        local = rates.alpha * (1 - eta) - rates.gamma * eta
    elif k == "right":
        eta = occ[:, -1]
        local = rates.beta * eta - rates.delta * (1 - eta)
    elif isinstance(k, (int, np.integer)) and lat.l_minus <= k < lat.l_plus:
        j = int(k) - lat.l_minus
        left, right = occ[:, j], occ[:, j + 1]
        local = rates.r * left * (1 - right) - rates.ell * (1 - left) * right
    else:
        raise ParameterValidationError(f"Invalid bond or boundary tag {k!r}", field_name="k")
    return float(mu @ local)


def current_profile(mu: np.ndarray, rates: Rates, lat: Lattice) -> Dict[str, float]:
    """Left boundary, every bulk bond and right boundary currents of mu."""
    profile = {"left": current_expectation(mu, rates, lat, "left")}
    for k in range(lat.l_minus, lat.l_plus):
        profile[f"bond_{k}"] = current_expectation(mu, rates, lat, k)
    profile["right"] = current_expectation(mu, rates, lat, "right")
    return profile


def density_profile(mu: np.ndarray, lat: Lattice) -> np.ndarray:
    """Site densities <eta_k> of mu in site order."""
    return np.asarray(mu, dtype=float) @ occupation_table(lat)


def bernoulli_product(rho: Union[float, Sequence[float]], lat: Lattice) -> np.ndarray:
    """Bernoulli product measure with one density or one density per site."""
    densities = np.broadcast_to(np.asarray(rho, dtype=float), (lat.length,))
    return kron_vector([TwoVector.from_density(float(value)) for value in densities])
