"""
Reverse-duality verification engine.

Checks R W = Q^T R and S W = Q S on full finite-size matrices, compares
the evolution of shock measures under the ASEP with the dual transition
probabilities, and builds invariant measures as convex combinations of
shock measures.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import ParameterValidationError
from app.services.asep_open import (
    ManifoldSpec,
    Rates,
    build_H,
    build_W,
    current_profile,
    density_profile,
    manifold_residuals,
    mpm_existence_warning,
    rates_from_parametrization,
    solve_manifold,
)
from app.services.lattice_core import (
    Lattice,
    dense_eigs,
    expm_action,
    stationary_distribution,
    total_variation,
)
from app.services.shock_measures import (
    DualityMatrix,
    boundary_shock_profile,
    build_duality_matrices,
    shock_measure_vector,
)
from app.services.shock_walk import (
    DualStateIndex,
    ShockProfile,
    reversed_generator,
    rw_propagator_matrix,
    rw_spectrum,
    rw_stationary_weights,
    shock_exclusion_generator,
    shock_rates,
)

logger = logging.getLogger(__name__)


@dataclass
class DualityReport:
    """
    Residuals of the reverse-duality and intertwining relations.

    residual_duality is the entrywise max of |R W - Q^T R| with the
    reversible measure scaled to largest weight 1; residual_duality_rowwise
    is max_x ||(R W - Q^T R)_x||_1 / pi(x), which does not shrink with the
    number of configurations; residual_duality_relative is the entrywise
    max of |R W - Q^T R| / R over entries with R > 0, which does not depend
    on the scale of pi or on how small a configuration's probability is.
    """
    L: int
    N: int
    residual_duality: float
    residual_duality_rowwise: float
    residual_duality_relative: float
    residual_intertwine: float
    residual_reversed: float
    res_N: float
    res_M: float
    on_B_N: bool
    on_B_N1: bool
    duality_holds: bool
    expected_violation: bool
    rates: Dict[str, float]
    warnings: List[str] = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _duality_residuals(
    dm: DualityMatrix,
    W,
    Q,
) -> Tuple[float, float, float, float, float]:
    # R W computed as (W^T R^T)^T to keep W sparse
    RW = (W.matrix.T @ dm.R.T).T
    QtR = Q.matrix.T @ dm.R
    gap = RW - QtR
    entrywise = float(np.max(np.abs(gap)))
    rowwise = float(np.max(np.abs(gap).sum(axis=1) / dm.pi))
    mass = np.abs(dm.R)
    relative_gap = np.divide(np.abs(gap), mass, out=np.zeros_like(gap), where=mass > 0)
    relative = float(np.max(relative_gap))

    SW = (W.matrix.T @ dm.S.T).T
    QS = Q.matrix @ dm.S
    intertwine = float(np.max(np.abs(SW - QS)))

    Q_rev = reversed_generator(Q, dm.pi)
    reversed_gap = abs(Q_rev.matrix - Q.matrix)
    reversed_residual = float(reversed_gap.max()) if reversed_gap.nnz else 0.0
    return entrywise, rowwise, relative, intertwine, reversed_residual


def verify_reverse_duality(
    rates: Rates,
    lat: Lattice,
    N: int,
    profile: Optional[ShockProfile] = None,
    tol: Optional[float] = None,
) -> DualityReport:
    """
    Build W, Q, R, S and measure both duality relations.

    Args:
        rates: ASEP rates
        lat: Lattice
        N: Number of shocks, 1 <= N <= L
        profile: Custom shock profile; defaults to the one fixed by the
            boundary rates
        tol: Threshold deciding whether duality holds, defaults to
            settings.DUALITY_TOL

    Returns:
        DualityReport; off the manifold the report carries
        expected_violation = True instead of raising

    Raises:
        ParameterValidationError: If N is out of range
        ResourceCapError: If a matrix exceeds its cap
    """
    tol = settings.DUALITY_TOL if tol is None else tol
    spec = ManifoldSpec(N=N, M=1)
    spec.check_lattice(lat)

    residuals = manifold_residuals(rates, spec)
    on_B_N, on_B_N1 = residuals.on_B_N(), residuals.on_B_NM()
    warnings = []
    if not on_B_N1:
        logger.warning(
            f"Rates are off B_{N}^1; reverse duality is expected to fail",
            extra={"res_N": residuals.res_N, "res_M": residuals.res_M},
        )
        warnings.append(f"parameters are off B_{N}^1")
    mpm_warning = mpm_existence_warning(spec, lat)
    if mpm_warning:
        logger.warning(mpm_warning)
        warnings.append(mpm_warning)

    profile = profile or boundary_shock_profile(rates, N)
    dm = build_duality_matrices(profile, rates, lat)
    W = build_W(rates, lat)
    Q = shock_exclusion_generator(dm.shock_rates, lat)
    entrywise, rowwise, relative, intertwine, reversed_residual = _duality_residuals(dm, W, Q)

    holds = rowwise < tol
    report = DualityReport(
        L=lat.length,
        N=N,
        residual_duality=entrywise,
        residual_duality_rowwise=rowwise,
        residual_duality_relative=relative,
        residual_intertwine=intertwine,
        residual_reversed=reversed_residual,
        res_N=residuals.res_N,
        res_M=residuals.res_M,
        on_B_N=on_B_N,
        on_B_N1=on_B_N1,
        duality_holds=holds,
        expected_violation=not on_B_N1,
        rates=rates.as_dict(),
        warnings=warnings,
    )
    logger.info(
        f"Reverse duality L = {lat.length}, N = {N}: residual {entrywise:.3e} "
        f"(rowwise {rowwise:.3e}), holds = {holds}"
    )
    return report


@dataclass(frozen=True)
class SweepPoint:
    """One B_N^1 point of a sweep, possibly with its right barrier moved."""
    q2: float
    rho_minus: float
    L: int
    N: int
    omega_plus_shift: float
    rates: Rates

    def as_row(self) -> Dict[str, Any]:
        return {
            "q2": self.q2,
            "rho_minus": self.rho_minus,
            "L": self.L,
            "N": self.N,
            "omega_plus_shift": self.omega_plus_shift,
        }


def manifold_sweep_points(
    q2_values: Sequence[float],
    rho_minus_values: Sequence[float],
    L_values: Sequence[int],
    shock_counts: Optional[Callable[[int], Sequence[int]]] = None,
    w: Optional[float] = None,
    omega_plus_shift: float = 0.0,
) -> List[SweepPoint]:
    """
    Solve every grid point onto B_N^1, q = sqrt(q2) and w = q by default.

    With omega_plus_shift > 0 each point is followed by a copy whose right
    jump barrier is moved by that amount, which takes it off B_N^1.

    Raises:
        ManifoldSolveError: If a grid point has no positive-rate solution
    """
    shock_counts = shock_counts or (lambda L: range(1, L + 1))
    points = []
    for q2 in q2_values:
        q = math.sqrt(q2)
        for rho_minus in rho_minus_values:
            for L in L_values:
                for N in shock_counts(L):
                    p = solve_manifold(q, w or q, rho_minus, ManifoldSpec(N=N, M=1))
                    points.append(SweepPoint(q2, rho_minus, L, N, 0.0, rates_from_parametrization(p)))
                    if omega_plus_shift > 0:
                        moved = replace(p, omega_plus=p.omega_plus + omega_plus_shift)
                        points.append(
                            SweepPoint(q2, rho_minus, L, N, omega_plus_shift, rates_from_parametrization(moved))
                        )
    logger.debug(f"Sweep grid with {len(points)} points")
    return points


def verify_sweep(
    points: Sequence[Tuple[Rates, Lattice, int]],
    threads: Optional[int] = None,
    tol: Optional[float] = None,
) -> List[DualityReport]:
    """Run verify_reverse_duality over many parameter points, results in input order."""
    threads = threads or settings.THREADS

    def run(point: Tuple[Rates, Lattice, int]) -> DualityReport:
        return verify_reverse_duality(*point, tol=tol)

    if threads <= 1:
        return [run(point) for point in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, points))


@dataclass
class EvolutionComparison:
    """Both sides of the shock-measure evolution identity at one time."""
    t: float
    err: float
    lhs: np.ndarray
    rhs: np.ndarray
    dual_probabilities: np.ndarray
    method: str


def evolve_and_compare(
    rates: Rates,
    lat: Lattice,
    profile: ShockProfile,
    x0: Sequence[int],
    t: float,
    tol: Optional[float] = None,
) -> EvolutionComparison:
    """
    Compare exp(W^T t) mu^{x0} with sum_y P(y, t | x0, 0) mu^y.

    For N = 1 the dual probabilities come from the closed-form random-walk
    propagator; otherwise from uniformization on Q.

    Raises:
        ParameterValidationError: If t < 0 or x0 is inadmissible
    """
    if t < 0:
        raise ParameterValidationError(f"Negative time {t}", field_name="t")
    tol = settings.EXPM_TOL if tol is None else tol

    dm = build_duality_matrices(profile, rates, lat)
    index = DualStateIndex(lat, profile.N)
    start = index.rank(x0)
    mu0 = dm.S[start]
    lhs = expm_action(build_W(rates, lat), mu0, t, tol)

    if profile.N == 1:
        P = rw_propagator_matrix(t, dm.shock_rates, lat)[start]
        method = "closed_form"
    else:
        Q = shock_exclusion_generator(dm.shock_rates, lat)
        delta = np.zeros(index.size)
        delta[start] = 1.0
        P = expm_action(Q, delta, t, tol)
        method = "uniformization"

    rhs = P @ dm.S
    err = float(np.max(np.abs(lhs - rhs)))
    logger.debug(f"Evolution identity at t = {t} from {tuple(x0)}: err {err:.3e} ({method})")
    return EvolutionComparison(t=t, err=err, lhs=lhs, rhs=rhs, dual_probabilities=P, method=method)


@dataclass
class InvariantMeasure:
    """Convex combination of shock measures and its stationarity diagnostics."""
    weights: np.ndarray
    states: np.ndarray
    vector: np.ndarray
    stationarity_residual: float
    stationary: bool
    densities: np.ndarray
    currents: Dict[str, float]


def invariant_measure(
    rates: Rates,
    lat: Lattice,
    profile: Optional[ShockProfile] = None,
    N: Optional[int] = None,
    tol: Optional[float] = None,
) -> InvariantMeasure:
    """
    Invariant measure as the pi-weighted convex combination of shock measures.

    Weights are proportional to prod_i d_i^{2 y_i}; for N = 1 they are the
    geometric weights of the single shock walk. Stationarity ||W^T mu||_inf
    is checked and, when it fails off the manifold, reported with a warning.

    Raises:
        ParameterValidationError: If neither profile nor N is given
    """
    tol = settings.STATIONARITY_TOL if tol is None else tol
    if profile is None:
        if N is None:
            raise ParameterValidationError("Either a profile or N is required", field_name="N")
        profile = boundary_shock_profile(rates, N)

    dm = build_duality_matrices(profile, rates, lat)
    weights = dm.pi / dm.pi.sum()
    if profile.N == 1:
        closed = rw_stationary_weights(dm.shock_rates, lat)
        if np.max(np.abs(closed - weights)) > 1e-12:
            logger.warning("Reversible weights deviate from the geometric closed form")
        weights = closed

    vector = weights @ dm.S
    W = build_W(rates, lat)
    residual = float(np.max(np.abs(W.matrix.T @ vector)))
    stationary = residual < tol
    if not stationary:
        logger.warning(
            f"Shock-measure combination is not stationary (residual {residual:.3e})",
            extra={"N": profile.N, "L": lat.length},
        )
    return InvariantMeasure(
        weights=weights,
        states=dm.states,
        vector=vector,
        stationarity_residual=residual,
        stationary=stationary,
        densities=density_profile(vector, lat),
        currents=current_profile(vector, rates, lat),
    )


def null_space_oracle(rates: Rates, lat: Lattice) -> np.ndarray:
    """Stationary vector of W by a dense null-space computation."""
    return stationary_distribution(build_W(rates, lat))


def invariant_vs_oracle(rates: Rates, lat: Lattice, N: int) -> float:
    """Total-variation distance between the shock-measure combination and the oracle."""
    return total_variation(invariant_measure(rates, lat, N=N).vector, null_space_oracle(rates, lat))


@dataclass
class SpectrumContainment:
    max_gap: float
    eps: np.ndarray
    gaps: np.ndarray


def spectrum_containment(
    rates: Rates,
    lat: Lattice,
    profile: Optional[ShockProfile] = None,
) -> SpectrumContainment:
    """
    Distance from each single-shock relaxation rate to the spectrum of H.

    Raises:
        ParameterValidationError: If the profile has more than one shock
        ResourceCapError: If 2^L exceeds DENSE_EIG_CAP
    """
    profile = profile or boundary_shock_profile(rates, 1)
    if profile.N != 1:
        raise ParameterValidationError("Spectrum containment needs N = 1", field_name="N")
    sr = shock_rates(profile, rates)
    eps = rw_spectrum(sr, lat)
    spectrum = dense_eigs(build_H(rates, lat))
    gaps = np.array([float(np.min(np.abs(spectrum - value))) for value in eps])
    return SpectrumContainment(max_gap=float(gaps.max()), eps=eps, gaps=gaps)


def evolved_density_profile(
    rates: Rates,
    lat: Lattice,
    profile: ShockProfile,
    x0: Sequence[int],
    t: float,
    tol: Optional[float] = None,
) -> np.ndarray:
    """Exact site densities at time t of the ASEP started from mu^{x0}."""
    if t == 0:
        return density_profile(shock_measure_vector(profile, x0, lat).vector, lat)
    return density_profile(evolve_and_compare(rates, lat, profile, x0, t, tol).rhs, lat)
