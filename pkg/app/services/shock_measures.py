"""
Bernoulli shock measures over the ASEP state space and the duality
matrices R and S built from them.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.resources import dense_matrix_estimate, ensure_memory, ensure_sites
from app.services.asep_open import Rates, density_from_fugacity, kappa
from app.services.lattice_core import Lattice, TwoVector, kron_vector, occupation_table
from app.services.shock_walk import (
    DualStateIndex,
    ShockProfile,
    ShockRates,
    densities_from_stability,
    reversible_weights,
    shock_rates,
)

logger = logging.getLogger(__name__)


def shock_densities_from_boundary(rates: Rates, N: int) -> Tuple[float, ...]:
    """Shock densities with fugacities z*_i = (alpha / gamma) q^{2(i-1)}."""
    ratio = rates.alpha / rates.gamma
    q2 = rates.q ** 2
    return tuple(density_from_fugacity(ratio * q2 ** (i - 1)) for i in range(1, N + 1))


def boundary_shock_profile(rates: Rates, N: int) -> ShockProfile:
    """
    The N-shock profile fixed by the boundary rates: rho_0 has fugacity
    1 / kappa_+(alpha, gamma), the bulk follows the stability condition and
    the shock densities follow from alpha / gamma.
    """
    rho0 = density_from_fugacity(1.0 / kappa(rates.alpha, rates.gamma, rates, +1))
    return ShockProfile(
        bulk_densities=densities_from_stability(rho0, N, rates.q),
        shock_densities=shock_densities_from_boundary(rates, N),
    )


def site_densities(profile: ShockProfile, xs: Sequence[int], lat: Lattice) -> np.ndarray:
    """
    Site marginals of the shock measure: rho*_i at x_i, rho_i strictly
    between x_i and x_{i+1} (rho_0 left of the first shock).
    """
    xs = DualStateIndex(lat, profile.N).check_positions(xs)
    sites = lat.sites
    # number of shocks at or left of each site
    passed = np.searchsorted(np.asarray(xs), sites, side="right")
    densities = np.asarray(profile.bulk_densities)[passed]
    for i, x in enumerate(xs):
        densities[x - lat.l_minus] = profile.shock_densities[i]
    return densities


@dataclass(frozen=True)
class ShockMeasure:
    """A Bernoulli shock measure as a dense vector over 2^L configurations."""
    profile: ShockProfile
    positions: Tuple[int, ...]
    vector: np.ndarray

    @property
    def marginals(self) -> np.ndarray:
        return site_marginals(self.vector, Lattice.of_length(int(np.log2(self.vector.size))))


def shock_measure_vector(profile: ShockProfile, xs: Sequence[int], lat: Lattice) -> ShockMeasure:
    """
    Product vector of the shock measure with shocks at xs.

    Raises:
        ParameterValidationError: If xs is not admissible for the profile
    """
    densities = site_densities(profile, xs, lat)
    vector = kron_vector([TwoVector.from_density(float(rho)) for rho in densities])
    return ShockMeasure(profile, tuple(int(x) for x in xs), vector)


@dataclass(frozen=True)
class DualityMatrix:
    """
    Duality matrices with rows indexed by dual states in rank order.

    S holds the shock measures; R = diag(pi) S with pi the reversible
    measure scaled so that its largest weight is 1, so each row of R sums
    to pi(x) and no row of R shrinks as the number of dual states grows.
    """
    R: np.ndarray
    S: np.ndarray
    pi: np.ndarray
    states: np.ndarray
    shock_rates: ShockRates


def build_duality_matrices(
    profile: ShockProfile,
    rates: Rates,
    lat: Lattice,
    threads: Optional[int] = None,
) -> DualityMatrix:
    """
    Stack the shock measures of all dual states into S and weight them into R.

    Args:
        profile: Stable shock profile
        rates: ASEP rates, used for the shock hopping rates
        lat: Lattice
        threads: Row assembly workers, defaults to settings.THREADS

    Raises:
        ResourceCapError: If L exceeds MAX_DUALITY_SITES or the memory cap
    """
    ensure_sites(lat.length, settings.MAX_DUALITY_SITES, "Duality matrix assembly")
    index = DualStateIndex(lat, profile.N)
    ensure_memory(dense_matrix_estimate(2 * index.size, lat.n_configs))

    sr = shock_rates(profile, rates)
    states = index.all_states()
    threads = threads or settings.THREADS

    def row(xs: np.ndarray) -> np.ndarray:
        return shock_measure_vector(profile, xs, lat).vector

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, states))
    else:
        rows = [row(xs) for xs in states]

    S = np.vstack(rows)
    weights = reversible_weights(sr, lat)
    # largest weight 1 so rows of R stay O(1) as C(L, N) grows
    pi = weights / weights.max()
    R = pi[:, None] * S
    logger.debug(f"Built duality matrices of shape {S.shape} for N = {profile.N}")
    return DualityMatrix(R=R, S=S, pi=pi, states=states, shock_rates=sr)


def site_marginals(vector: np.ndarray, lat: Lattice) -> np.ndarray:
    """Densities <eta_k> of a measure by summation over configurations."""
    return np.asarray(vector, dtype=float) @ occupation_table(lat)


def site_correlations(vector: np.ndarray, lat: Lattice) -> np.ndarray:
    """Connected correlations <eta_j eta_k> - <eta_j><eta_k>, shape (L, L)."""
    occ = occupation_table(lat).astype(float)
    vector = np.asarray(vector, dtype=float)
    means = vector @ occ
    second = occ.T @ (vector[:, None] * occ)
    return second - np.outer(means, means)


def blocking_measure(rates: Rates, lat: Lattice) -> np.ndarray:
    """
    Zero-current product measure with fugacities (alpha / gamma) q^{2(k - L-)},
    the N = L member of the shock family.
    """
    ratio = rates.alpha / rates.gamma
    offsets = np.arange(lat.length)
    z = ratio * rates.q ** (2.0 * offsets)
    return kron_vector([TwoVector.from_fugacity(float(value)) for value in z])


def shock_measure_frame(measure: ShockMeasure) -> pd.DataFrame:
    return pd.DataFrame({
        "config_index": np.arange(measure.vector.size),
        "probability": measure.vector,
    })


def export_shock_measure_csv(measure: ShockMeasure, path: Union[str, Path]) -> Path:
    """Write (config_index, probability) rows of a shock measure to CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    shock_measure_frame(measure).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote shock measure at {measure.positions} to {path}")
    return path
