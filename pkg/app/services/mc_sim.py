"""
Continuous-time Monte Carlo for the open ASEP and the shock exclusion process.

Single trajectories enumerate the allowed moves of the current state on the
fly. Ensembles run vectorized over many trajectories at once using the
off-diagonal rows of the generator as a transition table. Every ensemble is
split into chunks of settings.MC_CHUNK_SIZE trajectories, each with its own
Philox stream spawned from the run seed, so results do not depend on the
number of worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from app.core.config import settings
from app.core.exceptions import ParameterValidationError
from app.services.asep_open import ManifoldSpec, Rates, build_W, manifold_residuals
from app.services.duality_lab.duality import evolved_density_profile
from app.services.lattice_core import Lattice, SparseGenerator, config_index, expm_action, index_config
from app.services.shock_measures import ShockMeasure, site_densities
from app.services.shock_walk import (
    DualStateIndex,
    ShockProfile,
    ShockRates,
    reversible_weights,
    shock_exclusion_generator,
    shock_rates,
)

logger = logging.getLogger(__name__)

BONFERRONI_NOTE = (
    "max |z| is taken over all reported entries without multiplicity correction; "
    "the fixed threshold absorbs a Bonferroni factor of the entry count at desk scale"
)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for one trajectory or one ensemble chunk."""
    return np.random.Generator(np.random.Philox(seed))


def chunk_streams(seed: int, n_traj: int, chunk_size: Optional[int] = None) -> List[Tuple[int, np.random.Generator]]:
    """(chunk size, generator) pairs covering n_traj trajectories."""
    chunk_size = chunk_size or settings.MC_CHUNK_SIZE
    sizes = [chunk_size] * (n_traj // chunk_size)
    if n_traj % chunk_size:
        sizes.append(n_traj % chunk_size)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(size, np.random.Generator(np.random.Philox(child))) for size, child in zip(sizes, children)]


class MoveKind(str, Enum):
    HOP_RIGHT = "hop_right"
    HOP_LEFT = "hop_left"
    INJECT_LEFT = "inject_left"
    EXTRACT_LEFT = "extract_left"
    INJECT_RIGHT = "inject_right"
    EXTRACT_RIGHT = "extract_right"
    SHOCK_LEFT = "shock_left"
    SHOCK_RIGHT = "shock_right"


@dataclass(frozen=True)
class Move:
    """A single transition; site is the lattice site, or the shock label for shock moves."""
    kind: MoveKind
    site: int

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.site}"


@dataclass
class Trajectory:
    """
    One simulated path.

    occupation_time holds per-site integrals of eta_k for the ASEP and the
    time spent in each dual state (rank order) for the shock process.
    """
    seed: int
    t_end: float
    initial_state: Tuple[int, ...]
    final_state: Tuple[int, ...]
    events: List[Tuple[float, str]] = field(default_factory=list)
    n_events: int = 0
    occupation_time: Optional[np.ndarray] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.events])

    @property
    def moves(self) -> List[str]:
        return [move for _, move in self.events]


def write_event_log(trajectory: Trajectory, path: Union[str, Path]) -> Path:
    """Line-delimited event log, one 'time<TAB>move' line per event."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for t, move in trajectory.events:
            handle.write(f"{t:.17g}\t{move}\n")
    logger.info(f"Wrote {len(trajectory.events)} events to {path}")
    return path


def asep_moves(state: int, rates: Rates, lat: Lattice) -> List[Tuple[Move, float, int]]:
    """Allowed moves out of a configuration index as (move, rate, target) triples."""
    moves = []
    left_bit = 1 << lat.bit_shift(lat.l_minus)
    if state & left_bit:
        moves.append((Move(MoveKind.EXTRACT_LEFT, lat.l_minus), rates.gamma, state ^ left_bit))
    else:
        moves.append((Move(MoveKind.INJECT_LEFT, lat.l_minus), rates.alpha, state ^ left_bit))

    for k in range(lat.l_minus, lat.l_plus):
        here, there = 1 << lat.bit_shift(k), 1 << lat.bit_shift(k + 1)
        occupied_here, occupied_there = bool(state & here), bool(state & there)
        if occupied_here and not occupied_there:
            moves.append((Move(MoveKind.HOP_RIGHT, k), rates.r, state ^ here ^ there))
        elif occupied_there and not occupied_here:
            moves.append((Move(MoveKind.HOP_LEFT, k + 1), rates.ell, state ^ here ^ there))

    right_bit = 1 << lat.bit_shift(lat.l_plus)
    if state & right_bit:
        moves.append((Move(MoveKind.EXTRACT_RIGHT, lat.l_plus), rates.beta, state ^ right_bit))
    else:
        moves.append((Move(MoveKind.INJECT_RIGHT, lat.l_plus), rates.delta, state ^ right_bit))
    return moves


def shock_moves(xs: Tuple[int, ...], sr: ShockRates, lat: Lattice) -> List[Tuple[Move, float, Tuple[int, ...]]]:
    """Allowed shock hops out of a position vector; walls and neighbours block."""
    padded = (lat.l_minus - 1,) + tuple(xs) + (lat.l_plus + 1,)
    moves = []
    for i in range(1, len(xs) + 1):
        if padded[i] - 1 != padded[i - 1]:
            target = xs[:i - 1] + (xs[i - 1] - 1,) + xs[i:]
            moves.append((Move(MoveKind.SHOCK_LEFT, i), sr.d_l[i - 1], target))
        if padded[i] + 1 != padded[i + 1]:
            target = xs[:i - 1] + (xs[i - 1] + 1,) + xs[i:]
            moves.append((Move(MoveKind.SHOCK_RIGHT, i), sr.d_r[i - 1], target))
    return moves


def _run_direct(
    state: Any,
    enumerate_moves: Callable[[Any], List[Tuple[Move, float, Any]]],
    t_end: float,
    rng: np.random.Generator,
    record_events: bool,
    accumulate: Callable[[Any, float], None],
) -> Tuple[Any, List[Tuple[float, str]], int]:
    t = 0.0
    events = []
    n_events = 0
    while True:
        moves = enumerate_moves(state)
        total = sum(rate for _, rate, _ in moves)
        if total <= 0.0:
            accumulate(state, t_end - t)
            break
        tau = rng.standard_exponential() / total
        if t + tau > t_end:
            accumulate(state, t_end - t)
            break
        accumulate(state, tau)
        t += tau

        target = rng.random() * total
        cumulative = 0.0
        chosen = moves[-1]
        for move in moves:
            cumulative += move[1]
            if target < cumulative:
                chosen = move
                break
        state = chosen[2]
        n_events += 1
        if record_events:
            events.append((t, str(chosen[0])))
    return state, events, n_events


def _check_horizon(t_end: float) -> None:
    if not t_end >= 0:
        raise ParameterValidationError(f"t_end = {t_end} must be nonnegative", field_name="t_end")


def sample_configuration(
    densities: Sequence[float],
    lat: Lattice,
    rng: np.random.Generator,
    size: Optional[int] = None,
) -> Union[int, np.ndarray]:
    """Configuration indices drawn site by site from independent Bernoulli densities."""
    densities = np.asarray(densities, dtype=float)
    weights = np.int64(1) << np.arange(lat.length - 1, -1, -1, dtype=np.int64)
    n = 1 if size is None else size
    bits = (rng.random((n, lat.length)) < densities[None, :]).astype(np.int64)
    indices = bits @ weights
    return int(indices[0]) if size is None else indices


def gillespie_asep(
    rates: Rates,
    lat: Lattice,
    init: Union[Sequence[int], ShockMeasure],
    t_end: float,
    seed: int,
    record_events: bool = True,
) -> Trajectory:
    """
    Exact trajectory of the open ASEP by the direct method.

    Args:
        rates: ASEP rates
        lat: Lattice
        init: Occupation numbers in site order, or a shock measure to sample from
        t_end: Time horizon
        seed: 64-bit seed; the same seed reproduces the same trajectory
        record_events: Keep the (time, move) list

    Raises:
        ParameterValidationError: If t_end < 0 or init has the wrong length
    """
    _check_horizon(t_end)
    rng = make_rng(seed)
    if isinstance(init, ShockMeasure):
        densities = site_densities(init.profile, init.positions, lat)
        state = sample_configuration(densities, lat, rng)
    else:
        if len(init) != lat.length:
            raise ParameterValidationError(
                f"Initial configuration has {len(init)} sites, lattice has {lat.length}",
                field_name="init",
            )
        state = config_index(init)
    initial = index_config(state, lat.length)

    occupation = np.zeros(lat.length)

    def accumulate(current: int, dt: float) -> None:
        occupation[:] += dt * np.asarray(index_config(current, lat.length))

    final, events, n_events = _run_direct(
        state, lambda s: asep_moves(s, rates, lat), t_end, rng, record_events, accumulate
    )
    return Trajectory(
        seed=seed,
        t_end=t_end,
        initial_state=initial,
        final_state=index_config(final, lat.length),
        events=events,
        n_events=n_events,
        occupation_time=occupation,
    )


def gillespie_shock(
    profile: ShockProfile,
    rates: Rates,
    lat: Lattice,
    init: Sequence[int],
    t_end: float,
    seed: int,
    record_events: bool = True,
) -> Trajectory:
    """
    Exact trajectory of the shock exclusion process.

    Raises:
        ParameterValidationError: If t_end < 0 or the positions are inadmissible
    """
    _check_horizon(t_end)
    index = DualStateIndex(lat, profile.N)
    xs = index.check_positions(init)
    sr = shock_rates(profile, rates)
    rng = make_rng(seed)
    occupation = np.zeros(index.size)

    def accumulate(current: Tuple[int, ...], dt: float) -> None:
        occupation[index.rank(current)] += dt

    final, events, n_events = _run_direct(
        xs, lambda s: shock_moves(s, sr, lat), t_end, rng, record_events, accumulate
    )
    return Trajectory(
        seed=seed,
        t_end=t_end,
        initial_state=xs,
        final_state=tuple(final),
        events=events,
        n_events=n_events,
        occupation_time=occupation,
    )


@dataclass(frozen=True)
class TransitionTable:
    """Off-diagonal CSR rows of an intensity matrix with running rate sums."""
    indptr: np.ndarray
    targets: np.ndarray
    cumulative: np.ndarray
    exit_rates: np.ndarray

    @classmethod
    def from_generator(cls, G: SparseGenerator) -> "TransitionTable":
        matrix = G.to_intensity().matrix
        off = (matrix - sp.diags(matrix.diagonal())).tocsr()
        off.eliminate_zeros()
        off.sort_indices()
        cumulative = np.cumsum(off.data)
        starts = np.concatenate([[0.0], cumulative])[off.indptr]
        exit_rates = starts[1:] - starts[:-1]
        return cls(off.indptr.copy(), off.indices.copy(), cumulative, exit_rates)

    def step(self, states: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Next states given uniforms u in [0, 1)."""
        lo = self.indptr[states]
        hi = self.indptr[states + 1]
        base = np.where(lo > 0, self.cumulative[np.maximum(lo - 1, 0)], 0.0)
        position = np.searchsorted(self.cumulative, base + u * self.exit_rates[states], side="right")
        position = np.clip(position, lo, hi - 1)
        return self.targets[position]


def _evolve_chunk(
    table: TransitionTable,
    states: np.ndarray,
    t_end: float,
    rng: np.random.Generator,
) -> np.ndarray:
    states = states.copy()
    t = np.zeros(states.size)
    active = np.ones(states.size, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        exit_rates = table.exit_rates[states[idx]]
        draws = rng.standard_exponential(idx.size)
        with np.errstate(divide="ignore"):
            tau = np.where(exit_rates > 0, draws / exit_rates, np.inf)
        t_new = t[idx] + tau
        done = t_new > t_end
        active[idx[done]] = False
        moving = idx[~done]
        if moving.size == 0:
            break
        t[moving] = t_new[~done]
        states[moving] = table.step(states[moving], rng.random(moving.size))
    return states


def _run_chunks(
    worker: Callable[[int, np.random.Generator], np.ndarray],
    n_traj: int,
    seed: int,
    threads: Optional[int],
) -> np.ndarray:
    streams = chunk_streams(seed, n_traj)
    threads = threads or settings.THREADS
    if threads > 1 and len(streams) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda stream: worker(*stream), streams))
    else:
        parts = [worker(size, rng) for size, rng in streams]
    return np.concatenate(parts)


def simulate_asep_ensemble(
    rates: Rates,
    lat: Lattice,
    t_end: float,
    n_traj: int,
    seed: int,
    init_densities: Optional[Sequence[float]] = None,
    init_state: Optional[int] = None,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Final configuration indices of n_traj independent ASEP trajectories.

    Initial states are either the fixed index init_state or drawn from the
    product measure with init_densities.

    Raises:
        ParameterValidationError: If neither or both initial conditions are given
    """
    _check_horizon(t_end)
    if (init_densities is None) == (init_state is None):
        raise ParameterValidationError(
            "Give exactly one of init_densities and init_state", field_name="init"
        )
    table = TransitionTable.from_generator(build_W(rates, lat))

    def worker(size: int, rng: np.random.Generator) -> np.ndarray:
        if init_state is not None:
            start = np.full(size, int(init_state), dtype=np.int64)
        else:
            start = sample_configuration(init_densities, lat, rng, size=size)
        return _evolve_chunk(table, start, t_end, rng)

    finals = _run_chunks(worker, n_traj, seed, threads)
    logger.debug(f"Simulated {n_traj} ASEP trajectories up to t = {t_end}")
    return finals


def simulate_shock_ensemble(
    profile: ShockProfile,
    rates: Rates,
    lat: Lattice,
    x0: Sequence[int],
    t_end: float,
    n_traj: int,
    seed: int,
    threads: Optional[int] = None,
) -> np.ndarray:
    """Final dual-state ranks of n_traj shock exclusion trajectories started at x0."""
    _check_horizon(t_end)
    index = DualStateIndex(lat, profile.N)
    start = index.rank(x0)
    table = TransitionTable.from_generator(shock_exclusion_generator(shock_rates(profile, rates), lat))

    def worker(size: int, rng: np.random.Generator) -> np.ndarray:
        return _evolve_chunk(table, np.full(size, start, dtype=np.int64), t_end, rng)

    return _run_chunks(worker, n_traj, seed, threads)


def _z_scores(empirical: np.ndarray, exact: np.ndarray, se: np.ndarray) -> np.ndarray:
    gap = empirical - exact
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, gap / se, np.where(np.abs(gap) > 0, np.inf, 0.0))
    return z


@dataclass
class EnsembleStats:
    """Empirical averages of an ensemble with standard errors and z-scores."""
    n_traj: int
    t: float
    sites: np.ndarray
    densities: np.ndarray
    std_errors: np.ndarray
    reference: Optional[np.ndarray] = None
    z_scores: Optional[np.ndarray] = None
    histogram: Optional[np.ndarray] = None
    histogram_se: Optional[np.ndarray] = None
    histogram_reference: Optional[np.ndarray] = None
    histogram_z: Optional[np.ndarray] = None
    exploratory: bool = False
    threshold: float = field(default_factory=lambda: settings.Z_SCORE_THRESHOLD)
    notes: List[str] = field(default_factory=lambda: [BONFERRONI_NOTE])

    @property
    def max_abs_z(self) -> Optional[float]:
        parts = [np.abs(z) for z in (self.z_scores, self.histogram_z) if z is not None]
        if not parts:
            return None
        return float(max(part.max() for part in parts))

    @property
    def passed(self) -> Optional[bool]:
        if self.exploratory or self.max_abs_z is None:
            return None
        return self.max_abs_z < self.threshold

    def density_frame(self) -> pd.DataFrame:
        """Long-format per-site table."""
        frame = pd.DataFrame({
            "t": self.t,
            "site": self.sites,
            "empirical": self.densities,
            "std_error": self.std_errors,
        })
        if self.reference is not None:
            frame["exact"] = self.reference
            frame["z"] = self.z_scores
        return frame

    def to_dict(self) -> Dict[str, Any]:
        def listed(value):
            return None if value is None else np.asarray(value).tolist()

        return {
            "n_traj": self.n_traj,
            "t": self.t,
            "sites": listed(self.sites),
            "densities": listed(self.densities),
            "std_errors": listed(self.std_errors),
            "reference": listed(self.reference),
            "z_scores": listed(self.z_scores),
            "histogram": listed(self.histogram),
            "histogram_se": listed(self.histogram_se),
            "histogram_reference": listed(self.histogram_reference),
            "histogram_z": listed(self.histogram_z),
            "max_abs_z": self.max_abs_z,
            "threshold": self.threshold,
            "passed": self.passed,
            "exploratory": self.exploratory,
            "notes": self.notes,
        }


def occupations_of(states: np.ndarray, lat: Lattice) -> np.ndarray:
    shifts = np.arange(lat.length - 1, -1, -1, dtype=np.int64)
    return ((states[:, None] >> shifts[None, :]) & 1).astype(float)


def compare_empirical_exact(
    rates: Rates,
    lat: Lattice,
    profile: ShockProfile,
    x0: Sequence[int],
    t: float,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> EnsembleStats:
    """
    Per-site densities at time t of ASEP trajectories started from mu^{x0},
    against the exact profile obtained through the dual process.

    Off B_N^1 the dual reference is not exact and the result is flagged
    exploratory; z-scores are still reported.
    """
    n_traj = n_traj or settings.DEFAULT_N_TRAJ
    seed = settings.DEFAULT_SEED if seed is None else seed
    densities0 = site_densities(profile, x0, lat)
    finals = simulate_asep_ensemble(
        rates, lat, t, n_traj, seed, init_densities=densities0, threads=threads
    )
    occ = occupations_of(finals, lat)
    means = occ.mean(axis=0)
    se = occ.std(axis=0, ddof=1) / math.sqrt(n_traj)

    on_manifold = manifold_residuals(rates, ManifoldSpec(N=profile.N, M=1)).on_B_NM()
    if not on_manifold:
        logger.warning(
            "Monte Carlo comparison off B_N^1 is exploratory; no exact reference is claimed",
            extra={"N": profile.N},
        )
    reference = evolved_density_profile(rates, lat, profile, x0, t)
    z = _z_scores(means, reference, se)
    stats = EnsembleStats(
        n_traj=n_traj,
        t=t,
        sites=lat.sites,
        densities=means,
        std_errors=se,
        reference=reference,
        z_scores=z,
        exploratory=not on_manifold,
    )
    logger.info(f"Empirical vs exact densities at t = {t}: max |z| = {stats.max_abs_z:.2f}")
    return stats


def shock_stationary_histogram(
    profile: ShockProfile,
    rates: Rates,
    lat: Lattice,
    x0: Sequence[int],
    t_end: float,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> EnsembleStats:
    """
    Histogram of dual states after a long run against the reversible measure.

    Entries are in rank order; for N = 1 the mean shock position per site is
    also reported in the densities column.
    """
    n_traj = n_traj or settings.DEFAULT_N_TRAJ
    seed = settings.DEFAULT_SEED if seed is None else seed
    index = DualStateIndex(lat, profile.N)
    finals = simulate_shock_ensemble(profile, rates, lat, x0, t_end, n_traj, seed, threads)

    counts = np.bincount(finals, minlength=index.size).astype(float)
    histogram = counts / n_traj
    exact = reversible_weights(shock_rates(profile, rates), lat)
    se_exact = np.sqrt(exact * (1.0 - exact) / n_traj)
    se_empirical = np.sqrt(histogram * (1.0 - histogram) / n_traj)

    states = index.all_states()
    occupied = np.zeros((n_traj, lat.length))
    positions = states[finals] - lat.l_minus
    np.put_along_axis(occupied, positions, 1.0, axis=1)
    means = occupied.mean(axis=0)

    return EnsembleStats(
        n_traj=n_traj,
        t=t_end,
        sites=lat.sites,
        densities=means,
        std_errors=occupied.std(axis=0, ddof=1) / math.sqrt(n_traj),
        histogram=histogram,
        histogram_se=se_empirical,
        histogram_reference=exact,
        histogram_z=_z_scores(histogram, exact, se_exact),
    )


@dataclass
class OccupationRatios:
    """Neighbouring dual-state occupation ratios from batch means of one long run."""
    pairs: List[Tuple[Tuple[int, ...], Tuple[int, ...]]]
    empirical: np.ndarray
    std_errors: np.ndarray
    exact: np.ndarray
    z_scores: np.ndarray
    n_batches: int

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores))) if self.z_scores.size else 0.0


def shock_occupation_ratios(
    profile: ShockProfile,
    rates: Rates,
    lat: Lattice,
    x0: Sequence[int],
    t_end: float,
    seed: Optional[int] = None,
    n_batches: int = 50,
) -> OccupationRatios:
    """
    Time-integrated occupation of neighbouring dual states, one long run.

    The run is cut into n_batches equal time windows; the ratio occ(y) / occ(x)
    is averaged over windows and compared with pi(y) / pi(x).

    Raises:
        ParameterValidationError: If n_batches < 2
    """
    if n_batches < 2:
        raise ParameterValidationError("At least two batches are needed", field_name="n_batches")
    seed = settings.DEFAULT_SEED if seed is None else seed
    index = DualStateIndex(lat, profile.N)
    sr = shock_rates(profile, rates)
    window = t_end / n_batches

    occupation = np.zeros((n_batches, index.size))
    state = index.check_positions(x0)
    for batch in range(n_batches):
        traj = gillespie_shock(
            profile, rates, lat, state, window, seed + batch, record_events=False
        )
        occupation[batch] = traj.occupation_time
        state = traj.final_state

    Q = shock_exclusion_generator(sr, lat).matrix.tocoo()
    pi = reversible_weights(sr, lat)
    pairs, rows, cols = [], [], []
    for a, b in zip(Q.row, Q.col):
        if a < b:
            pairs.append((index.unrank(int(a)), index.unrank(int(b))))
            rows.append(a)
            cols.append(b)
    rows, cols = np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)

    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = occupation[:, cols] / occupation[:, rows]
    ratios[~np.isfinite(ratios)] = np.nan
    counts = np.sum(np.isfinite(ratios), axis=0)
    empirical = np.nanmean(ratios, axis=0)
    se = np.nanstd(ratios, axis=0, ddof=1) / np.sqrt(counts)
    exact = pi[cols] / pi[rows]
    return OccupationRatios(
        pairs=pairs,
        empirical=empirical,
        std_errors=se,
        exact=exact,
        z_scores=_z_scores(empirical, exact, se),
        n_batches=n_batches,
    )


@dataclass
class TransitionFrequencies:
    """Fixed-horizon empirical transition frequencies against exp(W t)."""
    t: float
    n_traj: int
    empirical: np.ndarray
    std_errors: np.ndarray
    exact: np.ndarray

    @property
    def z_scores(self) -> np.ndarray:
        se = np.sqrt(self.exact * (1.0 - self.exact) / self.n_traj)
        return _z_scores(self.empirical, self.exact, se)

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))


def empirical_transition_matrix(
    rates: Rates,
    lat: Lattice,
    t: float,
    n_traj: Optional[int] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
) -> TransitionFrequencies:
    """
    Empirical P(eta(t) = b | eta(0) = a) for every start a, n_traj runs each.

    Start a uses the seed seed + a.
    """
    n_traj = n_traj or settings.DEFAULT_N_TRAJ
    seed = settings.DEFAULT_SEED if seed is None else seed
    dim = lat.n_configs
    empirical = np.zeros((dim, dim))
    for a in range(dim):
        finals = simulate_asep_ensemble(
            rates, lat, t, n_traj, seed + a, init_state=a, threads=threads
        )
        empirical[a] = np.bincount(finals, minlength=dim) / n_traj
    exact = expm_action(build_W(rates, lat), np.eye(dim), t).T
    return TransitionFrequencies(
        t=t,
        n_traj=n_traj,
        empirical=empirical,
        std_errors=np.sqrt(empirical * (1.0 - empirical) / n_traj),
        exact=exact,
    )
