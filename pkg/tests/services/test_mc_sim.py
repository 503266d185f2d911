"""
Tests for the continuous-time Monte Carlo engines.

Statistical comparisons run with a fixed seed and are marked slow.
"""

from unittest.mock import patch

import numpy as np
import pytest

from app.core.config import settings
from app.core.exceptions import ParameterValidationError
from app.services.asep_open import build_W
from app.services.lattice_core import Lattice, config_index
from app.services.mc_sim import (
    Move,
    MoveKind,
    TransitionTable,
    asep_moves,
    chunk_streams,
    compare_empirical_exact,
    empirical_transition_matrix,
    gillespie_asep,
    gillespie_shock,
    shock_moves,
    shock_occupation_ratios,
    shock_stationary_histogram,
    simulate_asep_ensemble,
    simulate_shock_ensemble,
    write_event_log,
)
from app.services.shock_measures import boundary_shock_profile, shock_measure_vector
from app.services.shock_walk import shock_rates


class TestStreams:
    def test_chunk_sizes(self):
        streams = chunk_streams(11, 25, chunk_size=10)
        assert [size for size, _ in streams] == [10, 10, 5]

    def test_streams_reproducible(self):
        first = [rng.random() for _, rng in chunk_streams(5, 30, chunk_size=10)]
        second = [rng.random() for _, rng in chunk_streams(5, 30, chunk_size=10)]
        assert first == second
        assert len(set(first)) == 3


class TestMoves:
    """Test suite for move enumeration."""

    def test_asep_moves_from_empty_lattice(self, demo_rates, lattice3):
        moves = asep_moves(0, demo_rates, lattice3)
        kinds = {move.kind for move, _, _ in moves}
        assert kinds == {MoveKind.INJECT_LEFT, MoveKind.INJECT_RIGHT}

    def test_asep_moves_match_generator(self, demo_rates, lattice4):
        W = build_W(demo_rates, lattice4).toarray()
        for state in range(lattice4.n_configs):
            row = np.zeros(lattice4.n_configs)
            for _, rate, target in asep_moves(state, demo_rates, lattice4):
                row[target] += rate
            row[state] = -row.sum()
            assert row == pytest.approx(W[state])

    def test_shock_moves_respect_walls(self, demo_rates, demo_profile, lattice4):
        sr = shock_rates(demo_profile, demo_rates)
        moves = shock_moves((1,), sr, lattice4)
        assert [(move.kind, target) for move, _, target in moves] == [(MoveKind.SHOCK_RIGHT, (2,))]

    def test_move_label(self):
        assert str(Move(MoveKind.HOP_LEFT, 3)) == "hop_left:3"


class TestTrajectories:
    """Test suite for single direct-method trajectories."""

    def test_same_seed_same_path(self, demo_rates, lattice4):
        first = gillespie_asep(demo_rates, lattice4, (0, 1, 0, 1), 5.0, seed=42)
        second = gillespie_asep(demo_rates, lattice4, (0, 1, 0, 1), 5.0, seed=42)
        assert first.events == second.events
        assert first.final_state == second.final_state
        assert first.n_events == len(first.events) > 0

    def test_time_rescaling(self, demo_rates, lattice4):
        base = gillespie_asep(demo_rates, lattice4, (1, 0, 0, 1), 4.0, seed=3)
        fast = gillespie_asep(demo_rates.scaled(2.0), lattice4, (1, 0, 0, 1), 2.0, seed=3)
        assert fast.moves == base.moves
        assert fast.times == pytest.approx(base.times / 2.0)

    def test_occupation_integrals(self, demo_rates, lattice3):
        traj = gillespie_asep(demo_rates, lattice3, (1, 1, 1), 3.0, seed=9, record_events=False)
        assert traj.events == []
        assert np.all(traj.occupation_time >= 0.0)
        assert np.all(traj.occupation_time <= 3.0 + 1e-12)

    def test_initial_state_from_shock_measure(self, demo_rates, demo_profile, lattice4):
        measure = shock_measure_vector(demo_profile, (2,), lattice4)
        traj = gillespie_asep(demo_rates, lattice4, measure, 0.0, seed=1)
        assert traj.n_events == 0
        assert traj.final_state == traj.initial_state

    def test_wrong_initial_length(self, demo_rates, lattice4):
        with pytest.raises(ParameterValidationError):
            gillespie_asep(demo_rates, lattice4, (0, 1), 1.0, seed=1)

    def test_negative_horizon(self, demo_rates, lattice4):
        with pytest.raises(ParameterValidationError):
            gillespie_asep(demo_rates, lattice4, (0, 0, 0, 0), -1.0, seed=1)

    def test_shock_trajectory_stays_on_lattice(self, demo_rates, demo_profile, lattice4):
        traj = gillespie_shock(demo_profile, demo_rates, lattice4, (2,), 20.0, seed=5)
        assert lattice4.contains(traj.final_state[0])
        assert traj.occupation_time.sum() == pytest.approx(20.0)

    def test_event_log(self, demo_rates, lattice3, tmp_path):
        traj = gillespie_asep(demo_rates, lattice3, (0, 0, 0), 2.0, seed=8)
        path = write_event_log(traj, tmp_path / "events.tsv")
        lines = path.read_text().splitlines()
        assert len(lines) == traj.n_events
        if lines:
            time, move = lines[0].split("\t")
            assert float(time) == pytest.approx(traj.times[0])
            assert move == traj.moves[0]


class TestEnsembles:
    """Test suite for vectorized ensembles."""

    def test_transition_table_targets(self, demo_rates, lattice3):
        W = build_W(demo_rates, lattice3)
        table = TransitionTable.from_generator(W)
        assert table.exit_rates == pytest.approx(-W.matrix.diagonal())
        states = np.arange(lattice3.n_configs)
        dense = W.toarray()
        for u in (0.0, 0.5, 0.999999):
            targets = table.step(states, np.full(states.size, u))
            assert np.all(dense[states, targets] > 0)

    def test_thread_count_does_not_change_results(self, demo_rates, lattice4):
        with patch.object(settings, "MC_CHUNK_SIZE", 100):
            single = simulate_asep_ensemble(demo_rates, lattice4, 1.0, 450, seed=17, init_state=5, threads=1)
            pooled = simulate_asep_ensemble(demo_rates, lattice4, 1.0, 450, seed=17, init_state=5, threads=4)
        assert np.array_equal(single, pooled)

    def test_needs_one_initial_condition(self, demo_rates, lattice4):
        with pytest.raises(ParameterValidationError):
            simulate_asep_ensemble(demo_rates, lattice4, 1.0, 10, seed=1)

    def test_zero_horizon_keeps_start(self, demo_rates, demo_profile, lattice4):
        finals = simulate_shock_ensemble(demo_profile, demo_rates, lattice4, (3,), 0.0, 50, seed=2)
        assert np.all(finals == 2)
        start = config_index((1, 0, 1, 0))
        assert np.all(simulate_asep_ensemble(demo_rates, lattice4, 0.0, 20, seed=2, init_state=start) == start)


@pytest.mark.slow
class TestStatisticalAgreement:
    """Fixed-seed comparisons of Monte Carlo estimates with exact results."""

    def test_densities_from_shock_measure(self, demo_rates, demo_profile, lattice4):
        stats = compare_empirical_exact(demo_rates, lattice4, demo_profile, (2,), 1.0, n_traj=40_000, seed=11)
        assert not stats.exploratory
        assert stats.passed
        assert stats.density_frame().shape[0] == 4

    def test_off_manifold_is_exploratory(self, off_manifold_rates, lattice4):
        profile = boundary_shock_profile(off_manifold_rates, 1)
        stats = compare_empirical_exact(off_manifold_rates, lattice4, profile, (2,), 0.5, n_traj=2_000, seed=11)
        assert stats.exploratory
        assert stats.passed is None

    def test_shock_histogram_approaches_reversible_measure(self, demo_rates, demo_profile, lattice4):
        stats = shock_stationary_histogram(demo_profile, demo_rates, lattice4, (1,), 60.0, n_traj=40_000, seed=23)
        assert stats.histogram.sum() == pytest.approx(1.0)
        assert stats.passed

    def test_occupation_ratios(self, demo_rates, demo_profile, lattice4):
        ratios = shock_occupation_ratios(demo_profile, demo_rates, lattice4, (2,), 20_000.0, seed=31)
        assert len(ratios.pairs) == 3
        assert ratios.exact == pytest.approx([9 / 8] * 3)
        assert ratios.max_abs_z < settings.Z_SCORE_THRESHOLD

    def test_transition_frequencies(self, demo_rates):
        frequencies = empirical_transition_matrix(demo_rates, Lattice(1, 2), 0.8, n_traj=20_000, seed=41)
        assert frequencies.empirical.sum(axis=1) == pytest.approx(np.ones(4))
        assert frequencies.max_abs_z < settings.Z_SCORE_THRESHOLD
