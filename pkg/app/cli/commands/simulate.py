"""
simulate: Monte Carlo ensembles compared against the exact evolution.
"""

import logging
from typing import Optional

import click
import pandas as pd

from app.cli.context import RunContext
from app.cli.error_handling import handle_errors
from app.core.config import settings
from app.schemas.experiment import ExperimentKind
from app.services.mc_sim import (
    compare_empirical_exact,
    gillespie_asep,
    shock_stationary_histogram,
    write_event_log,
)
from app.services.shock_measures import shock_measure_vector

logger = logging.getLogger(__name__)


@click.command("simulate")
@click.option(
    "--stationary-time",
    type=float,
    default=None,
    help="Also run the shock process up to this time (units of 1/w) and compare its histogram with pi",
)
@click.pass_obj
@handle_errors
def simulate(run: RunContext, stationary_time: Optional[float]):
    """Empirical densities of ASEP ensembles started from a shock measure."""
    resolved = run.resolve(ExperimentKind.SIMULATE)
    lat, rates, profile = resolved.lattice, resolved.rates, resolved.profile
    threshold = run.tolerance(resolved, "z_score", settings.Z_SCORE_THRESHOLD)
    n_traj = resolved.config.experiment.n_traj
    writer = run.writer(resolved)

    frames, max_z, exploratory = [], [], False
    for step, t in enumerate(resolved.t_values):
        stats = compare_empirical_exact(
            rates, lat, profile, resolved.positions, t, n_traj, resolved.seed + step, run.threads
        )
        frames.append(stats.density_frame())
        max_z.append(stats.max_abs_z)
        exploratory = exploratory or stats.exploratory
    writer.csv("simulate_densities.csv", pd.concat(frames, ignore_index=True) if frames else pd.DataFrame())

    results = {
        "n_traj": n_traj,
        "max_abs_z": max(max_z) if max_z else None,
        "threshold": threshold,
        "exploratory": exploratory,
        "passed": None if exploratory or not max_z else max(max_z) < threshold,
    }

    if stationary_time is not None:
        histogram = shock_stationary_histogram(
            profile, rates, lat, resolved.positions, stationary_time / rates.w, n_traj, resolved.seed, run.threads
        )
        writer.csv("simulate_shock_histogram.csv", pd.DataFrame({
            "rank": range(len(histogram.histogram)),
            "empirical": histogram.histogram,
            "std_error": histogram.histogram_se,
            "pi": histogram.histogram_reference,
            "z": histogram.histogram_z,
        }))
        results["histogram_max_abs_z"] = histogram.max_abs_z

    if resolved.config.experiment.record_events and resolved.t_values:
        measure = shock_measure_vector(profile, resolved.positions, lat)
        trajectory = gillespie_asep(rates, lat, measure, max(resolved.t_values), resolved.seed)
        write_event_log(trajectory, writer.directory / "simulate_events.tsv")
        results["logged_events"] = trajectory.n_events

    message = "Monte Carlo run is exploratory (off-manifold)" if exploratory else "Monte Carlo comparison finished"
    run.finish(writer, resolved, "simulate", message, results)
