"""
evolve and propagator: exact time evolution of shock measures and the
single-shock transition probabilities.
"""

import click
import numpy as np
import pandas as pd

from app.cli.context import RunContext
from app.cli.error_handling import handle_errors
from app.core.config import settings
from app.core.exceptions import ParameterValidationError
from app.schemas.experiment import ExperimentKind
from app.services.asep_open import density_profile
from app.services.duality_lab import evolve_and_compare
from app.services.lattice_core import expm_action
from app.services.shock_walk import build_Q, rw_propagator_matrix, shock_rates


@click.command("evolve")
@click.pass_obj
@handle_errors
def evolve(run: RunContext):
    """Per-site densities of the ASEP started from a shock measure."""
    resolved = run.resolve(ExperimentKind.EVOLVE)
    lat, rates, profile = resolved.lattice, resolved.rates, resolved.profile
    tol = run.tolerance(resolved, "evolution", settings.EVOLUTION_TOL)
    writer = run.writer(resolved)

    frames, errors = [], []
    for t in resolved.t_values:
        comparison = evolve_and_compare(rates, lat, profile, resolved.positions, t)
        errors.append(comparison.err)
        frames.append(pd.DataFrame({
            "t": t,
            "site": lat.sites,
            "density": density_profile(comparison.rhs, lat),
            "density_direct": density_profile(comparison.lhs, lat),
        }))
    profiles = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    writer.csv("evolve_profiles.csv", profiles)

    max_err = max(errors) if errors else 0.0
    results = {
        "max_err": max_err,
        "tolerance": tol,
        "holds": max_err < tol,
        "errors": dict(zip(map(str, resolved.t_values), errors)),
    }
    run.finish(writer, resolved, "evolve", f"Evolved {len(errors)} time points", results)


@click.command("propagator")
@click.pass_obj
@handle_errors
def propagator(run: RunContext):
    """Closed-form single-shock propagator against uniformization on Q."""
    resolved = run.resolve(ExperimentKind.PROPAGATOR)
    if resolved.spec.N != 1:
        raise ParameterValidationError(
            f"The closed-form propagator needs N = 1, got N = {resolved.spec.N}", field_name="N"
        )
    lat, rates, profile = resolved.lattice, resolved.rates, resolved.profile
    tol = run.tolerance(resolved, "propagator", settings.EVOLUTION_TOL)
    writer = run.writer(resolved)

    sr = shock_rates(profile, rates)
    Q = build_Q(profile, rates, lat)
    frames, gaps, mass = [], [], []
    for t in resolved.t_values:
        closed = rw_propagator_matrix(t, sr, lat)
        numeric = expm_action(Q, np.eye(lat.length), t).T
        gaps.append(float(np.max(np.abs(closed - numeric))))
        mass.append(float(np.max(np.abs(closed.sum(axis=1) - 1.0))))
        x, y = np.meshgrid(lat.sites, lat.sites, indexing="ij")
        frames.append(pd.DataFrame({
            "t": t,
            "x": x.ravel(),
            "y": y.ravel(),
            "closed_form": closed.ravel(),
            "uniformization": numeric.ravel(),
        }))
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    writer.csv("propagator.csv", table)

    max_gap = max(gaps) if gaps else 0.0
    results = {
        "max_gap": max_gap,
        "max_normalization_defect": max(mass) if mass else 0.0,
        "tolerance": tol,
        "holds": max_gap < tol,
        "d": float(sr.d_asym[0]),
        "velocity": float(sr.velocity[0]),
        "diffusion": float(sr.diffusion[0]),
    }
    run.finish(writer, resolved, "propagator", "Propagator compared", results)
