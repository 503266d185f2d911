"""
invariant: the stationary measure as a convex combination of shock measures.
"""

import logging

import click
import pandas as pd

from app.cli.context import RunContext
from app.cli.error_handling import handle_errors
from app.core.config import settings
from app.core.exceptions import ResourceCapError
from app.schemas.experiment import ExperimentKind
from app.services.duality_lab import invariant_measure, null_space_oracle
from app.services.lattice_core import total_variation

logger = logging.getLogger(__name__)


@click.command("invariant")
@click.pass_obj
@handle_errors
def invariant(run: RunContext):
    """Weights, densities and currents of the shock-measure invariant measure."""
    resolved = run.resolve(ExperimentKind.INVARIANT)
    lat, rates = resolved.lattice, resolved.rates
    tol = run.tolerance(resolved, "stationarity", settings.STATIONARITY_TOL)
    writer = run.writer(resolved)

    measure = invariant_measure(rates, lat, resolved.profile, tol=tol)
    weights = pd.DataFrame({"rank": range(len(measure.weights))})
    for i in range(resolved.spec.N):
        weights[f"x_{i + 1}"] = measure.states[:, i]
    weights["weight"] = measure.weights
    writer.csv("invariant_weights.csv", weights)
    writer.csv("invariant_densities.csv", pd.DataFrame({"site": lat.sites, "density": measure.densities}))
    writer.csv(
        "invariant_currents.csv",
        pd.DataFrame({"bond": list(measure.currents), "current": list(measure.currents.values())}),
    )

    results = {
        "weights": measure.weights,
        "stationarity_residual": measure.stationarity_residual,
        "stationary": measure.stationary,
        "tolerance": tol,
        "densities": measure.densities,
        "currents": measure.currents,
    }
    try:
        results["oracle_total_variation"] = total_variation(measure.vector, null_space_oracle(rates, lat))
    except ResourceCapError as e:
        logger.warning(f"Null-space oracle skipped: {e.message}")

    message = "Invariant measure is stationary" if measure.stationary else "Shock-measure combination is not stationary"
    run.finish(writer, resolved, "invariant", message, results)
