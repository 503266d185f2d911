"""
check-manifold: manifold residuals, solved barriers and derived shock data.
"""

import logging

import click

from app.cli.context import RunContext
from app.cli.error_handling import handle_errors
from app.core.config import settings
from app.schemas.experiment import ExperimentKind
from app.services.asep_open import manifold_residuals

logger = logging.getLogger(__name__)


@click.command("check-manifold")
@click.pass_obj
@handle_errors
def check_manifold(run: RunContext):
    """Report whether the rates lie on B_N and B_N^M."""
    resolved = run.resolve(ExperimentKind.CHECK_MANIFOLD)
    tol = run.tolerance(resolved, "manifold", settings.MANIFOLD_TOL)
    residuals = manifold_residuals(resolved.rates, resolved.spec)
    on_B_N, on_B_NM = residuals.on_B_N(tol), residuals.on_B_NM(tol)

    results = {
        "on_manifold": on_B_NM,
        "on_B_N": on_B_N,
        "tolerance": tol,
        "relative_res_N": residuals.res_N / residuals.target_N,
        "relative_res_M": residuals.res_M / residuals.target_M,
    }
    if resolved.parametrization is not None:
        results["omega_minus"] = resolved.parametrization.omega_minus
        results["omega_plus"] = resolved.parametrization.omega_plus

    spec = resolved.spec
    if on_B_NM:
        message = f"Rates lie on B_{spec.N}^{spec.M}"
    else:
        message = f"Valid input, off B_{spec.N}^{spec.M}"
        logger.warning(message, extra={"res_N": residuals.res_N, "res_M": residuals.res_M})
    run.finish(run.writer(resolved), resolved, "check-manifold", message, results)
