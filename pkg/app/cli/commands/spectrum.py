"""
spectrum and xxz: spectral containment of the single-shock relaxation rates
and the XXZ spin-chain correspondence.
"""

import math

import click
import pandas as pd

from app.cli.context import RunContext
from app.cli.error_handling import handle_errors
from app.core.config import settings
from app.schemas.experiment import ExperimentKind
from app.services.asep_open import manifold_residuals
from app.services.duality_lab import (
    integrability_residual,
    spectrum_containment,
    submanifold_condition_residual,
    xxz_from_rates,
    xxz_residual,
)


@click.command("spectrum")
@click.pass_obj
@handle_errors
def spectrum(run: RunContext):
    """Distance of every eps_p to the spectrum of H."""
    resolved = run.resolve(ExperimentKind.SPECTRUM)
    tol = run.tolerance(resolved, "spectral", settings.SPECTRAL_TOL)
    writer = run.writer(resolved)

    containment = spectrum_containment(resolved.rates, resolved.lattice, resolved.profile)
    writer.csv("spectrum.csv", pd.DataFrame({
        "p": range(len(containment.eps)),
        "eps": containment.eps,
        "gap": containment.gaps,
    }))
    results = {
        "max_gap": containment.max_gap,
        "tolerance": tol,
        "contained": containment.max_gap < tol,
    }
    run.finish(writer, resolved, "spectrum", "Spectrum containment checked", results)


@click.command("xxz")
@click.pass_obj
@handle_errors
def xxz(run: RunContext):
    """Similarity transform of H against the XXZ chain with boundary fields."""
    resolved = run.resolve(ExperimentKind.XXZ)
    lat, rates, spec = resolved.lattice, resolved.rates, resolved.spec
    tol = run.tolerance(resolved, "xxz", settings.MANIFOLD_TOL)

    params = xxz_from_rates(rates, lat)
    residual = xxz_residual(rates, lat)
    integrability = integrability_residual(params, lat, spec.N)
    res_N = manifold_residuals(rates, spec).res_N
    results = {
        "xxz_parameters": params.as_dict(),
        "xxz_residual": residual,
        "tolerance": tol,
        "holds": residual < tol,
        "integrability_residual": integrability,
        "integrability_from_res_N": math.log1p(res_N / rates.q ** (2 * spec.N)),
        "submanifold_condition_residual": submanifold_condition_residual(params, lat, spec),
    }
    run.finish(run.writer(resolved), resolved, "xxz", "XXZ correspondence checked", results)
