"""
Loading and resolving experiment documents.

Resolution turns a validated document into concrete model objects: the
lattice, the six rates (solving a parametrization onto its manifold when
asked), the shock family fixed by the boundary rates and the time grid.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import orjson
from pydantic import ValidationError

from app.core.exceptions import ConfigurationError, DualityLabException
from app.schemas.experiment import ExperimentConfig, ExperimentKind, demo_config
from app.schemas.reports import ManifoldSummary, ResolvedParameters
from app.services.asep_open import (
    BoundaryParametrization,
    ManifoldSpec,
    Rates,
    density_from_fugacity,
    kappa,
    manifold_residuals,
    mpm_existence_warning,
    rates_from_parametrization,
    solve_manifold,
    submanifold_ratio_residual,
)
from app.services.lattice_core import Lattice
from app.services.shock_measures import boundary_shock_profile
from app.services.shock_walk import ShockProfile, shock_rates

logger = logging.getLogger(__name__)


def document_from_report(report: dict) -> dict:
    """
    Experiment document reproducing a run report.

    The resolved rates are used as raw rates and the resolved times are
    already absolute, so re-running gives the same residuals.
    """
    params = report["parameters"]
    return {
        "lattice": {"l_minus": params["l_minus"], "l_plus": params["l_plus"]},
        "rates": params["rates"],
        "shocks": {"N": params["N"], "M": params["M"], "positions": params["positions"]},
        "experiment": {
            "t_values": params.get("t_values", []),
            "seed": params["seed"],
            "n_traj": params["n_traj"],
            "time_in_units_of_w": False,
        },
    }


def load_config(path: Optional[Union[str, Path]], kind: ExperimentKind) -> ExperimentConfig:
    """
    Read an experiment document, or the built-in demo when path is None.

    Raises:
        ConfigurationError: If the file cannot be read or fails validation
    """
    if path is None:
        logger.info("No --config given, using the built-in demo experiment")
        return demo_config(kind)
    try:
        raw = orjson.loads(Path(path).read_bytes())
    except OSError as e:
        raise ConfigurationError(f"Cannot read experiment document {path}: {e}")
    except orjson.JSONDecodeError as e:
        raise ConfigurationError(f"Experiment document {path} is not valid JSON: {e}")

    if isinstance(raw, dict) and "parameters" in raw and "command" in raw:
        logger.info(f"{path} is a run report, re-running from its resolved parameters")
        raw = document_from_report(raw)

    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        errors = [
            f"{'.'.join(str(part) for part in error['loc']) or 'document'}: {error['msg']}"
            for error in e.errors()
        ]
        raise ConfigurationError(
            f"Experiment document {path} is invalid ({len(errors)} problems)",
            validation_errors=errors,
        )
    config.experiment.kind = kind
    return config


@dataclass
class ResolvedExperiment:
    config: ExperimentConfig
    lattice: Lattice
    rates: Rates
    parametrization: Optional[BoundaryParametrization]
    spec: ManifoldSpec
    profile: ShockProfile
    positions: List[int]
    seed: int
    t_values: List[float]
    warnings: List[str] = field(default_factory=list)

    def parameters(self) -> ResolvedParameters:
        return ResolvedParameters(
            l_minus=self.lattice.l_minus,
            l_plus=self.lattice.l_plus,
            rates=self.rates.as_dict(),
            parametrization=self.parametrization.as_dict() if self.parametrization else None,
            N=self.spec.N,
            M=self.spec.M,
            positions=self.positions,
            seed=self.seed,
            n_traj=self.config.experiment.n_traj,
            t_values=self.t_values,
        )

    def manifold_summary(self) -> ManifoldSummary:
        residuals = manifold_residuals(self.rates, self.spec)
        try:
            sr = shock_rates(self.profile, self.rates)
            d_l, d_r = list(sr.d_l), list(sr.d_r)
        except DualityLabException as e:
            logger.warning(f"Shock rates unavailable for the resolved profile: {e}")
            d_l = d_r = None
        rho_minus = density_from_fugacity(1.0 / kappa(self.rates.alpha, self.rates.gamma, self.rates, +1))
        rho_plus = density_from_fugacity(kappa(self.rates.beta, self.rates.delta, self.rates, +1))
        return ManifoldSummary(
            res_N=residuals.res_N,
            res_M=residuals.res_M,
            on_B_N=residuals.on_B_N(),
            on_B_NM=residuals.on_B_NM(),
            submanifold_ratio_residual=submanifold_ratio_residual(self.rates, self.spec),
            rho_minus=rho_minus,
            rho_plus=rho_plus,
            bulk_densities=list(self.profile.bulk_densities),
            shock_densities=list(self.profile.shock_densities),
            d_l=d_l,
            d_r=d_r,
            mpm_warning=mpm_existence_warning(self.spec, self.lattice),
        )


def _resolve_rates(config: ExperimentConfig):
    if config.rates is not None:
        return Rates(**config.rates.model_dump()), None

    p = config.parametrization
    if p.rho_plus is None or p.solve_for is not None:
        target = p.solve_for or config.shocks
        parametrization = solve_manifold(
            p.q, p.w, p.rho_minus, ManifoldSpec(N=target.N, M=target.M), omega_minus=p.omega_minus
        )
    else:
        parametrization = BoundaryParametrization(
            q=p.q,
            w=p.w,
            rho_minus=p.rho_minus,
            rho_plus=p.rho_plus,
            omega_minus=p.omega_minus or 0.0,
            omega_plus=p.omega_plus or 0.0,
        )
    return rates_from_parametrization(parametrization), parametrization


def resolve(config: ExperimentConfig, seed: Optional[int] = None) -> ResolvedExperiment:
    """
    Build the model objects of an experiment.

    Raises:
        ParameterValidationError: If a module precondition fails
        ManifoldSolveError: If a requested manifold has no positive-rate point
    """
    lattice = Lattice(config.lattice.l_minus, config.lattice.l_plus)
    spec = ManifoldSpec(N=config.shocks.N, M=config.shocks.M)
    spec.check_lattice(lattice)
    rates, parametrization = _resolve_rates(config)
    profile = boundary_shock_profile(rates, spec.N)

    scale = 1.0 / rates.w if config.experiment.time_in_units_of_w else 1.0
    warnings = []
    mpm_warning = mpm_existence_warning(spec, lattice)
    if mpm_warning:
        logger.warning(mpm_warning)
        warnings.append(mpm_warning)

    resolved = ResolvedExperiment(
        config=config,
        lattice=lattice,
        rates=rates,
        parametrization=parametrization,
        spec=spec,
        profile=profile,
        positions=config.default_positions(),
        seed=config.experiment.seed if seed is None else seed,
        t_values=[t * scale for t in config.experiment.t_values],
        warnings=warnings,
    )
    logger.debug(f"Resolved experiment on L = {lattice.length} with rates {rates.as_dict()}")
    return resolved
