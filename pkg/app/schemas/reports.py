"""
Report schemas embedding the fully resolved parameter set of a run.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.schemas.base import BaseReport


class ResolvedParameters(BaseModel):
    """Everything needed to re-run an experiment bit for bit."""

    l_minus: int
    l_plus: int
    rates: Dict[str, float]
    parametrization: Optional[Dict[str, float]] = None
    N: int
    M: int
    positions: List[int]
    seed: int
    n_traj: int
    t_values: List[float] = Field(default_factory=list)


class ManifoldSummary(BaseModel):
    res_N: float
    res_M: float
    on_B_N: bool
    on_B_NM: bool
    submanifold_ratio_residual: float
    rho_minus: float
    rho_plus: float
    bulk_densities: List[float]
    shock_densities: List[float]
    d_l: Optional[List[float]] = None
    d_r: Optional[List[float]] = None
    mpm_warning: Optional[str] = None


class RunReport(BaseReport):
    """Report of one subcommand run."""

    parameters: ResolvedParameters
    manifold: Optional[ManifoldSummary] = None
    results: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)
