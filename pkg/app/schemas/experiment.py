"""
Experiment documents accepted by the command-line tool.

An experiment names a lattice, either raw rates or a boundary
parametrization, a shock family and the experiment to run. Cross-field
constraints are checked together so that a document with several problems
reports all of them at once.
"""

import math
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator

from app.core.config import settings


class ExperimentKind(str, Enum):
    """Subcommands an experiment document can drive."""

    CHECK_MANIFOLD = "check-manifold"
    VERIFY = "verify"
    EVOLVE = "evolve"
    INVARIANT = "invariant"
    PROPAGATOR = "propagator"
    SPECTRUM = "spectrum"
    XXZ = "xxz"
    SIMULATE = "simulate"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class LatticeConfig(BaseModel):
    """Integer interval [l_minus, l_plus]."""

    l_minus: int = 1
    l_plus: int

    @property
    def length(self) -> int:
        return self.l_plus - self.l_minus + 1

    @model_validator(mode="after")
    def at_least_two_sites(self) -> "LatticeConfig":
        if self.length < 2:
            raise ValueError(f"lattice [{self.l_minus}, {self.l_plus}] needs at least 2 sites")
        return self


class RatesConfig(BaseModel):
    """The six raw ASEP rates."""

    r: float = Field(gt=0)
    ell: float = Field(gt=0)
    alpha: float = Field(gt=0)
    beta: float = Field(gt=0)
    gamma: float = Field(gt=0)
    delta: float = Field(gt=0)

    @model_validator(mode="after")
    def asymmetric(self) -> "RatesConfig":
        if self.r == self.ell:
            raise ValueError("r and ell must differ")
        return self


class ManifoldTarget(BaseModel):
    """Manifold B_N^M onto which a parametrization is solved."""

    N: int = Field(ge=1)
    M: int = Field(1, ge=1)


class ParametrizationConfig(BaseModel):
    """
    Boundary parametrization; rho_plus is solved from the manifold when
    omitted or when solve_for is given.
    """

    q: float = Field(gt=0)
    w: float = Field(gt=0)
    rho_minus: float = Field(gt=0, lt=1)
    rho_plus: Optional[float] = Field(None, gt=0, lt=1)
    omega_minus: Optional[float] = None
    omega_plus: Optional[float] = None
    solve_for: Optional[ManifoldTarget] = None

    @model_validator(mode="after")
    def q_not_one(self) -> "ParametrizationConfig":
        if self.q == 1:
            raise ValueError("q must differ from 1")
        return self


class ShocksConfig(BaseModel):
    N: int = Field(1, ge=1)
    M: int = Field(1, ge=1)
    positions: Optional[List[int]] = None


class ExperimentSettings(BaseModel):
    kind: ExperimentKind = ExperimentKind.VERIFY
    t_values: List[float] = Field(default_factory=lambda: [0.5, 2.0])
    tolerances: Dict[str, float] = Field(default_factory=dict)
    n_traj: int = Field(default_factory=lambda: settings.DEFAULT_N_TRAJ, ge=2)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2 ** 64)
    time_in_units_of_w: bool = Field(
        True, description="Interpret t values as multiples of 1/w"
    )
    record_events: bool = False


class OutputConfig(BaseModel):
    directory: str = Field(default_factory=lambda: settings.DEFAULT_OUTPUT_DIR)
    formats: List[OutputFormat] = Field(
        default_factory=lambda: [OutputFormat.JSON, OutputFormat.CSV]
    )


class SweepConfig(BaseModel):
    """
    Parameter grid for the verify sweep.

    Every point is solved onto B_N^1 with q = sqrt(q2) and w = q unless w is
    given; a positive omega_plus_shift adds a copy of each point with the
    right jump barrier moved by that amount.
    """

    q2_values: List[float] = Field(default_factory=lambda: [1.5, 2.0, 3.0], min_length=1)
    rho_minus_values: List[float] = Field(default_factory=lambda: [0.2, 1.0 / 3.0, 0.45], min_length=1)
    L_values: List[int] = Field(default_factory=lambda: list(range(2, 8)), min_length=1)
    N_values: Optional[List[int]] = Field(None, description="Shock counts, 1..L when omitted")
    w: Optional[float] = Field(None, gt=0)
    omega_plus_shift: float = Field(0.1, ge=0)

    @model_validator(mode="after")
    def grid_checks(self) -> "SweepConfig":
        problems = []
        bad_q2 = [q2 for q2 in self.q2_values if not q2 > 0 or q2 == 1]
        if bad_q2:
            problems.append(f"q2 values {bad_q2} must be positive and different from 1")
        bad_rho = [rho for rho in self.rho_minus_values if not 0 < rho < 1]
        if bad_rho:
            problems.append(f"rho_minus values {bad_rho} must lie strictly between 0 and 1")
        bad_L = [L for L in self.L_values if L < 2]
        if bad_L:
            problems.append(f"L values {bad_L} need at least 2 sites")
        if self.N_values is not None and any(N < 1 for N in self.N_values):
            problems.append(f"N values {self.N_values} must be at least 1")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    def shock_counts(self, L: int) -> List[int]:
        if self.N_values is None:
            return list(range(1, L + 1))
        return [N for N in self.N_values if N <= L]


class ExperimentConfig(BaseModel):
    """A complete experiment document."""

    lattice: LatticeConfig
    rates: Optional[RatesConfig] = None
    parametrization: Optional[ParametrizationConfig] = None
    shocks: ShocksConfig = Field(default_factory=ShocksConfig)
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)
    output: OutputConfig = Field(default_factory=OutputConfig)
    sweep: Optional[SweepConfig] = None

    @model_validator(mode="after")
    def cross_field_checks(self) -> "ExperimentConfig":
        problems = []
        if (self.rates is None) == (self.parametrization is None):
            problems.append("exactly one of 'rates' and 'parametrization' is required")

        L = self.lattice.length
        if self.shocks.N > L:
            problems.append(f"shocks.N = {self.shocks.N} exceeds L = {L}")
        if self.shocks.M > self.shocks.N:
            problems.append(f"shocks.M = {self.shocks.M} exceeds shocks.N = {self.shocks.N}")

        positions = self.shocks.positions
        if positions is not None:
            if len(positions) != self.shocks.N:
                problems.append(f"{len(positions)} shock positions given for N = {self.shocks.N}")
            if any(not self.lattice.l_minus <= x <= self.lattice.l_plus for x in positions):
                problems.append(f"shock positions {positions} leave the lattice")
            if any(b <= a for a, b in zip(positions, positions[1:])):
                problems.append(f"shock positions {positions} are not strictly increasing")

        bad_times = [t for t in self.experiment.t_values if not (t >= 0 and math.isfinite(t))]
        if bad_times:
            problems.append(f"time values {bad_times} must be finite and nonnegative")
        bad_tols = {name: value for name, value in self.experiment.tolerances.items() if not value > 0}
        if bad_tols:
            problems.append(f"tolerances {bad_tols} must be positive")

        if problems:
            raise ValueError("; ".join(problems))
        return self

    def default_positions(self) -> List[int]:
        """Configured shock positions, or N shocks packed in the middle of the lattice."""
        if self.shocks.positions is not None:
            return list(self.shocks.positions)
        start = self.lattice.l_minus + (self.lattice.length - self.shocks.N) // 2
        return list(range(start, start + self.shocks.N))

    def tolerance(self, name: str, default: float) -> float:
        return self.experiment.tolerances.get(name, default)


def demo_config(kind: ExperimentKind = ExperimentKind.VERIFY) -> ExperimentConfig:
    """Built-in demo: L = 4, q^2 = 2, w = sqrt 2, rho_- = 1/3 on B_1^1."""
    return ExperimentConfig(
        lattice=LatticeConfig(l_minus=1, l_plus=4),
        parametrization=ParametrizationConfig(
            q=math.sqrt(2.0),
            w=math.sqrt(2.0),
            rho_minus=1.0 / 3.0,
            solve_for=ManifoldTarget(N=1, M=1),
        ),
        shocks=ShocksConfig(N=1, M=1),
        experiment=ExperimentSettings(kind=kind),
    )
