"""
Duality verification services.
"""

from .duality import (
    DualityReport,
    EvolutionComparison,
    InvariantMeasure,
    SpectrumContainment,
    SweepPoint,
    evolve_and_compare,
    evolved_density_profile,
    invariant_measure,
    invariant_vs_oracle,
    manifold_sweep_points,
    null_space_oracle,
    spectrum_containment,
    verify_reverse_duality,
    verify_sweep,
)
from .lemmas import (
    boundary_eigen,
    boundary_product_residual,
    corollary_identity_residuals,
    projection_coefficients,
    verify_projection_lemma,
)
from .xxz import (
    XXZParams,
    build_H_xxz,
    integrability_residual,
    rates_from_xxz,
    submanifold_condition_residual,
    xxz_from_rates,
    xxz_residual,
)

__all__ = [
    "DualityReport",
    "EvolutionComparison",
    "InvariantMeasure",
    "SpectrumContainment",
    "SweepPoint",
    "XXZParams",
    "boundary_eigen",
    "boundary_product_residual",
    "build_H_xxz",
    "corollary_identity_residuals",
    "evolve_and_compare",
    "evolved_density_profile",
    "integrability_residual",
    "invariant_measure",
    "invariant_vs_oracle",
    "manifold_sweep_points",
    "null_space_oracle",
    "projection_coefficients",
    "rates_from_xxz",
    "spectrum_containment",
    "submanifold_condition_residual",
    "verify_projection_lemma",
    "verify_reverse_duality",
    "verify_sweep",
    "xxz_from_rates",
    "xxz_residual",
]
