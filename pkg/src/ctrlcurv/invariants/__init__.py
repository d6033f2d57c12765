"""Feedback invariants of planar control systems on sample lattices."""

from .engine import (
    FiberData,
    InvariantConfig,
    InvariantGrid,
    InvariantSample,
    RegularityError,
    StencilError,
    adjoint_covector,
    bracket_oracle_kappa,
    check_regularity,
    curvature_kappa,
    derived_invariants,
    evaluate,
    fiber_arrays,
    fiber_data,
    structure_c,
)

__all__ = [
    "FiberData", "InvariantConfig", "InvariantGrid", "InvariantSample", "RegularityError", "StencilError",
    "adjoint_covector", "bracket_oracle_kappa", "check_regularity", "curvature_kappa", "derived_invariants",
    "evaluate", "fiber_arrays", "fiber_data", "structure_c",
]
