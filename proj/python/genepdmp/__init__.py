"""Piecewise deterministic model of three-stage gene expression."""

from ._core import (
    ArgumentError,
    Attractor,
    DegenerateParamsError,
    NormParams,
    NumericalError,
    RateSpec,
    SpecError,
    __version__,
    classify_regime,
    detect_limit_cycle,
    ensemble_stats,
    f_map,
    find_fixed_points,
    flow,
    from_eigen,
    hormander_rank,
    hormander_vectors,
    reach,
    simulate,
    snapshot,
    symmetry_image,
    to_eigen,
)

__all__ = [
    "ArgumentError",
    "Attractor",
    "DegenerateParamsError",
    "NormParams",
    "NumericalError",
    "RateSpec",
    "SpecError",
    "__version__",
    "classify_regime",
    "detect_limit_cycle",
    "ensemble_stats",
    "f_map",
    "find_fixed_points",
    "flow",
    "from_eigen",
    "hormander_rank",
    "hormander_vectors",
    "reach",
    "simulate",
    "snapshot",
    "symmetry_image",
    "to_eigen",
]
