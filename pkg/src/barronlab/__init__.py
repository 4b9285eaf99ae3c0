"""Barron-norm estimation, constructive network approximation and transport certificates."""

__version__ = "0.1.0"

from .barron import BarronEstimate, lower_bound, upper_bound_from_extension, upper_bound_radial  # noqa: E402
from .compose import ComposePlan, LayeredNet, LayerSpec, build_layered, error_bound  # noqa: E402
from .netfit import TwoLayerNet, fit_two_layer, vector_fit  # noqa: E402
from .spectral import Ball, Box, GridFunction, Polytope, SpectrumGrid, forward_ft, inverse_ft, radial_ft  # noqa: E402
from .transport import EmpiricalMeasure, wasserstein_exact, wasserstein_sinkhorn  # noqa: E402

__all__ = [
    "BarronEstimate", "lower_bound", "upper_bound_from_extension", "upper_bound_radial",
    "ComposePlan", "LayeredNet", "LayerSpec", "build_layered", "error_bound",
    "TwoLayerNet", "fit_two_layer", "vector_fit",
    "Ball", "Box", "GridFunction", "Polytope", "SpectrumGrid", "forward_ft", "inverse_ft", "radial_ft",
    "EmpiricalMeasure", "wasserstein_exact", "wasserstein_sinkhorn",
]
