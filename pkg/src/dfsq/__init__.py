"""Companding scalar quantizers for distributed functional quantization.

The package designs point densities from functional sensitivity profiles,
matches resolutions to rates, and checks high-resolution distortion
predictions by Monte Carlo simulation.
"""

from .compander import (Compander, CompandingQuantizer, DistributedQuantizer,
                        GeneralizedCompander, NonRegularQuantizer, PointDensity, bin_map)
from .design import DesignProblem, DesignResult, allocate, design
from .distortion import DistortionReport, EstimatorTable, empirical_distortion
from .functions import (Identity, Linear, Max, Median, MinClip, Quadrant, SepParabola,
                        SlopeGrid, Square, Tent, function_from_spec, sensitivity_profile)
from .pipeline import simulate
from .rate import joint_entropy, output_entropy, resolution_for_rate
from .sources import GridSource, IndependentSource, Power, Uniform, uniform_source

__version__ = "0.1.0"

__all__ = [
    "Compander", "CompandingQuantizer", "DesignProblem", "DesignResult", "DistortionReport",
    "DistributedQuantizer", "EstimatorTable", "GeneralizedCompander", "GridSource",
    "Identity", "IndependentSource", "Linear", "Max", "Median", "MinClip",
    "NonRegularQuantizer", "PointDensity", "Power", "Quadrant", "SepParabola", "SlopeGrid",
    "Square", "Tent", "Uniform", "allocate", "bin_map", "design", "empirical_distortion",
    "function_from_spec", "joint_entropy", "output_entropy", "resolution_for_rate",
    "sensitivity_profile", "simulate", "uniform_source",
]
