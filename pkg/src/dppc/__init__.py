"""Marked and conditional determinantal point processes on quadrature grids."""
from .errors import (DPPError, DomainError, EigenvalueOutOfRange, GramBreakdown,
                     IntegrableConstraintError, MomentsNotConverged, NearSingularPalm,
                     NotAValidDPP, SingularResolvent, ZeroProbabilityObservation,
                     ZeroProbabilityStratum)
from .ground import GroundSpace, MarkedConfiguration, discretize, finite_space, restrict
from .kernels import (Kernel, airy_kernel, circle_ope_kernel, cue_kernel, ope_kernel,
                      projection_defect, random_hermitian_kernel, sine_kernel)
from .conditioning import (avg_mult_functional, conditional_correlation, conditional_kernel,
                           fredholm_det, jacobi_logderiv, janossy_density, observation_density,
                           palm_kernel)
from .sampler import mark_sample, sample_conditional, sample_dpp

__version__ = "0.1.0"

__all__ = [
    "DPPError",
    "DomainError",
    "EigenvalueOutOfRange",
    "GramBreakdown",
    "IntegrableConstraintError",
    "MomentsNotConverged",
    "NearSingularPalm",
    "NotAValidDPP",
    "SingularResolvent",
    "ZeroProbabilityObservation",
    "ZeroProbabilityStratum",
    "GroundSpace",
    "MarkedConfiguration",
    "discretize",
    "finite_space",
    "restrict",
    "Kernel",
    "airy_kernel",
    "circle_ope_kernel",
    "cue_kernel",
    "ope_kernel",
    "projection_defect",
    "random_hermitian_kernel",
    "sine_kernel",
    "avg_mult_functional",
    "conditional_correlation",
    "conditional_kernel",
    "fredholm_det",
    "jacobi_logderiv",
    "janossy_density",
    "observation_density",
    "palm_kernel",
    "mark_sample",
    "sample_conditional",
    "sample_dpp",
]
