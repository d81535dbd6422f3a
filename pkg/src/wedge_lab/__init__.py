"""Numerical lab for weighted heat-kernel and L_p estimates on planar wedges.

Submodules
----------
special_functions
    Scaled modified Bessel functions, log-Gamma, Gaussian moments.
domain_geometry
    Wedge points, boundary distance and mixed weights.
heat_kernel
    Dirichlet heat kernel of the wedge (eigenfunction series, image oracle).
quadrature
    Gauss-Legendre composite rules and product rules on the wedge.
weighted_norms
    Weighted L_p and Sobolev norms, dyadic localisation.
convolution
    Stochastic and deterministic heat convolutions.
lemma_verifier
    Supremum checks for the auxiliary integral estimates and the Green bound.
theorem_verifier
    Ratio tables for the space-time estimates and related probes.
cli
    TOML-driven command-line runner.
"""

from .domain_geometry import WedgePoint, WeightParams
from .heat_kernel import KernelConfig, WedgeHeatKernel

__version__ = "0.1.0"

__all__ = ["WedgePoint", "WeightParams", "KernelConfig", "WedgeHeatKernel", "__version__"]
