"""Time-fractional advection-diffusion simulation and order recovery.

Forward solvers for Caputo-in-time advection-diffusion problems with a
non-symmetric elliptic part on box domains, the spectral machinery behind
their long-time expansion, and recovery of the fractional order from a
single-point observation series.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
