"""2D acoustic inverse-scattering workbench.

Forward scattering for variable coefficients (div(sigma grad u) + k^2 eta u = 0
with a plane-wave incident field), far-field extraction on a ring, synthetic
noisy measurement sets on direction nets, and TV-regularized reconstruction of
(sigma, eta) with a parameter-schedule convergence harness.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
