"""Numerical homogenization of randomly deformed periodic media.

Computes effective tensors of elliptic systems whose coefficients are
periodic tensors composed with a random deformation of the period lattice,
validates the small-period limit on boundary value problems, and evaluates
effective bianisotropic electromagnetic constitutive matrices in the Laplace
domain.
"""

__version__ = "0.1.0"
