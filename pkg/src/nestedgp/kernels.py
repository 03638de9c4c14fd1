"""Stationary tensor-product covariance functions.

Three families are provided, all anisotropic (one lengthscale per input
dimension) with a variance scale and an additive nugget:

* ``gaussian``: ``exp(-r**2/2)`` per dimension, ``r = |x - x'| / l``;
* ``matern52``: ``(1 + sqrt(5) r + 5 r**2 / 3) exp(-sqrt(5) r)`` per dimension;
* ``gaussian_derivative``: covariance of the ``n``-th derivative of a process
  with Gaussian covariance, ``(-1)**n k^(2n)(r) = He_2n(r) exp(-r**2/2)`` up to
  the sign ``(-1)**n``, with one derivative order per dimension.

The nugget is added only between bitwise-identical points, so posteriors still
interpolate the training data.
"""
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from numpy.polynomial import hermite_e as H

from . import _accel
from .polyexp import PolyExpSum


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    MATERN52 = "matern52"
    GAUSSIAN_DERIVATIVE = "gaussian_derivative"


GAUSSIAN_CLASS = (Family.GAUSSIAN, Family.GAUSSIAN_DERIVATIVE)


class UnsupportedFamilyError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters of a tensor-product stationary kernel."""

    family: Family
    lengthscales: tuple
    variance: float = 1.0
    nugget: float = 0.0
    derivative_orders: tuple = field(default=None)

    def __post_init__(self):
        fam = Family(self.family)
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        orders = self.derivative_orders
        orders = (0,) * len(ls) if orders is None else tuple(int(v) for v in orders)
        if len(ls) == 0:
            raise ValueError("at least one lengthscale is required")
        if any(not np.isfinite(v) or v <= 0 for v in ls):
            raise ValueError(f"lengthscales must be positive and finite, got {ls}")
        if not (np.isfinite(self.variance) and self.variance > 0):
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise ValueError(f"nugget must be non-negative, got {self.nugget}")
        if len(orders) != len(ls) or any(o < 0 for o in orders):
            raise ValueError("derivative_orders must be non-negative, one per dimension")
        if fam is not Family.GAUSSIAN_DERIVATIVE and any(orders):
            raise ValueError("derivative_orders are only meaningful for gaussian_derivative")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "derivative_orders", orders)
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "nugget", float(self.nugget))

    @property
    def dim(self):
        return len(self.lengthscales)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {"family": self.family.value, "lengthscales": list(self.lengthscales),
                "variance": self.variance, "nugget": self.nugget,
                "derivative_orders": list(self.derivative_orders)}


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, dim) if dim > 1 or x.size != 1 else x.reshape(1, 1)
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must have finite coordinates")
    return x


def _hermite_factor_coeffs(n):
    """Monomial coefficients of (-1)**n He_2n(r), i.e. of (-1)**n k^(2n) / k."""
    return (-1) ** n * H.herme2poly([0] * (2 * n) + [1])


def factor_1d(cfg, diff, dim):
    """Value of the one-dimensional kernel factor along ``dim`` (no variance)."""
    r = np.asarray(diff, dtype=float) / cfg.lengthscales[dim]
    if cfg.family is Family.MATERN52:
        a = np.abs(r)
        return (1.0 + _accel.SQRT5 * a + (5.0 / 3.0) * a * a) * np.exp(-_accel.SQRT5 * a)
    base = np.exp(-0.5 * r * r)
    n = cfg.derivative_orders[dim]
    if n == 0:
        return base
    return np.polynomial.polynomial.polyval(r, _hermite_factor_coeffs(n)) * base


def dfactor_1d(cfg, diff, dim):
    """Derivative of :func:`factor_1d` with respect to the difference."""
    l = cfg.lengthscales[dim]
    r = np.asarray(diff, dtype=float) / l
    if cfg.family is Family.MATERN52:
        a = np.abs(r)
        return -(5.0 / 3.0) * r * (1.0 + _accel.SQRT5 * a) * np.exp(-_accel.SQRT5 * a) / l
    P = np.polynomial.polynomial
    c = _hermite_factor_coeffs(cfg.derivative_orders[dim])
    # d/dr [p(r) e^{-r^2/2}] = (p'(r) - r p(r)) e^{-r^2/2}
    dc = P.polysub(P.polyder(c), P.polymulx(c))
    return P.polyval(r, dc) * np.exp(-0.5 * r * r) / l


def gram(cfg, A, B=None):
    """Covariance matrix between point sets ``A`` (n, d) and ``B`` (m, d)."""
    A = _as_points(A, cfg.dim)
    B = A if B is None else _as_points(B, cfg.dim)
    ls = np.asarray(cfg.lengthscales)
    if cfg.family is Family.GAUSSIAN or (
            cfg.family is Family.GAUSSIAN_DERIVATIVE and not any(cfg.derivative_orders)):
        return _accel.gram_gaussian(A, B, ls, cfg.variance, cfg.nugget)
    if cfg.family is Family.MATERN52:
        return _accel.gram_matern52(A, B, ls, cfg.variance, cfg.nugget)
    K = np.full((A.shape[0], B.shape[0]), cfg.variance)
    for k in range(cfg.dim):
        K *= factor_1d(cfg, A[:, None, k] - B[None, :, k], k)
    if cfg.nugget > 0:
        K += cfg.nugget * np.all(A[:, None, :] == B[None, :, :], axis=2)
    return K


def gram_grad_first(cfg, A, B, dim=0):
    """d/dA[:, dim] of the nugget-free covariance between ``A`` and ``B``."""
    A = _as_points(A, cfg.dim)
    B = _as_points(B, cfg.dim)
    K = np.full((A.shape[0], B.shape[0]), cfg.variance)
    for k in range(cfg.dim):
        diff = A[:, None, k] - B[None, :, k]
        K *= dfactor_1d(cfg, diff, k) if k == dim else factor_1d(cfg, diff, k)
    return K


def kernel_eval(cfg, x, xp):
    """Covariance between two single points."""
    x = _as_points(np.atleast_1d(x), cfg.dim)
    xp = _as_points(np.atleast_1d(xp), cfg.dim)
    if x.shape[0] != 1 or xp.shape[0] != 1:
        raise ValueError("kernel_eval takes single points")
    return float(gram(cfg, x, xp)[0, 0])


def kernel_as_poly_exp(cfg, dim):
    """The 1-D factor along ``dim`` as a :class:`PolyExpSum` in the difference.

    Only defined for the Gaussian class; the variance scale is not included.
    """
    if cfg.family not in GAUSSIAN_CLASS:
        raise UnsupportedFamilyError(
            f"{cfg.family.value} kernels have no polynomial-exponential form; "
            "a Gaussian-class covariance is required")
    l = cfg.lengthscales[dim]
    coeffs = _hermite_factor_coeffs(cfg.derivative_orders[dim])
    powers = np.flatnonzero(coeffs)
    return PolyExpSum(coeffs[powers] / l ** powers, np.zeros(powers.size), powers,
                      np.zeros(powers.size), np.full(powers.size, -0.5 / l ** 2))
