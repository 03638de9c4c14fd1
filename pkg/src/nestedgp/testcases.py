"""Benchmark code pairs: an analytical 1-D chain and a cone/ballistics chain.

The second pair uses stand-in physics: Newtonian drag of a cone for code 1 and
a point mass with quadratic drag for code 2.
"""
import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _accel
from .design import Box, lhs, maximin_lhs
from .gp import (ClippedReciprocal, Constant, Dataset, KrigingModel, Monomial, SearchConfig,
                 TrendBasis, fit_hyperparameters)
from .kernels import Family, KernelConfig


class PhysicsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CodePair:
    """Two nested codes with their domains, trend bases and kernel families.

    ``code1`` maps rows of X_1 to outputs; ``code2`` maps rows ``(phi, x2)``.
    """

    code1: Callable
    code2: Callable
    domain1: Box
    domain2: Box
    basis1: TrendBasis
    basis2: TrendBasis
    kernel1: KernelConfig
    kernel2: KernelConfig
    phi1_min: float = None
    name: str = ""
    metadata: dict = field(default_factory=dict)

    @property
    def d1(self):
        return self.domain1.dim

    @property
    def d2(self):
        return self.domain2.dim

    @property
    def nest_domain(self):
        return self.domain1 + self.domain2

    def nested(self, X):
        """True nested output ``y2(y1(x1), x2)`` at rows of X_1 x X_2."""
        X = np.asarray(X, dtype=float).reshape(-1, self.d1 + self.d2)
        y1 = self.code1(X[:, :self.d1])
        return self.code2(np.column_stack([y1, X[:, self.d1:]]))

    def chained_data(self, X):
        """Datasets of both codes for a chained design over X_1 x X_2."""
        X = np.asarray(X, dtype=float).reshape(-1, self.d1 + self.d2)
        X1 = X[:, :self.d1]
        y1 = self.code1(X1)
        P = np.column_stack([y1, X[:, self.d1:]])
        return Dataset(X1, y1), Dataset(P, self.code2(P))

    def calibrate_phi1_min(self, y1_obs, ratio=1e-3):
        """Copy with the code-2 basis floor set to ``ratio * min positive y1``."""
        if self.phi1_min is None:
            return self
        y = np.asarray(y1_obs, dtype=float)
        y = y[y > 0]
        if y.size == 0:
            raise PhysicsError("no positive code-1 output to scale phi1_min")
        floor = ratio * float(y.min())
        funcs = tuple(ClippedReciprocal(f.dim, floor) if isinstance(f, ClippedReciprocal) else f
                      for f in self.basis2.functions)
        return replace(self, basis2=TrendBasis(funcs), phi1_min=floor,
                       metadata={**self.metadata, "phi1_min": floor})


# ---------------------------------------------------------------------------
# Analytical example
# ---------------------------------------------------------------------------

BETA1 = np.array([-2.0, 0.25, 0.0625])
BETA2 = np.array([6.0, -5.0, -2.0, 1.0])


def _poly(t, beta):
    return np.polynomial.polynomial.polyval(t, beta)


def analytical_y1(X):
    x = np.asarray(X, dtype=float).reshape(-1, 1)[:, 0]
    return _poly(x, BETA1) - 0.25 * np.cos(2 * np.pi * x)


def analytical_y2(P):
    phi = np.asarray(P, dtype=float).reshape(-1, 1)[:, 0]
    return _poly(phi, BETA2) - 0.25 * np.cos(2 * np.pi * phi)


def analytical_codes():
    """Quadratic-plus-cosine code 1 on [-7, 7] feeding a cubic-plus-cosine code 2."""
    return CodePair(
        code1=analytical_y1,
        code2=analytical_y2,
        domain1=Box((-7.0,), (7.0,)),
        domain2=Box((), ()),
        basis1=TrendBasis.polynomial(2),
        basis2=TrendBasis.polynomial(3),
        kernel1=KernelConfig(Family.GAUSSIAN, (1.0,)),
        kernel2=KernelConfig(Family.GAUSSIAN, (1.0,)),
        name="analytical",
    )


# ---------------------------------------------------------------------------
# Cone drag and ballistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HydroParams:
    """Physical constants and domains of the cone/ballistics stand-in.

    The drag parameter of the trajectory is
    ``k = rho * area * ref_length * phi / (2 * mass)`` with ``area`` the cone
    base area, so that ``dv/dt = -g e_y - k |v| v``. The default reference
    length keeps ``k v**2 / g`` below about 1 over the domains: drag cuts the
    range by up to 40 % and the range stays a smooth, reciprocal-like function
    of ``phi``.
    """

    g: float = 9.81
    rho: float = 1.225
    mass: float = 1.0
    base_radius: float = 0.05
    ref_length: float = 0.01
    dt: float = 0.01
    t_max: float = 300.0
    # code-1 output spans 0.13..2 over these bounds
    height: tuple = (0.25, 1.0)
    half_angle_deg: tuple = (15.0, 30.0)
    speed: tuple = (100.0, 300.0)
    elevation_deg: tuple = (10.0, 50.0)

    def __post_init__(self):
        for name in ("g", "rho", "mass", "base_radius", "ref_length", "dt", "t_max"):
            if not getattr(self, name) > 0:
                raise PhysicsError(f"{name} must be positive")
        if self.height[0] <= 0:
            raise PhysicsError("cone height must be positive")
        if not (0 < self.half_angle_deg[0] < self.half_angle_deg[1] < 90):
            raise PhysicsError("half-angle bounds must lie in (0, 90) degrees")
        if not (0 < self.elevation_deg[0] < self.elevation_deg[1] < 90):
            raise PhysicsError("elevation bounds must lie in (0, 90) degrees")

    @property
    def drag_per_phi(self):
        area = np.pi * self.base_radius ** 2
        return self.rho * area * self.ref_length / (2.0 * self.mass)


def cone_drag_over_height(X1):
    """Newtonian cone drag coefficient ``2 sin^2(half-angle)`` divided by height.

    Rows of ``X1`` are (height in m, half-angle in degrees).
    """
    X1 = np.asarray(X1, dtype=float).reshape(-1, 2)
    h, a = X1[:, 0], np.deg2rad(X1[:, 1])
    if np.any(h <= 0):
        raise PhysicsError("cone height must be positive")
    return 2.0 * np.sin(a) ** 2 / h


def ballistic_range(P, params=HydroParams(), dt=None):
    """Horizontal range for rows (phi, speed in m/s, elevation in degrees).

    Negative ``phi`` (only produced by surrogate predictions) is treated as no drag.
    """
    P = np.asarray(P, dtype=float).reshape(-1, 3)
    dt = params.dt if dt is None else dt
    drag = params.drag_per_phi * np.maximum(P[:, 0], 0.0)
    # speed decays at rate 2 k |v|; keep RK4 well inside its stability region
    stiff = 2.0 * drag * np.abs(P[:, 1]) * dt
    if stiff.size and stiff.max() > 1.0:
        raise PhysicsError(f"time step {dt} s too coarse for drag {drag.max():.3g} 1/m "
                           f"(2 k v dt = {stiff.max():.2f} > 1)")
    out = _accel.ballistic_range(np.ascontiguousarray(drag), np.ascontiguousarray(P[:, 1]),
                                 np.ascontiguousarray(np.deg2rad(P[:, 2])), params.g, dt,
                                 params.t_max)
    if np.any(np.isnan(out)):
        raise PhysicsError(f"trajectory did not land within t_max={params.t_max} s")
    return out


def hydro_codes(params=HydroParams()):
    """Cone drag (code 1) feeding quadratic-drag ballistics (code 2), Matern 5/2 kernels."""
    dom1 = Box((params.height[0], params.half_angle_deg[0]),
               (params.height[1], params.half_angle_deg[1]))
    dom2 = Box((params.speed[0], params.elevation_deg[0]),
               (params.speed[1], params.elevation_deg[1]))
    # lowest code-1 output over the domain, used until observations calibrate the floor
    y1_low = float(cone_drag_over_height([[params.height[1], params.half_angle_deg[0]]])[0])
    floor = 1e-3 * y1_low
    return CodePair(
        code1=cone_drag_over_height,
        code2=lambda P: ballistic_range(P, params),
        domain1=dom1,
        domain2=dom2,
        basis1=TrendBasis((Constant(), Monomial(0, 1), ClippedReciprocal(1, 1e-12))),
        basis2=TrendBasis((Constant(), ClippedReciprocal(0, floor))),
        kernel1=KernelConfig(Family.MATERN52, (1.0, 1.0)),
        kernel2=KernelConfig(Family.MATERN52, (1.0, 1.0, 1.0)),
        phi1_min=floor,
        name="hydro",
        metadata={"phi1_min": floor},
    )


# ---------------------------------------------------------------------------
# Validation, blind box, error metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ValidationSet:
    inputs: np.ndarray
    outputs: np.ndarray

    @classmethod
    def draw(cls, codes, n=1000, seed=0):
        X = lhs(codes.nest_domain, n, seed)
        return cls(X, codes.nested(X))

    def __len__(self):
        return self.outputs.shape[0]

    def min_distance_to(self, X_train):
        X = np.asarray(X_train, dtype=float).reshape(-1, self.inputs.shape[1])
        d = np.sum((self.inputs[:, None, :] - X[None, :, :]) ** 2, axis=2)
        return float(np.sqrt(d.min()))

    def check_disjoint(self, X_train):
        if self.min_distance_to(X_train) <= 0.0:
            raise ValueError("validation set shares a point with the training design")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        d = self.inputs.shape[1]
        w.writerow([f"x{j}" for j in range(d)] + ["y"])
        for x, y in zip(self.inputs, self.outputs):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
        return buf.getvalue()


def blind_box_fit(data, kernel, search=None, fit=True):
    """Single constant-trend kriging model on (x_nest, y_nest), ignoring phi."""
    basis = TrendBasis.constant()
    if fit:
        kernel = fit_hyperparameters(data, basis, kernel, search or SearchConfig())
    return KrigingModel(data, basis, kernel)


def error_on_mean(validation, predicted_means):
    """``sum((y - mean)**2) / sum((y - ybar)**2)`` over the validation outputs."""
    y = validation.outputs if isinstance(validation, ValidationSet) else np.asarray(validation)
    mu = np.asarray(predicted_means, dtype=float)
    if y.shape != mu.shape:
        raise ValueError(f"{mu.shape[0]} predictions for {y.shape[0]} validation points")
    den = float(np.sum((y - y.mean()) ** 2))
    if den == 0.0:
        raise ZeroDivisionError("validation outputs are all identical")
    return float(np.sum((y - mu) ** 2)) / den


def initial_design(codes, n, seed, restarts=10):
    """Maximin LHS over X_1 x X_2."""
    return maximin_lhs(codes.nest_domain, n, seed, restarts=restarts)


__all__ = [
    "BETA1", "BETA2", "CodePair", "HydroParams", "PhysicsError", "ValidationSet",
    "analytical_codes", "analytical_y1", "analytical_y2", "ballistic_range", "blind_box_fit",
    "cone_drag_over_height", "error_on_mean", "hydro_codes", "initial_design",
]
