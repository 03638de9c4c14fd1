"""Universal kriging for a single deterministic code.

The trend coefficients carry an improper uniform prior and are integrated
out, which gives the generalised-least-squares form

    mean(x) = h(x)' beta + r(x)' R^-1 (y - H beta),   beta = (H' R^-1 H)^-1 H' R^-1 y
    cov(x, x') = k(x, x') - r(x)' R^-1 r(x') + u(x)' (H' R^-1 H)^-1 u(x'),
    u(x) = h(x) - H' R^-1 r(x).
"""
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import kernels as kern


class KrigingError(RuntimeError):
    """Numerical breakdown in a kriging computation."""


class RankDeficientBasisError(KrigingError):
    pass


class FactorizationError(KrigingError):
    pass


# ---------------------------------------------------------------------------
# Trend basis functions
# ---------------------------------------------------------------------------

class BasisFunction:
    """A scalar function of the input point, evaluated row-wise on (N, d) arrays.

    ``poly_exp`` is either ``None`` or a tuple ``(power, lin, quad, factor)``
    declaring the separable form ``factor(x[1:]) * x[0]**power *
    exp(lin*x[0] + quad*x[0]**2)``; ``factor`` is ``None`` for a constant 1.
    """

    name = "f"
    poly_exp = None

    def __call__(self, X):
        raise NotImplementedError

    def grad(self, X, dim=0):
        raise NotImplementedError

    def __repr__(self):
        return self.name


class Constant(BasisFunction):
    name = "1"
    poly_exp = (0, 0.0, 0.0, None)

    def __call__(self, X):
        return np.ones(np.shape(X)[0])

    def grad(self, X, dim=0):
        return np.zeros(np.shape(X)[0])


class Monomial(BasisFunction):
    def __init__(self, dim, power):
        self.dim, self.power = int(dim), int(power)
        self.name = f"x{self.dim}^{self.power}"

    @property
    def poly_exp(self):
        if self.dim == 0:
            return (self.power, 0.0, 0.0, None)
        return (0, 0.0, 0.0, Monomial(self.dim - 1, self.power))

    def __call__(self, X):
        return np.asarray(X)[:, self.dim] ** self.power

    def grad(self, X, dim=0):
        X = np.asarray(X)
        if dim != self.dim or self.power == 0:
            return np.zeros(X.shape[0])
        return self.power * X[:, self.dim] ** (self.power - 1)


class PolyExp(BasisFunction):
    """``factor(x[1:]) * x0**power * exp(lin*x0 + quad*x0**2)``."""

    def __init__(self, power, lin=0.0, quad=0.0, factor=None):
        if int(power) != power or power < 0:
            raise ValueError("power must be a non-negative integer")
        self.power, self.lin, self.quad = int(power), float(lin), float(quad)
        self.factor = factor
        self.name = f"x0^{self.power}*exp({self.lin:g}x0{self.quad:+g}x0^2)"
        if factor is not None:
            self.name += f"*[{factor.name}]"

    @property
    def poly_exp(self):
        return (self.power, self.lin, self.quad, self.factor)

    def _g(self, t):
        return t ** self.power * np.exp(self.lin * t + self.quad * t * t)

    def _m(self, X):
        return np.ones(X.shape[0]) if self.factor is None else self.factor(X[:, 1:])

    def __call__(self, X):
        X = np.asarray(X)
        return self._m(X) * self._g(X[:, 0])

    def grad(self, X, dim=0):
        X = np.asarray(X)
        t = X[:, 0]
        if dim == 0:
            e = np.exp(self.lin * t + self.quad * t * t)
            dp = self.power * t ** (self.power - 1) if self.power > 0 else 0.0
            return self._m(X) * e * (dp + t ** self.power * (self.lin + 2 * self.quad * t))
        if self.factor is None:
            return np.zeros(X.shape[0])
        return self.factor.grad(X[:, 1:], dim - 1) * self._g(t)


class ClippedReciprocal(BasisFunction):
    """``1 / max(x[dim], floor)``; right-sided derivative at the kink."""

    def __init__(self, dim, floor):
        if floor <= 0:
            raise ValueError("floor must be positive")
        self.dim, self.floor = int(dim), float(floor)
        self.name = f"1/max(x{self.dim},{self.floor:g})"

    def __call__(self, X):
        return 1.0 / np.maximum(np.asarray(X)[:, self.dim], self.floor)

    def grad(self, X, dim=0):
        X = np.asarray(X)
        if dim != self.dim:
            return np.zeros(X.shape[0])
        t = X[:, self.dim]
        return np.where(t >= self.floor, -1.0 / np.maximum(t, self.floor) ** 2, 0.0)


@dataclass(frozen=True)
class TrendBasis:
    functions: tuple

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.functions:
            raise ValueError("a trend basis needs at least one function")

    @classmethod
    def constant(cls):
        return cls((Constant(),))

    @classmethod
    def polynomial(cls, degree, dim=0):
        return cls((Constant(),) + tuple(Monomial(dim, p) for p in range(1, degree + 1)))

    def __len__(self):
        return len(self.functions)

    @property
    def names(self):
        return [f.name for f in self.functions]

    @property
    def separable(self):
        return all(f.poly_exp is not None for f in self.functions)

    def evaluate(self, X):
        X = np.asarray(X, dtype=float)
        return np.column_stack([f(X) for f in self.functions])

    def grad(self, X, dim=0):
        X = np.asarray(X, dtype=float)
        return np.column_stack([np.broadcast_to(f.grad(X, dim), (X.shape[0],))
                                for f in self.functions])


# ---------------------------------------------------------------------------
# Data and model
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.array(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.array(self.outputs, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError("inputs must be (N, d) with one output per row")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("dataset entries must be finite")
        if np.unique(X, axis=0).shape[0] != X.shape[0]:
            raise ValueError("dataset contains duplicated input rows")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    def __len__(self):
        return self.outputs.shape[0]

    @property
    def dim(self):
        return self.inputs.shape[1]

    def append(self, x, y):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return Dataset(np.vstack([self.inputs, x]), np.concatenate([self.outputs, np.atleast_1d(y)]))


def _as_query(model, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1) if x.size == model.dim else x.reshape(-1, model.dim)
    if x.ndim != 2 or x.shape[1] != model.dim:
        raise ValueError(f"query points must have dimension {model.dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("query points must be finite")
    return x


class KrigingModel:
    """A fitted universal-kriging posterior for one code.

    Attributes
    ----------
    beta : ndarray (M,)
        GLS trend coefficients (the ``v_h`` vector of the mean decomposition).
    alpha : ndarray (N,)
        ``R^-1 (y - H beta)`` (the ``v_c`` vector).
    A_h, A_c, A_ch : ndarray
        Quadratic-form matrices with
        ``mean(x)**2 + var(x) = k(x, x) + h'A_h h + r'A_c r + r'A_ch h``.
    """

    def __init__(self, data, basis, kernel):
        self.data = data
        self.basis = basis
        self.kernel = kernel
        X, y = data.inputs, data.outputs
        if kernel.dim != data.dim:
            raise ValueError(f"kernel dimension {kernel.dim} != data dimension {data.dim}")
        H = basis.evaluate(X)
        n, m = H.shape
        if n < m:
            raise RankDeficientBasisError(
                f"{n} observations cannot identify {m} trend coefficients")
        R = kern.gram(kernel, X)
        try:
            self._chol = linalg.cho_factor(R, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise FactorizationError(
                "Gram matrix is not numerically positive definite; increase the nugget") from exc
        L = self._chol[0]
        F = linalg.solve_triangular(L, H, lower=True, check_finite=False)
        G = F.T @ F
        sv = np.linalg.svd(F, compute_uv=False)
        if sv[-1] <= 1e-12 * sv[0]:
            # name the column with the smallest contribution to the span
            _, _, piv = linalg.qr(F, pivoting=True, mode="economic")
            raise RankDeficientBasisError(
                f"trend design matrix is rank deficient; offending basis function: "
                f"{basis.functions[piv[-1]].name}")
        self._gchol = linalg.cho_factor(G, lower=True, check_finite=False)
        Rinv_y = linalg.cho_solve(self._chol, y, check_finite=False)
        Rinv_H = linalg.cho_solve(self._chol, H, check_finite=False)
        self.beta = linalg.cho_solve(self._gchol, H.T @ Rinv_y, check_finite=False)
        self.alpha = Rinv_y - Rinv_H @ self.beta
        self.H = H
        self._F = F
        self._Rinv_H = Rinv_H
        self._Ginv = linalg.cho_solve(self._gchol, np.eye(m), check_finite=False)
        self._Rinv = linalg.cho_solve(self._chol, np.eye(n), check_finite=False)
        P = Rinv_H @ self._Ginv
        self.A_h = np.outer(self.beta, self.beta) + self._Ginv
        self.A_c = np.outer(self.alpha, self.alpha) - self._Rinv + P @ Rinv_H.T
        self.A_ch = 2.0 * np.outer(self.alpha, self.beta) - 2.0 * P
        # dense triangular inverses turn batched prediction into plain matmuls
        self._Linv = linalg.solve_triangular(L, np.eye(n), lower=True, check_finite=False)
        self._Lginv = linalg.solve_triangular(self._gchol[0], np.eye(m), lower=True,
                                              check_finite=False)
        self._k0 = None
        self._neg_var_warned = False

    @property
    def dim(self):
        return self.data.dim

    @property
    def n(self):
        return len(self.data)

    @property
    def prior_variance(self):
        """k(x, x), nugget included (identical for every x)."""
        if self._k0 is None:
            z = np.zeros((1, self.dim))
            self._k0 = float(kern.gram(self.kernel, z, z)[0, 0])
        return self._k0

    # -- predictions --------------------------------------------------------

    def _parts(self, X):
        r = kern.gram(self.kernel, X, self.data.inputs)
        h = self.basis.evaluate(X)
        W = self._Linv @ r.T
        Z = self._Lginv @ (h.T - self._F.T @ W)
        return r, h, W, Z

    def mean(self, x):
        X = _as_query(self, x)
        r = kern.gram(self.kernel, X, self.data.inputs)
        return self.basis.evaluate(X) @ self.beta + r @ self.alpha

    def _clamp(self, var):
        low = var.min(initial=0.0)
        if low < -1e-8 * self.kernel.variance and not self._neg_var_warned:
            warnings.warn(f"posterior variance {low:.3g} clamped to 0", RuntimeWarning)
            self._neg_var_warned = True
        return np.maximum(var, 0.0)

    def predict(self, x):
        """Posterior mean and variance at the rows of ``x``."""
        X = _as_query(self, x)
        r, h, W, Z = self._parts(X)
        mean = h @ self.beta + r @ self.alpha
        var = (self.prior_variance - np.einsum("ij,ij->j", W, W)
               + np.einsum("ij,ij->j", Z, Z))
        return mean, self._clamp(var)

    def cov(self, a, b):
        """Posterior covariance matrix between the rows of ``a`` and ``b``."""
        A = _as_query(self, a)
        B = _as_query(self, b)
        _, _, WA, ZA = self._parts(A)
        _, _, WB, ZB = self._parts(B)
        return kern.gram(self.kernel, A, B) - WA.T @ WB + ZA.T @ ZB

    def mean_grad(self, x, dim=0):
        """Derivative of the posterior mean with respect to coordinate ``dim``."""
        X = _as_query(self, x)
        dr = kern.gram_grad_first(self.kernel, X, self.data.inputs, dim)
        return self.basis.grad(X, dim) @ self.beta + dr @ self.alpha

    # -- leave-one-out -------------------------------------------------------

    def loo(self):
        """Closed-form LOO means and variances (trend re-estimated per fold)."""
        Q = self._Rinv - self._Rinv_H @ self._Ginv @ self._Rinv_H.T
        q = np.diagonal(Q)
        resid = (Q @ self.data.outputs) / q
        return self.data.outputs - resid, 1.0 / q

    def loo_log_pred_prob(self):
        mean, var = self.loo()
        if np.any(var <= 0) or not np.all(np.isfinite(var)):
            raise KrigingError("non-positive leave-one-out variance; increase the nugget")
        e = self.data.outputs - mean
        return float(np.sum(-0.5 * np.log(2 * np.pi * var) - 0.5 * e * e / var))

    def variance_after_obs(self, x_new):
        return VarianceUpdater(self, x_new)

    def summary(self):
        R = kern.gram(self.kernel, self.data.inputs)
        return {
            "n": self.n,
            "dim": self.dim,
            "basis": self.basis.names,
            "kernel": self.kernel.to_dict(),
            "beta": self.beta.tolist(),
            "loo_log_pred_prob": self.loo_log_pred_prob(),
            "condition_number": float(np.linalg.cond(R)),
        }


class VarianceUpdater:
    """Posterior covariance as if ``x_new`` had also been observed.

    The update does not depend on the value that would be observed.
    """

    def __init__(self, model, x_new):
        self.model = model
        self.x_new = _as_query(model, x_new)
        if self.x_new.shape[0] != 1:
            raise ValueError("variance_after_obs takes a single point")
        self._c_nn = float(model.cov(self.x_new, self.x_new)[0, 0])
        if self._c_nn < -1e-8 * model.kernel.variance:
            raise KrigingError("negative posterior variance at the new point")
        self._informative = self._c_nn > 1e-14 * model.prior_variance
        resid = self.variance(self.x_new)[0]
        if abs(resid) > 1e-6 * model.prior_variance:
            raise KrigingError(f"updated variance at the new point is {resid:.3g}, expected ~0")

    def cov(self, a, b):
        C = self.model.cov(a, b)
        if not self._informative:
            return C
        ca = self.model.cov(a, self.x_new)[:, 0]
        cb = self.model.cov(b, self.x_new)[:, 0]
        return C - np.outer(ca, cb) / self._c_nn

    def variance(self, x):
        _, var = self.model.predict(x)
        if not self._informative:
            return var
        c = self.model.cov(x, self.x_new)[:, 0]
        return np.maximum(var - c * c / self._c_nn, 0.0)


def uk_fit(data, basis, kernel):
    return KrigingModel(data, basis, kernel)


def uk_predict(model, x):
    mean, var = model.predict(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))
    return float(mean[0]), float(var[0])


def uk_cov(model, x, xp):
    return float(model.cov(np.reshape(x, (1, -1)), np.reshape(xp, (1, -1)))[0, 0])


def uk_mean_grad_phi1(model, phi1, x2=()):
    x = np.concatenate([[float(phi1)], np.ravel(x2)]).reshape(1, -1)
    return float(model.mean_grad(x, 0)[0])


def loo_log_pred_prob(model):
    return model.loo_log_pred_prob()


def variance_after_obs(model, x_new):
    return VarianceUpdater(model, x_new)


# ---------------------------------------------------------------------------
# Hyperparameter estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    """Multi-start Nelder-Mead over log-lengthscales.

    Bounds are ``[lower, upper] * input range`` per dimension. The variance is
    profiled out (its LOO-optimal value is closed form for a fixed lengthscale
    vector) and the nugget is ``nugget_ratio * variance``.

    The LOO surface can have a narrow peak between flat plateaus, so
    ``n_screen`` seeded log-uniform points are scored first and the random
    starts are the best of them.
    """

    n_starts: int = 10
    n_screen: int = 100
    lower: float = 1e-2
    upper: float = 1e2
    nugget_ratio: float = 1e-6
    max_evals: int = 400
    seed: int = 0
    warm_start: tuple = field(default=None)


def _range_scale(X):
    span = np.ptp(X, axis=0)
    return np.where(span > 0, span, 1.0)


def _loo_core(X, y, H, cfg):
    """LOO means and variances without building a full model."""
    R = kern.gram(cfg, X)
    c = linalg.cho_factor(R, lower=True, check_finite=False)
    Rinv = linalg.cho_solve(c, np.eye(X.shape[0]), check_finite=False)
    Rinv_H = Rinv @ H
    G = H.T @ Rinv_H
    Q = Rinv - Rinv_H @ np.linalg.solve(G, Rinv_H.T)
    q = np.diagonal(Q)
    return y - (Q @ y) / q, 1.0 / q


def _profiled_loo(data, basis, template, lengthscales, ratio, H=None):
    """LOO log predictive probability with the variance at its optimum."""
    cfg = template.replace(lengthscales=tuple(lengthscales), variance=1.0, nugget=ratio)
    H = basis.evaluate(data.inputs) if H is None else H
    mean, var0 = _loo_core(data.inputs, data.outputs, H, cfg)
    if np.any(var0 <= 0) or not np.all(np.isfinite(var0)):
        raise KrigingError("non-positive leave-one-out variance")
    e = data.outputs - mean
    s2 = max(float(np.mean(e * e / var0)), 1e-300)
    var = s2 * var0
    score = float(np.sum(-0.5 * np.log(2 * np.pi * var) - 0.5 * e * e / var))
    return score, s2


def fit_hyperparameters(data, basis, kernel_template, search=SearchConfig()):
    """Maximise the LOO log predictive probability; returns a ``KernelConfig``."""
    if not (0 < search.lower < search.upper and np.isfinite(search.upper)):
        raise ValueError("search bounds must be positive, finite and ordered")
    d = data.dim
    scale = _range_scale(data.inputs)
    lo, hi = np.log(search.lower), np.log(search.upper)
    rng = np.random.default_rng(search.seed)
    bounds = [(lo, hi)] * d
    H = basis.evaluate(data.inputs)
    if len(data) <= H.shape[1]:
        raise RankDeficientBasisError(f"leave-one-out needs more than {H.shape[1]} observations "
                                      f"for this trend basis, got {len(data)}")

    def objective(u):
        u = np.clip(u, lo, hi)
        try:
            score, _ = _profiled_loo(data, basis, kernel_template, np.exp(u) * scale,
                                     search.nugget_ratio, H)
        except (KrigingError, linalg.LinAlgError, FloatingPointError):
            return 1e300
        return -score if np.isfinite(score) else 1e300

    n_rand = max(search.n_starts - 1, 0)
    pool = lo + (hi - lo) * rng.uniform(size=(max(search.n_screen, n_rand), d))
    if n_rand and pool.shape[0] > n_rand:
        f = np.array([objective(u) for u in pool])
        pool = pool[np.argsort(f, kind="stable")]
    starts = [np.full(d, np.log(0.3))] + list(pool[:n_rand])
    if search.warm_start is not None:
        starts.insert(0, np.log(np.asarray(search.warm_start, dtype=float) / scale))

    best_u, best_f = None, np.inf
    for u0 in starts:
        u0 = np.clip(u0, lo, hi)
        res = optimize.minimize(objective, u0, method="Nelder-Mead", bounds=bounds,
                                options={"maxfev": search.max_evals, "xatol": 1e-4,
                                         "fatol": 1e-8})
        if res.fun < best_f:
            best_u, best_f = np.clip(res.x, lo, hi), res.fun
    if best_u is None or best_f >= 1e300:
        raise FactorizationError("every hyperparameter start failed to factorise the Gram matrix")
    ls = np.exp(best_u) * scale
    _, s2 = _profiled_loo(data, basis, kernel_template, ls, search.nugget_ratio)
    return kernel_template.replace(lengthscales=tuple(ls), variance=s2,
                                   nugget=search.nugget_ratio * s2)
