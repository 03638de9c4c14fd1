"""Sequential designs for two nested codes.

The integrated variance of the nested predictor is estimated with the
linearized Gaussian model over a fixed random integration set. A hypothetical
observation on code ``i`` only changes the posterior covariance of model
``i``; its mean is frozen at the current estimate (Kriging Believer), so

    V'(x) = C2'(p(x), p(x)) + g(x)**2 * C1'(x1, x1)

with ``p = (mean1(x1), x2)`` and ``g`` the slope of ``mean2`` in ``phi``
left unchanged.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _accel
from .gp import KrigingModel, SearchConfig, VarianceUpdater, fit_hyperparameters
from .nested import LinearizedNestedModel, Linearized, NestedPredictor

_UNINFORMATIVE = 1e-14
_IV_TOL = 1e-10


class DesignError(ValueError):
    pass


class DesignAborted(RuntimeError):
    """A true-code evaluation failed; ``history`` holds the completed steps."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


# ---------------------------------------------------------------------------
# Domains and Latin hypercubes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[lower, upper]``; zero dimensions are allowed."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.ravel(self.lower))
        hi = tuple(float(v) for v in np.ravel(self.upper))
        if len(lo) != len(hi):
            raise ValueError("lower and upper bounds differ in length")
        if not all(np.isfinite(lo + hi)):
            raise ValueError("box bounds must be finite")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def degenerate(self):
        return any(h <= l for l, h in zip(self.lower, self.upper))

    def scale(self, U):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return lo + (hi - lo) * U

    def contains(self, X, tol=0.0):
        X = np.asarray(X, dtype=float).reshape(-1, self.dim)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((X >= lo - tol) & (X <= hi + tol), axis=1)

    def __add__(self, other):
        return Box(self.lower + other.lower, self.upper + other.upper)


def _unit_lhs(n, d, rng):
    """One random LHS in the unit cube, a point drawn uniformly inside each cell."""
    perms = np.argsort(rng.uniform(size=(d, n)), axis=1).T
    return (perms + rng.uniform(size=(n, d))) / n


def lhs(domain, n, seed):
    """Plain (unoptimised) Latin hypercube over ``domain``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    return domain.scale(_unit_lhs(n, domain.dim, rng))


def min_distance(X):
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sum(diff * diff, axis=2)
    np.fill_diagonal(D, np.inf)
    return float(np.sqrt(D.min()))


def maximin_lhs(domain, n, seed, restarts=10, swaps_per_point=50):
    """Maximin Latin hypercube design over a box.

    Each of ``restarts`` random LHS draws is improved by random within-column
    swaps, kept only when they increase the minimum pairwise distance (in unit
    cube coordinates). Swaps keep every 1-D projection stratified.

    Parameters
    ----------
    domain : Box
        Box with positive volume.
    n : int
        Number of points, at least 2.
    seed : int or SeedSequence
    restarts : int
        Independent random starting designs.
    swaps_per_point : int
        Swap attempts per restart, per point.

    Returns
    -------
    ndarray of shape (n, domain.dim)
    """
    if n < 2:
        raise ValueError("maximin_lhs needs n >= 2")
    if domain.dim == 0 or domain.degenerate:
        raise DesignError("maximin_lhs needs a box with positive volume")
    if restarts < 1:
        raise ValueError("restarts must be positive")
    rng = np.random.default_rng(seed)
    d = domain.dim
    n_swaps = swaps_per_point * n
    best_U, best_d = None, -np.inf
    for _ in range(restarts):
        U = _unit_lhs(n, d, rng)
        cols = rng.integers(0, d, n_swaps)
        rows_a = rng.integers(0, n, n_swaps)
        rows_b = rng.integers(0, n, n_swaps)
        U, dmin = _accel.lhs_swap_optimize(U, cols, rows_a, rows_b)
        if dmin > best_d:
            best_U, best_d = U, dmin
    return domain.scale(best_U)


# ---------------------------------------------------------------------------
# Costs, candidates, state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    tau1: float = 1.0
    tau2: float = 1.0

    def __post_init__(self):
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("code costs must be strictly positive")

    def tau(self, code):
        return self.tau1 if code == 1 else self.tau2

    @property
    def chained(self):
        return self.tau1 + self.tau2


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Candidate points for one acquisition step.

    ``code2_candidates`` are rows ``(x1, x2)`` of X_1 x X_2; the code-2 input
    they stand for is ``(mean1(x1), x2)``.
    """

    code1_candidates: np.ndarray
    code2_candidates: np.ndarray
    chained_candidates: np.ndarray

    @classmethod
    def draw(cls, domain1, domain2, size, seed, codes=(1, 2, 3)):
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        s1, s2, s3 = ss.spawn(3)
        nest = domain1 + domain2
        empty1 = np.empty((0, domain1.dim))
        emptyn = np.empty((0, nest.dim))
        return cls(lhs(domain1, size, s1) if 1 in codes else empty1,
                   lhs(nest, size, s2) if 2 in codes else emptyn,
                   lhs(nest, size, s3) if 3 in codes else emptyn)


class DesignState:
    """Current models, integration set and cost bookkeeping of a sequential run.

    Parameters
    ----------
    data1, data2 : Dataset
        Observations of code 1 (inputs x1) and code 2 (inputs ``(phi, x2)``).
    basis1, basis2 : TrendBasis
    kernel1, kernel2 : KernelConfig
        Fitted kernels; they also serve as templates for refits.
    domain1, domain2 : Box
    costs : CostModel
    n_nest : int
        Size of the integration set.
    seed : int
        Seed of the integration set.
    search : SearchConfig
        Hyperparameter search used for refits.
    """

    def __init__(self, data1, data2, basis1, basis2, kernel1, kernel2, domain1, domain2,
                 costs=CostModel(), n_nest=1000, seed=0, search=None):
        self.basis1, self.basis2 = basis1, basis2
        self.domain1, self.domain2 = domain1, domain2
        self.costs = costs
        self.search = SearchConfig() if search is None else search
        self.integration_set = lhs(domain1 + domain2, n_nest, seed)
        self.history = DesignHistory()
        self.set_models(KrigingModel(data1, basis1, kernel1),
                        KrigingModel(data2, basis2, kernel2))

    def set_models(self, model1, model2):
        self.model1, self.model2 = model1, model2
        self._lin = LinearizedNestedModel(model1, model2)
        d1 = self.domain1.dim
        X1, X2 = self.integration_set[:, :d1], self.integration_set[:, d1:]
        P, grad, var1 = self._lin.trajectory(X1, X2)
        _, var2 = model2.predict(P)
        self._X1, self._P, self._g2 = X1, P, grad * grad
        self._var1, self._var2 = var1, var2

    @property
    def predictor(self):
        return NestedPredictor(self.model1, self.model2, Linearized())

    @property
    def d1(self):
        return self.domain1.dim

    def code2_inputs(self, X):
        """Believer-paired code-2 inputs ``(mean1(x1), x2)`` for rows of X_nest."""
        X = np.asarray(X, dtype=float).reshape(-1, self.d1 + self.domain2.dim)
        return np.column_stack([self.model1.mean(X[:, :self.d1]), X[:, self.d1:]])

    # reductions of the integrated variance, one per candidate
    def _reduction(self, model, targets, weights, base_var, cands):
        if cands.shape[0] == 0:
            return np.empty(0)
        _, c_nn = model.predict(cands)
        C = model.cov(targets, cands)
        info = c_nn > _UNINFORMATIVE * model.prior_variance
        safe = np.where(info, c_nn, 1.0)
        after = np.maximum(base_var[:, None] - C * C / safe, 0.0)
        red = weights @ (base_var[:, None] - after) / targets.shape[0]
        return np.where(info, red, 0.0)

    def reduction_code1(self, X1c):
        X1c = np.asarray(X1c, dtype=float).reshape(-1, self.d1)
        return self._reduction(self.model1, self._X1, self._g2, self._var1, X1c)

    def reduction_code2(self, Pc):
        Pc = np.asarray(Pc, dtype=float).reshape(-1, self.model2.dim)
        ones = np.ones(self._P.shape[0])
        return self._reduction(self.model2, self._P, ones, self._var2, Pc)


def integrated_variance(state, updater=None):
    """Mean linearized nested variance over the integration set.

    Parameters
    ----------
    state : DesignState
    updater : dict, optional
        ``{"code1": x1, "code2": (phi, x2)}`` (either key optional): hypothetical
        observations applied through ``variance_after_obs``.
    """
    updater = updater or {}
    var1, var2 = state._var1, state._var2
    if updater.get("code1") is not None:
        var1 = VarianceUpdater(state.model1, updater["code1"]).variance(state._X1)
    if updater.get("code2") is not None:
        var2 = VarianceUpdater(state.model2, updater["code2"]).variance(state._P)
    return float(np.mean(var2 + state._g2 * var1))


def _current_iv(state):
    return float(np.mean(state._var2 + state._g2 * state._var1))


def criterion_chained(state, candidates):
    """Chained I-optimal choice: argmin of the integrated variance after
    observing both codes at a candidate of X_1 x X_2.

    Returns
    -------
    point : ndarray
        The winning row of ``chained_candidates``.
    value : float
        Integrated variance after the hypothetical observations.
    """
    C = np.asarray(candidates.chained_candidates, dtype=float)
    if C.shape[0] == 0:
        raise DesignError("no chained candidates")
    red = state.reduction_code1(C[:, :state.d1]) + state.reduction_code2(state.code2_inputs(C))
    after = _current_iv(state) - red
    i = int(np.argmin(after))
    return C[i], float(after[i])


def criterion_best(state, candidates):
    """Best I-optimal choice: argmax over both codes of the integrated-variance
    decrease per unit cost.

    Returns
    -------
    code : int
        1 or 2.
    point : ndarray
        A row of ``code1_candidates`` (code 1) or ``code2_candidates`` (code 2).
    value : float
        Decrease of the integrated variance divided by the code cost.
    """
    C1 = np.asarray(candidates.code1_candidates, dtype=float).reshape(-1, state.d1)
    C2 = np.asarray(candidates.code2_candidates, dtype=float)
    if C1.shape[0] == 0 and C2.shape[0] == 0:
        raise DesignError("no candidates on either code")
    v1 = state.reduction_code1(C1) / state.costs.tau1
    v2 = state.reduction_code2(state.code2_inputs(C2)) / state.costs.tau2 if C2.shape[0] else v1[:0]
    i1 = int(np.argmax(v1)) if v1.size else -1
    i2 = int(np.argmax(v2)) if v2.size else -1
    if i2 < 0 or (i1 >= 0 and v1[i1] >= v2[i2]):
        return 1, C1[i1], float(v1[i1])
    return 2, C2[i2], float(v2[i2])


# ---------------------------------------------------------------------------
# History and the acquisition loop
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    step: int
    code: str          # "1", "2" or "1+2"
    point: tuple       # candidate coordinates in X_1, X_1 x X_2
    criterion: float
    iv_before: float
    iv_after: float    # predicted, hyperparameters frozen
    cumulative_cost: float
    n1: int
    n2: int


_FIELDS = ["step", "code", "point", "criterion", "iv_before", "iv_after",
           "cumulative_cost", "n1", "n2"]


@dataclass
class DesignHistory:
    records: list = field(default_factory=list)
    complete: bool = True

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def cumulative_cost(self):
        return self.records[-1].cumulative_cost if self.records else 0.0

    def count(self, code):
        return sum(code in r.code.split("+") for r in self.records)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_FIELDS)
        for r in self.records:
            row = asdict(r)
            row["point"] = ";".join(repr(float(v)) for v in r.point)
            w.writerow([row[k] if not isinstance(row[k], float) else repr(row[k])
                        for k in _FIELDS])
        return buf.getvalue()

    def to_json(self, config=None):
        recs = [dict(asdict(r), point=[float(v) for v in r.point]) for r in self.records]
        return json.dumps({"config": config, "complete": self.complete, "records": recs},
                          indent=2, sort_keys=True)


def _refit(data, basis, kernel, search, refit):
    if refit:
        kernel = fit_hyperparameters(data, basis, kernel,
                                     SearchConfig(**{**asdict(search),
                                                     "warm_start": kernel.lengthscales}))
    return KrigingModel(data, basis, kernel)


def run_sequential(state, codes, criterion, budget, refit_every=1, pool_size=200, seed=0,
                   callback: Optional[Callable] = None):
    """Acquire observations until the budget cannot pay for another one.

    Parameters
    ----------
    state : DesignState
        Modified in place; ``state.history`` gains one record per acquisition.
    codes : CodePair
        True code evaluators.
    criterion : {"chained", "best"}
    budget : float
        Cost available for acquisitions (the initial design is not counted).
    refit_every : int
        Hyperparameters are re-estimated every this many acquisitions; in
        between, kernels are kept and only the data change.
    pool_size : int
        Candidates per code and step, drawn by seeded LHS.
    seed : int
        Seed of the candidate pools.
    callback : callable, optional
        ``callback(state, record)`` after each acquisition.

    Returns
    -------
    DesignHistory
    """
    if criterion not in ("chained", "best"):
        raise ValueError(f"unknown criterion {criterion!r}")
    if refit_every < 1:
        raise ValueError("refit_every must be positive")
    costs = state.costs
    cheapest = costs.chained if criterion == "chained" else min(costs.tau1, costs.tau2)
    if budget < cheapest:
        raise DesignError(f"budget {budget} cannot pay for a single acquisition ({cheapest})")
    hist = state.history
    spent = hist.cumulative_cost
    step_seeds = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_acq = 0
    while True:
        left = budget - spent
        if criterion == "chained":
            allowed = (3,) if left >= costs.chained - 1e-12 else ()
        else:
            allowed = tuple(c for c in (1, 2) if left >= costs.tau(c) - 1e-12)
        if not allowed:
            break
        cands = CandidateSet.draw(state.domain1, state.domain2, pool_size,
                                  step_seeds.spawn(1)[0], allowed)
        iv0 = _current_iv(state)
        d1 = state.d1
        if criterion == "chained":
            point, iv1 = criterion_chained(state, cands)
            code, value, cost = "1+2", iv1, costs.chained
        else:
            c, point, value = criterion_best(state, cands)
            code, cost = str(c), costs.tau(c)
            iv1 = iv0 - value * cost
        if iv1 > iv0 + _IV_TOL * max(abs(iv0), 1.0):
            raise AssertionError(f"predicted integrated variance increased: {iv0} -> {iv1}")

        data1, data2 = state.model1.data, state.model2.data
        try:
            x1 = point[:d1]
            if code in ("1", "1+2"):
                y1 = float(np.ravel(codes.code1(x1.reshape(1, -1)))[0])
                data1 = data1.append(x1, y1)
            if code == "1+2":
                p = np.concatenate([[y1], point[d1:]])
            elif code == "2":
                p = state.code2_inputs(point)[0]
            if code in ("2", "1+2"):
                y2 = float(np.ravel(codes.code2(p.reshape(1, -1)))[0])
                data2 = data2.append(p, y2)
        except Exception as exc:
            hist.complete = False
            raise DesignAborted(f"code evaluation failed at step {len(hist)}: {exc}",
                                hist) from exc

        n_acq += 1
        refit = n_acq % refit_every == 0
        m1, m2 = state.model1, state.model2
        if data1 is not m1.data:
            m1 = _refit(data1, state.basis1, m1.kernel, state.search, refit)
        if data2 is not m2.data:
            m2 = _refit(data2, state.basis2, m2.kernel, state.search, refit)
        state.set_models(m1, m2)
        spent += cost
        rec = StepRecord(len(hist), code, tuple(float(v) for v in point), float(value),
                         iv0, float(iv1), float(spent), m1.n, m2.n)
        hist.append(rec)
        if callback is not None:
            callback(state, rec)
    return hist


def initial_state(codes, X_nest, kernel1, kernel2, costs=CostModel(), n_nest=1000, seed=0,
                  search=None):
    """Fit both models on a chained design over X_1 x X_2 and wrap them in a state."""
    search = SearchConfig() if search is None else search
    data1, data2 = codes.chained_data(X_nest)
    k1 = fit_hyperparameters(data1, codes.basis1, kernel1, search)
    k2 = fit_hyperparameters(data2, codes.basis2, kernel2, search)
    return DesignState(data1, data2, codes.basis1, codes.basis2, k1, k2, codes.domain1,
                       codes.domain2, costs, n_nest, seed, search)


__all__ = [
    "Box", "CandidateSet", "CostModel", "DesignAborted", "DesignError", "DesignHistory",
    "DesignState", "StepRecord", "criterion_best", "criterion_chained", "initial_state",
    "integrated_variance", "lhs", "maximin_lhs", "min_distance", "run_sequential",
]
