from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class MonteCarlo:
    n_samples: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("Monte-Carlo needs at least 2 samples")


@dataclass(frozen=True)
class GaussHermite:
    n_nodes: int = 64

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("Gauss-Hermite needs at least 1 node")


@dataclass(frozen=True)
class Analytic:
    pass


@dataclass(frozen=True)
class Linearized:
    pass


Strategy = Union[MonteCarlo, GaussHermite, Analytic, Linearized]


@dataclass(frozen=True, eq=False)
class NestedMoments:
    """First two moments of the nested predictor at a batch of query points.

    ``m1_se``/``m2_se`` are Monte-Carlo standard errors (``None`` otherwise).
    """

    m1: np.ndarray
    m2: np.ndarray
    m1_se: Optional[np.ndarray] = None
    m2_se: Optional[np.ndarray] = None

    @property
    def variance(self):
        return self.m2 - self.m1 ** 2

    def __getitem__(self, idx):
        pick = lambda a: None if a is None else a[idx]
        return NestedMoments(self.m1[idx], self.m2[idx], pick(self.m1_se), pick(self.m2_se))


def split_nested(X, d1, d2):
    """Split rows of X_nest = X_1 x X_2 into (X1, X2)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, d1 + d2)
    if X.shape[1] != d1 + d2:
        raise ValueError(f"nested points must have dimension {d1 + d2}")
    return X[:, :d1], X[:, d1:]


class NestedPredictor:
    """Predictor of ``y2(y1(x1), x2)`` from a code-1 and a code-2 kriging model.

    The first input coordinate of ``model2`` is the intermediary variable.
    """

    def __init__(self, model1, model2, strategy=None):
        if model2.dim < 1:
            raise ValueError("model2 needs the intermediary input as first coordinate")
        self.model1 = model1
        self.model2 = model2
        self.strategy = Linearized() if strategy is None else strategy
        self._analytic = None

    @property
    def d1(self):
        return self.model1.dim

    @property
    def d2(self):
        return self.model2.dim - 1

    def with_strategy(self, strategy):
        out = NestedPredictor(self.model1, self.model2, strategy)
        out._analytic = self._analytic
        return out

    def _inputs(self, x1, x2):
        X1 = np.asarray(x1, dtype=float).reshape(-1, self.d1)
        X2 = np.asarray(x2 if x2 is not None else np.zeros((X1.shape[0], 0)), dtype=float)
        X2 = X2.reshape(X1.shape[0], self.d2)
        return X1, X2

    def phi_law(self, x1):
        """Mean and variance of the code-1 predictor at the rows of ``x1``."""
        return self.model1.predict(np.asarray(x1, dtype=float).reshape(-1, self.d1))

    def moments(self, x1, x2=None):
        from . import analytic, linearized, mc

        X1, X2 = self._inputs(x1, x2)
        s = self.strategy
        if isinstance(s, Linearized):
            return linearized.LinearizedNestedModel(self.model1, self.model2).moments(X1, X2)
        mu, s2 = self.phi_law(X1)
        if isinstance(s, MonteCarlo):
            return mc.phi_law_moments_mc(self.model2, mu, s2, X2, s.n_samples, s.seed)
        if isinstance(s, GaussHermite):
            return mc.phi_law_moments_gh(self.model2, mu, s2, X2, s.n_nodes)
        if isinstance(s, Analytic):
            if self._analytic is None:
                self._analytic = analytic.AnalyticEngine(self.model2)
            return self._analytic.moments(mu, s2, X2)
        raise TypeError(f"unknown strategy {s!r}")

    def moments_nested(self, X):
        X1, X2 = split_nested(X, self.d1, self.d2)
        return self.moments(X1, X2)
