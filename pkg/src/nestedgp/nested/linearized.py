"""Gaussian approximation of the nested predictor by first-order expansion.

Expanding code 2 around the code-1 posterior mean gives a Gaussian process
with

    mean(x1, x2)        = mean2(mean1(x1), x2)
    cov((x1,x2),(x1',x2')) = cov2((mean1(x1), x2), (mean1(x1'), x2'))
                           + g(x1, x2) g(x1', x2') cov1(x1, x1'),

where ``g`` is the derivative of ``mean2`` along the intermediary input.
"""
import numpy as np

from ..kernels import Family
from .predictor import NestedMoments, split_nested

_DIFFERENTIABLE = (Family.GAUSSIAN, Family.MATERN52, Family.GAUSSIAN_DERIVATIVE)


class LinearizedNestedModel:

    def __init__(self, model1, model2):
        if model2.kernel.family not in _DIFFERENTIABLE:
            raise ValueError(f"{model2.kernel.family} is not differentiable along phi")
        self.model1 = model1
        self.model2 = model2

    @property
    def d1(self):
        return self.model1.dim

    @property
    def d2(self):
        return self.model2.dim - 1

    def trajectory(self, X1, X2):
        """Code-2 inputs along the mean trajectory, slopes, and code-1 variances."""
        X1 = np.asarray(X1, dtype=float).reshape(-1, self.d1)
        X2 = np.asarray(X2, dtype=float).reshape(X1.shape[0], self.d2)
        phi, var1 = self.model1.predict(X1)
        P = np.column_stack([phi, X2])
        grad = self.model2.mean_grad(P, 0)
        return P, grad, var1

    def mean(self, X1, X2):
        P, _, _ = self.trajectory(X1, X2)
        return self.model2.mean(P)

    def variance(self, X1, X2):
        P, grad, var1 = self.trajectory(X1, X2)
        _, var2 = self.model2.predict(P)
        return var2 + grad * grad * var1

    def cov(self, A1, A2, B1, B2):
        PA, gA, _ = self.trajectory(A1, A2)
        PB, gB, _ = self.trajectory(B1, B2)
        return (self.model2.cov(PA, PB)
                + np.outer(gA, gB) * self.model1.cov(np.reshape(A1, (-1, self.d1)),
                                                     np.reshape(B1, (-1, self.d1))))

    def moments(self, X1, X2):
        P, grad, var1 = self.trajectory(X1, X2)
        mean, var2 = self.model2.predict(P)
        var = var2 + grad * grad * var1
        return NestedMoments(mean, mean * mean + var)

    def moments_nested(self, X):
        return self.moments(*split_nested(X, self.d1, self.d2))


def linearized_phi_law_moments(model2, mu, s2, X2):
    """First-order moments when ``phi ~ N(mu, s2)`` is given directly."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    X2 = np.asarray(X2, dtype=float).reshape(mu.shape[0], -1)
    P = np.column_stack([mu, X2])
    mean, var2 = model2.predict(P)
    g = model2.mean_grad(P, 0)
    return NestedMoments(mean, mean * mean + var2 + g * g * np.asarray(s2, dtype=float))


def linearize(pred):
    return LinearizedNestedModel(pred.model1, pred.model2)
