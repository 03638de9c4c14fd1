"""Sampling and quadrature estimates of the nested-predictor moments.

With ``xi ~ N(0, 1)`` and the code-1 predictor at ``x1`` written
``mu1 + sigma1 * xi``,

    E[y]   = E[ mean2(mu1 + sigma1 xi, x2) ]
    E[y^2] = E[ mean2(...)^2 + var2(...) ]
"""
import numpy as np

from .predictor import NestedMoments

_CHUNK = 200_000


def _node_sums(model2, mu, s2, X2, xi, w):
    """Weighted sums over nodes of f1, f1**2, f2, f2**2 per query point.

    ``f1 = mean2(phi)`` and ``f2 = mean2(phi)**2 + var2(phi)`` at
    ``phi = mu + sd * xi``. Work is chunked so memory stays bounded for
    any number of nodes.
    """
    Q, n = mu.shape[0], xi.shape[0]
    sd = np.sqrt(np.maximum(s2, 0.0))
    out = np.zeros((4, Q))
    step = min(n, _CHUNK)
    rows = max(1, _CHUNK // step)
    for q in range(0, Q, rows):
        b = min(Q, q + rows)
        for a in range(0, n, step):
            x, ww = xi[a:a + step], w[a:a + step]
            P = np.empty(((b - q) * x.shape[0], 1 + X2.shape[1]))
            P[:, 0] = (mu[q:b, None] + sd[q:b, None] * x[None, :]).ravel()
            P[:, 1:] = np.repeat(X2[q:b], x.shape[0], axis=0)
            m, v = model2.predict(P)
            m = m.reshape(b - q, -1)
            f2 = m * m + v.reshape(b - q, -1)
            out[0, q:b] += m @ ww
            out[1, q:b] += (m * m) @ ww
            out[2, q:b] += f2 @ ww
            out[3, q:b] += (f2 * f2) @ ww
    return out


def phi_law_moments_mc(model2, mu, s2, X2, n_samples, seed):
    """Monte-Carlo moments; one standard-normal sample shared by all query points."""
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    mu, s2 = np.atleast_1d(mu), np.atleast_1d(s2)
    xi = np.random.default_rng(seed).standard_normal(n_samples)
    S = _node_sums(model2, mu, s2, X2, xi, np.full(n_samples, 1.0 / n_samples))
    corr = n_samples / (n_samples - 1.0)
    var1 = np.maximum(S[1] - S[0] ** 2, 0.0) * corr
    var2 = np.maximum(S[3] - S[2] ** 2, 0.0) * corr
    return NestedMoments(S[0], S[2], np.sqrt(var1 / n_samples), np.sqrt(var2 / n_samples))


def phi_law_moments_gh(model2, mu, s2, X2, n_nodes):
    """Gauss-Hermite quadrature (probabilists' weight) of the same integrals."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be at least 1")
    mu, s2 = np.atleast_1d(mu), np.atleast_1d(s2)
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_nodes)
    S = _node_sums(model2, mu, s2, X2, nodes, weights / np.sqrt(2.0 * np.pi))
    return NestedMoments(S[0], S[2])


def nested_moments_mc(pred, x1, x2=None):
    """Moments for a predictor whose strategy is MonteCarlo or GaussHermite."""
    from .predictor import GaussHermite, MonteCarlo

    if not isinstance(pred.strategy, (MonteCarlo, GaussHermite)):
        raise ValueError("nested_moments_mc needs a MonteCarlo or GaussHermite strategy")
    return pred.moments(x1, x2)
