"""Closed-form nested-predictor moments for Gaussian-class code-2 models.

When the code-2 covariance is of Gaussian class along the intermediary input
and every trend function is ``m_k(x2) * phi**p * exp(a*phi + b*phi**2)``,

    mean2(phi, x2)            = h' beta + r' alpha
    mean2**2 + var2           = k(0) + h' A_h h + r' A_c r + r' A_ch h

are sums of poly-exp terms in ``phi`` whose expectations under
``phi ~ N(mu1, var1)`` are exact.
"""
import numpy as np
from scipy import sparse

from ..kernels import GAUSSIAN_CLASS, factor_1d, kernel_as_poly_exp
from ..polyexp import PolyExpSum, concat, gaussian_term_means, pairwise_products
from .predictor import Analytic, NestedMoments

_QUERY_CHUNK = 256


class AnalyticUnavailable(ValueError):
    """The code-2 model does not satisfy the closed-form preconditions."""


def _owner_matrix(owner, n_owner):
    n = owner.shape[0]
    return sparse.csr_matrix((np.ones(n), (np.arange(n), owner)), shape=(n, n_owner))


class AnalyticEngine:
    """Precomputed term structure for one code-2 model."""

    def __init__(self, model2):
        k = model2.kernel
        if k.family not in GAUSSIAN_CLASS:
            raise AnalyticUnavailable(
                f"closed-form moments need a Gaussian-class kernel, got {k.family.value}")
        funcs = model2.basis.functions
        bad = [f.name for f in funcs if f.poly_exp is None]
        if bad:
            raise AnalyticUnavailable(f"trend functions not in poly-exp form: {bad}")
        self.model2 = model2
        X = model2.data.inputs
        self.phi_obs = X[:, 0]
        self.x2_obs = X[:, 1:]
        N, M = X.shape[0], len(funcs)
        self.N, self.M = N, M

        P0 = kernel_as_poly_exp(k, 0)
        self.J = len(P0)
        self.kern_terms = concat(P0.with_shift(s) for s in self.phi_obs)
        self.trend_terms = concat(PolyExpSum.term(1.0, 0.0, *f.poly_exp[:3]) for f in funcs)
        self.factors = [f.poly_exp[3] for f in funcs]

        kk, kk_owner = pairwise_products(self.kern_terms, self.kern_terms)
        NJ = N * self.J
        a, b = kk_owner // NJ, kk_owner % NJ
        self.kk = kk
        self.S_kk = _owner_matrix((a // self.J) * N + b // self.J, N * N)
        tt, tt_owner = pairwise_products(self.trend_terms, self.trend_terms)
        self.tt = tt
        self.S_tt = _owner_matrix(tt_owner, M * M)
        kt, kt_owner = pairwise_products(self.kern_terms, self.trend_terms)
        self.kt = kt
        self.S_kt = _owner_matrix((kt_owner // M // self.J) * M + kt_owner % M, N * M)

    def _x2_parts(self, X2):
        """Trend factors m_k(x2) (Q, M) and x2 kernel factors (Q, N)."""
        Q = X2.shape[0]
        m = np.column_stack([np.ones(Q) if f is None else f(X2) for f in self.factors])
        L = np.ones((Q, self.N))
        cfg = self.model2.kernel
        for j in range(X2.shape[1]):
            L *= factor_1d(cfg, X2[:, None, j] - self.x2_obs[None, :, j], j + 1)
        return m, L

    def _expect(self, mu, s2, terms, S=None):
        E = gaussian_term_means(mu, s2, terms)
        return E if S is None else np.asarray((S.T @ E.T).T)

    def moments(self, mu, s2, X2):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        s2 = np.maximum(np.atleast_1d(np.asarray(s2, dtype=float)), 0.0)
        X2 = np.asarray(X2, dtype=float).reshape(mu.shape[0], -1)
        m1 = np.empty(mu.shape[0])
        m2 = np.empty(mu.shape[0])
        for a in range(0, mu.shape[0], _QUERY_CHUNK):
            sl = slice(a, a + _QUERY_CHUNK)
            m1[sl], m2[sl] = self._moments_block(mu[sl], s2[sl], X2[sl])
        return NestedMoments(m1, m2)

    def _moments_block(self, mu, s2, X2):
        model = self.model2
        sig2 = model.kernel.variance
        N, M, J = self.N, self.M, self.J
        Q = mu.shape[0]
        mfac, L = self._x2_parts(X2)

        Et = self._expect(mu, s2, self.trend_terms)                        # (Q, M)
        Ek = self._expect(mu, s2, self.kern_terms).reshape(Q, N, J).sum(-1)  # (Q, N)
        m1 = (Et * mfac) @ model.beta + sig2 * (Ek * L) @ model.alpha

        Ett = self._expect(mu, s2, self.tt, self.S_tt).reshape(Q, M, M)
        Ekk = self._expect(mu, s2, self.kk, self.S_kk).reshape(Q, N, N)
        Ekt = self._expect(mu, s2, self.kt, self.S_kt).reshape(Q, N, M)
        t_h = np.einsum("qkl,kl,qk,ql->q", Ett, model.A_h, mfac, mfac)
        t_c = sig2 ** 2 * np.einsum("qij,ij,qi,qj->q", Ekk, model.A_c, L, L)
        t_ch = sig2 * np.einsum("qik,ik,qi,qk->q", Ekt, model.A_ch, L, mfac)
        m2 = model.prior_variance + t_h + t_c + t_ch
        return m1, m2


def nested_moments_analytic(pred, x1, x2=None):
    """Exact moments for a predictor satisfying the closed-form preconditions."""
    if not isinstance(pred.strategy, Analytic):
        pred = pred.with_strategy(Analytic())
    return pred.moments(x1, x2)
