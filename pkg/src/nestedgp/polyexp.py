"""Sums of polynomial-times-Gaussian-exponential terms and their Gaussian means.

A :class:`PolyExpSum` represents

    sum_t coeff_t * (x - shift_t)**power_t * exp(lin_t*(x - shift_t) + quad_t*(x - shift_t)**2)

This family is closed under products, and its expectation under a normal law
is available in closed form whenever ``1 - 2*quad*sigma2 > 0``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import comb


class IntegrabilityError(ValueError):
    """A term's Gaussian expectation diverges (``1 - 2*quad*sigma2 <= 0``)."""

    def __init__(self, term_index, quad, sigma2):
        self.term_index = int(term_index)
        self.quad = float(quad)
        self.sigma2 = float(sigma2)
        super().__init__(
            f"term {self.term_index} (quad={self.quad:.6g}) is not integrable "
            f"under variance {self.sigma2:.6g}: requires 1 - 2*quad*sigma2 > 0")


@dataclass(frozen=True, eq=False)
class PolyExpSum:
    coeff: np.ndarray
    shift: np.ndarray
    power: np.ndarray
    lin: np.ndarray
    quad: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(a, dtype=float)) for a in
                (self.coeff, self.shift, self.lin, self.quad)]
        power = np.atleast_1d(np.asarray(self.power))
        n = arrs[0].shape[0]
        if any(a.shape != (n,) for a in arrs) or power.shape != (n,):
            raise ValueError("PolyExpSum fields must be 1-D arrays of equal length")
        if np.any(power < 0) or np.any(power != np.round(power)):
            raise ValueError("powers must be non-negative integers")
        if not np.all(np.isfinite(arrs[0])):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeff", arrs[0])
        object.__setattr__(self, "shift", arrs[1])
        object.__setattr__(self, "power", power.astype(np.int64))
        object.__setattr__(self, "lin", arrs[2])
        object.__setattr__(self, "quad", arrs[3])

    @classmethod
    def term(cls, coeff=1.0, shift=0.0, power=0, lin=0.0, quad=0.0):
        return cls([coeff], [shift], [power], [lin], [quad])

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls(z, z, np.zeros(0, dtype=np.int64), z, z)

    def __len__(self):
        return self.coeff.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        t = x[..., None] - self.shift
        vals = self.coeff * t ** self.power * np.exp(self.lin * t + self.quad * t * t)
        return vals.sum(axis=-1)

    def __add__(self, other):
        return concat([self, other])

    def __mul__(self, other):
        if isinstance(other, PolyExpSum):
            return poly_exp_product(self, other)
        return PolyExpSum(self.coeff * other, self.shift, self.power, self.lin, self.quad)

    __rmul__ = __mul__

    def with_shift(self, shift):
        """Same terms, translated so that each term is centred at ``shift``."""
        return PolyExpSum(self.coeff, np.full(len(self), float(shift)), self.power,
                          self.lin, self.quad)

    def recentred(self, centre=0.0):
        """Exact re-expansion of every term around a common shift ``centre``."""
        c = np.full(len(self), float(centre))
        expanded, _ = _recentre(self, c, np.arange(len(self)))
        return expanded

    def simplified(self):
        """Merge terms sharing (shift, power, lin, quad)."""
        if len(self) == 0:
            return self
        keys = np.stack([self.shift, self.power.astype(float), self.lin, self.quad], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        coeff = np.bincount(inv.ravel(), weights=self.coeff, minlength=len(uniq))
        return PolyExpSum(coeff, uniq[:, 0], uniq[:, 1].astype(np.int64), uniq[:, 2], uniq[:, 3])


def concat(sums):
    sums = list(sums)
    if not sums:
        return PolyExpSum.empty()
    return PolyExpSum(*(np.concatenate([getattr(s, f) for s in sums])
                        for f in ("coeff", "shift", "power", "lin", "quad")))


def _recentre(p, centres, owner):
    """Binomially expand term t of ``p`` around ``centres[t]``.

    Returns the expanded sum and, for each produced term, ``owner[t]`` of the
    term it came from.
    """
    delta = centres - p.shift
    const = np.exp(p.lin * delta + p.quad * delta * delta)
    new_lin = p.lin + 2.0 * p.quad * delta
    coeffs, powers, owners, lins, quads, shifts = [], [], [], [], [], []
    maxp = int(p.power.max()) if len(p) else 0
    for k in range(maxp + 1):
        m = p.power >= k
        if not np.any(m):
            continue
        pw = p.power[m]
        c = p.coeff[m] * const[m] * comb(pw, k) * delta[m] ** (pw - k)
        # exact zeros come from k < power with delta == 0
        nz = c != 0.0
        m[m] = nz
        c = c[nz]
        if not np.any(m):
            continue
        coeffs.append(c)
        powers.append(np.full(m.sum(), k))
        owners.append(owner[m])
        lins.append(new_lin[m])
        quads.append(p.quad[m])
        shifts.append(centres[m])
    if not coeffs:
        return PolyExpSum.empty(), np.zeros(0, dtype=np.int64)
    out = PolyExpSum(np.concatenate(coeffs), np.concatenate(shifts),
                     np.concatenate(powers), np.concatenate(lins), np.concatenate(quads))
    return out, np.concatenate(owners)


def _pair_centres(s1, q1, s2, q2):
    """Common expansion point for pairwise products.

    The quadratic-weighted centre keeps the re-expansion constants bounded for
    two decaying Gaussian factors; other combinations expand around 0.
    """
    qs = q1 + q2
    both_decay = (q1 <= 0.0) & (q2 <= 0.0) & (qs < 0.0)
    safe = np.where(both_decay, qs, 1.0)
    c = np.where(both_decay, (q1 * s1 + q2 * s2) / safe, 0.0)
    same = (q1 == 0.0) & (q2 == 0.0) & (s1 == s2)
    return np.where(same, s1, c)


def pairwise_products(p, q):
    """All products ``p_i * q_j`` as one flat sum.

    Returns ``(terms, owner)`` where ``owner[t] = i * len(q) + j`` identifies
    the term pair each output term belongs to. Output terms are sorted by owner.
    """
    n1, n2 = len(p), len(q)
    I, J = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    I, J = I.ravel(), J.ravel()
    c = _pair_centres(p.shift[I], p.quad[I], q.shift[J], q.quad[J])
    pe, po = _recentre(PolyExpSum(p.coeff[I], p.shift[I], p.power[I], p.lin[I], p.quad[I]),
                       c, np.arange(I.size))
    qe, qo = _recentre(PolyExpSum(q.coeff[J], q.shift[J], q.power[J], q.lin[J], q.quad[J]),
                       c, np.arange(I.size))
    # join expanded pieces that share the same pair
    order_p = np.argsort(po, kind="stable")
    order_q = np.argsort(qo, kind="stable")
    cnt_p = np.bincount(po, minlength=I.size)
    cnt_q = np.bincount(qo, minlength=I.size)
    start_p = np.concatenate([[0], np.cumsum(cnt_p)[:-1]])
    start_q = np.concatenate([[0], np.cumsum(cnt_q)[:-1]])
    pair = np.repeat(np.arange(I.size), cnt_p * cnt_q)
    # position of each combination inside its pair block
    offs = np.arange(pair.size) - np.repeat(np.cumsum(cnt_p * cnt_q) - cnt_p * cnt_q, cnt_p * cnt_q)
    ia = order_p[start_p[pair] + offs // cnt_q[pair]]
    ib = order_q[start_q[pair] + offs % cnt_q[pair]]
    terms = PolyExpSum(pe.coeff[ia] * qe.coeff[ib], pe.shift[ia],
                       pe.power[ia] + qe.power[ib], pe.lin[ia] + qe.lin[ib],
                       pe.quad[ia] + qe.quad[ib])
    owner = I[pair] * n2 + J[pair]
    return terms, owner


def poly_exp_product(p, q, centre=None):
    """Pointwise product of two sums.

    Each pair of terms is re-expanded around the shift where its quadratic
    exponent is centred, which keeps binomial coefficients small. Pass
    ``centre`` (e.g. 0.0) to expand every term around one common shift.
    """
    if len(p) == 0 or len(q) == 0:
        return PolyExpSum.empty()
    terms, _ = pairwise_products(p, q)
    if centre is not None:
        terms = terms.recentred(centre)
    return terms.simplified()


def _raw_moments(nu, tau2, pmax):
    """Raw moments E[z**k], k = 0..pmax, for z ~ N(nu, tau2) (broadcast)."""
    out = [np.ones_like(nu)]
    if pmax >= 1:
        out.append(nu.copy())
    for k in range(2, pmax + 1):
        out.append(nu * out[k - 1] + (k - 1) * tau2 * out[k - 2])
    return out


def gaussian_term_means(mu, sigma2, p):
    """Per-term expectations under N(mu, sigma2).

    ``mu`` and ``sigma2`` are broadcast to a common shape ``S``; the result has
    shape ``S + (len(p),)``.
    """
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 < 0):
        raise ValueError("sigma2 must be non-negative")
    mu, sigma2 = np.broadcast_arrays(mu, sigma2)
    m = mu[..., None] - p.shift
    s2 = sigma2[..., None]
    a, b = p.lin, p.quad
    D = 1.0 - 2.0 * b * s2
    if np.any(D <= 0.0):
        bad = np.argwhere(D <= 0.0)[0]
        t = bad[-1]
        raise IntegrabilityError(t, p.quad[t], s2[tuple(bad[:-1]) + (0,)])
    expo = (s2 * a * a + 2.0 * a * m + 2.0 * b * m * m) / (2.0 * D)
    nu = (s2 * a + m) / D
    tau2 = s2 / D
    pmax = int(p.power.max()) if len(p) else 0
    moments = _raw_moments(nu, tau2, pmax)
    mk = np.zeros_like(nu)
    for k in range(pmax + 1):
        sel = p.power == k
        if np.any(sel):
            mk[..., sel] = moments[k][..., sel]
    return p.coeff * np.exp(expo) / np.sqrt(D) * mk


def gaussian_poly_exp_mean(mu, sigma2, p):
    """Exact expectation of the sum ``p(x)`` for ``x ~ N(mu, sigma2)``.

    Raises
    ------
    IntegrabilityError
        If some term has ``1 - 2*quad*sigma2 <= 0``.
    """
    return gaussian_term_means(mu, sigma2, p).sum(axis=-1)
