"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and the environment variable
``NESTEDGP_DISABLE_JIT`` is unset (or ``0``). Both paths are always importable
under explicit names (``*_numpy`` / ``*_numba``) so they can be benchmarked
and cross-checked against each other.
"""
import os

import numpy as np

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    nb = None
    HAVE_NUMBA = False

_FLAG = os.environ.get("NESTEDGP_DISABLE_JIT", "0").strip().lower()
USE_JIT = HAVE_NUMBA and _FLAG in ("", "0", "false", "no")

SQRT5 = np.sqrt(5.0)


def _njit(*args, **kwargs):
    if HAVE_NUMBA:
        return nb.njit(*args, **kwargs)
    return lambda func: func


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

def _identical_rows(A, B):
    return np.all(A[:, None, :] == B[None, :, :], axis=2)


def gram_gaussian_numpy(A, B, lengthscales, variance, nugget):
    diff = (A[:, None, :] - B[None, :, :]) / lengthscales
    K = variance * np.exp(-0.5 * np.sum(diff * diff, axis=2))
    if nugget > 0.0:
        K = K + nugget * _identical_rows(A, B)
    return K


def gram_matern52_numpy(A, B, lengthscales, variance, nugget):
    r = np.abs(A[:, None, :] - B[None, :, :]) / lengthscales
    f = (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)
    K = variance * np.prod(f, axis=2)
    if nugget > 0.0:
        K = K + nugget * _identical_rows(A, B)
    return K


@_njit(cache=True)
def gram_gaussian_numba(A, B, lengthscales, variance, nugget):
    n, d = A.shape
    m = B.shape[0]
    K = np.empty((n, m))
    inv = 1.0 / lengthscales
    for i in range(n):
        for j in range(m):
            s = 0.0
            for k in range(d):
                t = (A[i, k] - B[j, k]) * inv[k]
                s += t * t
            v = variance * np.exp(-0.5 * s)
            if s == 0.0 and nugget > 0.0:
                same = True
                for k in range(d):
                    if A[i, k] != B[j, k]:
                        same = False
                if same:
                    v += nugget
            K[i, j] = v
    return K


@_njit(cache=True)
def gram_matern52_numba(A, B, lengthscales, variance, nugget):
    n, d = A.shape
    m = B.shape[0]
    K = np.empty((n, m))
    s5 = np.sqrt(5.0)
    for i in range(n):
        for j in range(m):
            p = 1.0
            same = True
            for k in range(d):
                r = abs(A[i, k] - B[j, k]) / lengthscales[k]
                p *= (1.0 + s5 * r + (5.0 / 3.0) * r * r) * np.exp(-s5 * r)
                if A[i, k] != B[j, k]:
                    same = False
            v = variance * p
            if same:
                v += nugget
            K[i, j] = v
    return K


# ---------------------------------------------------------------------------
# Maximin LHS: swap optimisation with an incrementally maintained distance matrix
# ---------------------------------------------------------------------------

def _sq_dist_matrix(U):
    diff = U[:, None, :] - U[None, :, :]
    D = np.sum(diff * diff, axis=2)
    np.fill_diagonal(D, np.inf)
    return D


def lhs_swap_optimize_numpy(U, cols, rows_a, rows_b):
    """Apply improvement-only column swaps; returns (design, min squared distance)."""
    U = U.copy()
    D = _sq_dist_matrix(U)
    best = D.min()
    for c, a, b in zip(cols, rows_a, rows_b):
        if a == b:
            continue
        U[a, c], U[b, c] = U[b, c], U[a, c]
        da = np.sum((U - U[a]) ** 2, axis=1)
        db = np.sum((U - U[b]) ** 2, axis=1)
        da[a] = np.inf
        db[b] = np.inf
        Dn = D.copy()
        Dn[a, :] = da
        Dn[:, a] = da
        Dn[b, :] = db
        Dn[:, b] = db
        new = Dn.min()
        if new > best:
            best = new
            D = Dn
        else:
            U[a, c], U[b, c] = U[b, c], U[a, c]
    return U, best


@_njit(cache=True)
def _row_dists(U, a, out):
    n, d = U.shape
    for j in range(n):
        s = 0.0
        for k in range(d):
            t = U[a, k] - U[j, k]
            s += t * t
        out[j] = s
    out[a] = np.inf


@_njit(cache=True)
def lhs_swap_optimize_numba(U, cols, rows_a, rows_b):
    U = U.copy()
    n, d = U.shape
    D = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = U[i, k] - U[j, k]
                s += t * t
            D[i, j] = s
        D[i, i] = np.inf
    best = np.inf
    for i in range(n):
        for j in range(n):
            if D[i, j] < best:
                best = D[i, j]
    da = np.empty(n)
    db = np.empty(n)
    for t in range(cols.shape[0]):
        c = cols[t]
        a = rows_a[t]
        b = rows_b[t]
        if a == b:
            continue
        tmp = U[a, c]
        U[a, c] = U[b, c]
        U[b, c] = tmp
        _row_dists(U, a, da)
        _row_dists(U, b, db)
        new = np.inf
        for i in range(n):
            for j in range(n):
                if i == a:
                    v = da[j]
                elif i == b:
                    v = db[j]
                elif j == a:
                    v = da[i]
                elif j == b:
                    v = db[i]
                else:
                    v = D[i, j]
                if v < new:
                    new = v
        if new > best:
            best = new
            for j in range(n):
                D[a, j] = da[j]
                D[j, a] = da[j]
                D[b, j] = db[j]
                D[j, b] = db[j]
        else:
            tmp = U[a, c]
            U[a, c] = U[b, c]
            U[b, c] = tmp
    return U, best


# ---------------------------------------------------------------------------
# Quadratic-drag point-mass ballistics, RK4 with bisection on ground impact
# ---------------------------------------------------------------------------

@_njit(cache=True)
def _rk4_step(x, y, vx, vy, k, g, h):
    s1 = np.sqrt(vx * vx + vy * vy)
    ax1 = -k * s1 * vx
    ay1 = -g - k * s1 * vy

    vx2 = vx + 0.5 * h * ax1
    vy2 = vy + 0.5 * h * ay1
    s2 = np.sqrt(vx2 * vx2 + vy2 * vy2)
    ax2 = -k * s2 * vx2
    ay2 = -g - k * s2 * vy2

    vx3 = vx + 0.5 * h * ax2
    vy3 = vy + 0.5 * h * ay2
    s3 = np.sqrt(vx3 * vx3 + vy3 * vy3)
    ax3 = -k * s3 * vx3
    ay3 = -g - k * s3 * vy3

    vx4 = vx + h * ax3
    vy4 = vy + h * ay3
    s4 = np.sqrt(vx4 * vx4 + vy4 * vy4)
    ax4 = -k * s4 * vx4
    ay4 = -g - k * s4 * vy4

    xn = x + h / 6.0 * (vx + 2.0 * vx2 + 2.0 * vx3 + vx4)
    yn = y + h / 6.0 * (vy + 2.0 * vy2 + 2.0 * vy3 + vy4)
    vxn = vx + h / 6.0 * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
    vyn = vy + h / 6.0 * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
    return xn, yn, vxn, vyn


@_njit(cache=True)
def ballistic_range_numba(drag, speed, elevation, g, dt, t_max):
    n = drag.shape[0]
    out = np.empty(n)
    max_steps = int(np.ceil(t_max / dt))
    for i in range(n):
        k = drag[i]
        x = 0.0
        y = 0.0
        vx = speed[i] * np.cos(elevation[i])
        vy = speed[i] * np.sin(elevation[i])
        landed = False
        for _ in range(max_steps):
            xn, yn, vxn, vyn = _rk4_step(x, y, vx, vy, k, g, dt)
            if yn < 0.0:
                lo = 0.0
                hi = dt
                xr = xn
                for _it in range(60):
                    mid = 0.5 * (lo + hi)
                    xm, ym, _a, _b = _rk4_step(x, y, vx, vy, k, g, mid)
                    if ym < 0.0:
                        hi = mid
                    else:
                        lo = mid
                    xr = xm
                out[i] = xr
                landed = True
                break
            x, y, vx, vy = xn, yn, vxn, vyn
        if not landed:
            out[i] = np.nan
    return out


def _rk4_step_numpy(x, y, vx, vy, k, g, h):
    def acc(ux, uy):
        s = np.sqrt(ux * ux + uy * uy)
        return -k * s * ux, -g - k * s * uy

    ax1, ay1 = acc(vx, vy)
    vx2, vy2 = vx + 0.5 * h * ax1, vy + 0.5 * h * ay1
    ax2, ay2 = acc(vx2, vy2)
    vx3, vy3 = vx + 0.5 * h * ax2, vy + 0.5 * h * ay2
    ax3, ay3 = acc(vx3, vy3)
    vx4, vy4 = vx + h * ax3, vy + h * ay3
    ax4, ay4 = acc(vx4, vy4)
    xn = x + h / 6.0 * (vx + 2.0 * vx2 + 2.0 * vx3 + vx4)
    yn = y + h / 6.0 * (vy + 2.0 * vy2 + 2.0 * vy3 + vy4)
    vxn = vx + h / 6.0 * (ax1 + 2.0 * ax2 + 2.0 * ax3 + ax4)
    vyn = vy + h / 6.0 * (ay1 + 2.0 * ay2 + 2.0 * ay3 + ay4)
    return xn, yn, vxn, vyn


def ballistic_range_numpy(drag, speed, elevation, g, dt, t_max):
    drag = np.asarray(drag, dtype=float)
    n = drag.shape[0]
    x = np.zeros(n)
    y = np.zeros(n)
    vx = speed * np.cos(elevation)
    vy = speed * np.sin(elevation)
    out = np.full(n, np.nan)
    active = np.ones(n, dtype=bool)
    max_steps = int(np.ceil(t_max / dt))
    for _ in range(max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        k = drag[idx]
        x0, y0, vx0, vy0 = x[idx], y[idx], vx[idx], vy[idx]
        xn, yn, vxn, vyn = _rk4_step_numpy(x0, y0, vx0, vy0, k, g, dt)
        hit = yn < 0.0
        if np.any(hit):
            lo = np.zeros(hit.sum())
            hi = np.full(hit.sum(), dt)
            xr = xn[hit]
            for _it in range(60):
                mid = 0.5 * (lo + hi)
                xm, ym, _a, _b = _rk4_step_numpy(
                    x0[hit], y0[hit], vx0[hit], vy0[hit], k[hit], g, mid)
                below = ym < 0.0
                hi = np.where(below, mid, hi)
                lo = np.where(below, lo, mid)
                xr = xm
            out[idx[hit]] = xr
            active[idx[hit]] = False
        keep = ~hit
        sel = idx[keep]
        x[sel], y[sel], vx[sel], vy[sel] = xn[keep], yn[keep], vxn[keep], vyn[keep]
    return out


if USE_JIT:
    gram_gaussian = gram_gaussian_numba
    gram_matern52 = gram_matern52_numba
    lhs_swap_optimize = lhs_swap_optimize_numba
    ballistic_range = ballistic_range_numba
else:
    gram_gaussian = gram_gaussian_numpy
    gram_matern52 = gram_matern52_numpy
    lhs_swap_optimize = lhs_swap_optimize_numpy
    ballistic_range = ballistic_range_numpy
