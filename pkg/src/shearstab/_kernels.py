"""Loop-shaped kernels with a numba path and a vectorized numpy path.

The backend is chosen once at import time.  Set ``SHEARSTAB_NO_NUMBA=1``
to force the numpy implementations (useful for debugging and for the
benchmark in ``benchmarks/bench_kernels.py``).
"""

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("SHEARSTAB_NO_NUMBA", "0") in ("", "0")

# Airy regime boundaries, in terms of zeta = (2/3) z^(3/2).
# Maclaurin series while |zeta| + Re(zeta) stays small (cancellation bound),
# the exponential expansion for |zeta| >= _ASYM_ZETA, and Taylor continuation
# of Ai'' = z Ai inward along the ray in between.
_SERIES_BOUND = 9.0
_ASYM_ZETA = 15.0
_ASYM_RADIUS = (1.5 * 15.6) ** (2.0 / 3.0)
_TAYLOR_STEP = 0.5

AI0 = 0.355028053887817239260
AIP0 = -0.258819403792806798405


# ---------------------------------------------------------------------------
# Chebyshev differentiation matrices (Weideman & Reddy recursion)
# ---------------------------------------------------------------------------

def _cheb_setup(n):
    k = np.arange(n)
    th = k * np.pi / (n - 1)
    n1 = n // 2
    n2 = n - n1
    T = np.tile(th / 2.0, (n, 1)).T
    DX = 2.0 * np.sin(T.T + T) * np.sin(T.T - T)
    DX = np.vstack([DX[:n1, :], -np.flipud(np.fliplr(DX[:n2, :]))])
    DX[k, k] = 1.0
    C = (-1.0) ** np.add.outer(k, k)
    C[0, :] *= 2.0
    C[-1, :] *= 2.0
    C[:, 0] /= 2.0
    C[:, -1] /= 2.0
    Z = 1.0 / DX
    Z[k, k] = 0.0
    return Z, C


def _cheb_diff_numpy(n, m):
    Z, C = _cheb_setup(n)
    out = np.empty((m, n, n))
    D = np.eye(n)
    idx = np.arange(n)
    for ell in range(1, m + 1):
        D = ell * Z * (C * np.diag(D)[:, None] - D)
        D[idx, idx] = -D.sum(axis=1)
        out[ell - 1] = D
    return out


def _cheb_recur_loops(Z, C, m):
    n = Z.shape[0]
    out = np.empty((m, n, n))
    D = np.eye(n)
    Dn = np.empty((n, n))
    for ell in range(1, m + 1):
        for i in range(n):
            di = D[i, i]
            s = 0.0
            for j in range(n):
                if i != j:
                    v = ell * Z[i, j] * (C[i, j] * di - D[i, j])
                    Dn[i, j] = v
                    s += v
            Dn[i, i] = -s
        for i in range(n):
            for j in range(n):
                D[i, j] = Dn[i, j]
                out[ell - 1, i, j] = Dn[i, j]
    return out


# ---------------------------------------------------------------------------
# Airy function Ai and Ai' for complex arguments
# ---------------------------------------------------------------------------

def _ai_series(z):
    z3 = z * z * z
    f = 1.0 + 0j
    g = z
    fp = 0.0 + 0j
    gp = 1.0 + 0j
    tf = 1.0 + 0j
    tg = z
    k = 0
    while k < 200:
        tf = tf * z3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * z3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        # derivative terms: d/dz z^(3k+3) = (3k+3) z^(3k+2)
        if z != 0:
            fp += tf * (3 * k + 3) / z
            gp += tg * (3 * k + 4) / z
        k += 1
        if abs(tf) + abs(tg) < 1e-18 * (abs(f) + abs(g)) and k > 2:
            break
    if z == 0:
        fp = 0.0 + 0j
        gp = 1.0 + 0j
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _ai_asym_direct(z):
    # valid for |arg z| <= 2 pi / 3 and |zeta| large
    zeta = (2.0 / 3.0) * z ** 1.5
    z4 = z ** 0.25
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    su = 1.0 + 0j
    sv = 1.0 + 0j
    u = 1.0
    term_prev = 1e300
    zk = 1.0 + 0j
    for k in range(1, 60):
        u = u * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v = -u * (6 * k + 1) / (6 * k - 1)
        zk = zk * (-zeta)
        tu = u / zk
        if abs(tu) > term_prev:
            break
        su += tu
        sv += v / zk
        term_prev = abs(tu)
        if term_prev < 1e-17:
            break
    return pref / z4 * su, -pref * z4 * sv


def _ai_asym(z):
    ang = math.atan2(z.imag, z.real)
    if abs(ang) <= 2.0 * math.pi / 3.0:
        return _ai_asym_direct(z)
    w = complex(-0.5, math.sqrt(3.0) / 2.0)
    w2 = w * w
    a1, d1 = _ai_asym_direct(w * z)
    a2, d2 = _ai_asym_direct(w2 * z)
    return -w * a1 - w2 * a2, -w2 * d1 - w * d2


def _taylor_step(z0, y, yp, h):
    # Ai'' = z Ai expanded about z0
    am1 = 0.0 + 0j
    a0 = y
    a1 = yp
    sy = a0 + a1 * h
    syp = a1 + 0j
    hk = h
    k = 0
    while k < 80:
        a2 = (z0 * a0 + am1) / ((k + 2) * (k + 1))
        syp += (k + 2) * a2 * hk
        hk = hk * h
        sy += a2 * hk
        am1 = a0
        a0 = a1
        a1 = a2
        k += 1
        if abs(a2 * hk) < 1e-18 * (abs(sy) + 1e-300) and k > 4:
            break
    return sy, syp


def _ai_scalar(z):
    r = abs(z)
    if r == 0.0:
        return AI0 + 0j, AIP0 + 0j
    zeta = (2.0 / 3.0) * z ** 1.5
    az = abs(zeta)
    if r <= 8.0 and az + zeta.real <= _SERIES_BOUND:
        return _ai_series(z)
    if az >= _ASYM_ZETA:
        return _ai_asym(z)
    zs = z * (_ASYM_RADIUS / r)
    y, yp = _ai_asym(zs)
    nsteps = int(math.ceil((_ASYM_RADIUS - r) / _TAYLOR_STEP))
    h = (z - zs) / nsteps
    zc = zs
    for _ in range(nsteps):
        y, yp = _taylor_step(zc, y, yp, h)
        zc = zc + h
    return y, yp


def _airy_array_loop(z):
    out = np.empty(z.shape[0], dtype=np.complex128)
    outp = np.empty(z.shape[0], dtype=np.complex128)
    for i in range(z.shape[0]):
        a, b = _ai_scalar(z[i])
        out[i] = a
        outp[i] = b
    return out, outp


def _ai_series_vec(z):
    z3 = z ** 3
    f = np.ones_like(z)
    g = z.copy()
    fp = np.zeros_like(z)
    gp = np.ones_like(z)
    tf = np.ones_like(z)
    tg = z.copy()
    safe = np.where(z == 0, 1.0, z)
    for k in range(200):
        tf = tf * z3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * z3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        fp += tf * (3 * k + 3) / safe
        gp += tg * (3 * k + 4) / safe
        if k > 2 and np.all(np.abs(tf) + np.abs(tg) < 1e-18 * (np.abs(f) + np.abs(g))):
            break
    return AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp


def _ai_asym_direct_vec(z):
    zeta = (2.0 / 3.0) * z ** 1.5
    z4 = z ** 0.25
    pref = np.exp(-zeta) / (2.0 * math.sqrt(math.pi))
    su = np.ones_like(z)
    sv = np.ones_like(z)
    prev = np.full(z.shape, 1e300)
    live = np.ones(z.shape, dtype=bool)
    u = 1.0
    zk = np.ones_like(z)
    for k in range(1, 60):
        u = u * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216.0 * k)
        v = -u * (6 * k + 1) / (6 * k - 1)
        zk = zk * (-zeta)
        tu = u / zk
        live &= np.abs(tu) <= prev
        su = np.where(live, su + tu, su)
        sv = np.where(live, sv + v / zk, sv)
        prev = np.where(live, np.abs(tu), prev)
        live &= prev >= 1e-17
        if not live.any():
            break
    return pref / z4 * su, -pref * z4 * sv


def _ai_asym_vec(z):
    ang = np.angle(z)
    near = np.abs(ang) <= 2.0 * np.pi / 3.0
    a = np.empty_like(z)
    d = np.empty_like(z)
    if near.any():
        a[near], d[near] = _ai_asym_direct_vec(z[near])
    far = ~near
    if far.any():
        w = complex(-0.5, math.sqrt(3.0) / 2.0)
        w2 = w * w
        a1, d1 = _ai_asym_direct_vec(w * z[far])
        a2, d2 = _ai_asym_direct_vec(w2 * z[far])
        a[far] = -w * a1 - w2 * a2
        d[far] = -w2 * d1 - w * d2
    return a, d


def _taylor_step_vec(z0, y, yp, h):
    am1 = np.zeros_like(y)
    a0 = y
    a1 = yp
    sy = a0 + a1 * h
    syp = a1.copy()
    hk = h
    for k in range(80):
        a2 = (z0 * a0 + am1) / ((k + 2) * (k + 1))
        syp = syp + (k + 2) * a2 * hk
        hk = hk * h
        sy = sy + a2 * hk
        am1, a0, a1 = a0, a1, a2
        if k > 4 and np.all(np.abs(a2 * hk) < 1e-18 * (np.abs(sy) + 1e-300)):
            break
    return sy, syp


def _airy_numpy(z):
    ai = np.empty_like(z)
    aip = np.empty_like(z)
    r = np.abs(z)
    zeta = (2.0 / 3.0) * z ** 1.5
    az = np.abs(zeta)
    ser = (r <= 8.0) & (az + zeta.real <= _SERIES_BOUND)
    asy = ~ser & (az >= _ASYM_ZETA)
    mid = ~ser & ~asy
    if ser.any():
        ai[ser], aip[ser] = _ai_series_vec(z[ser])
    if asy.any():
        ai[asy], aip[asy] = _ai_asym_vec(z[asy])
    if mid.any():
        zm = z[mid]
        rm = r[mid]
        zs = zm * (_ASYM_RADIUS / rm)
        y, yp = _ai_asym_vec(zs)
        nsteps = np.ceil((_ASYM_RADIUS - rm) / _TAYLOR_STEP).astype(int)
        h = (zm - zs) / nsteps
        zc = zs
        for s in range(int(nsteps.max())):
            act = s < nsteps
            hs = np.where(act, h, 0.0)
            y2, yp2 = _taylor_step_vec(zc, y, yp, hs)
            y = np.where(act, y2, y)
            yp = np.where(act, yp2, yp)
            zc = zc + hs
        ai[mid] = y
        aip[mid] = yp
    return ai, aip


# ---------------------------------------------------------------------------
# Fourier-mode convolution  c_a = sum_l x_l * y_(a-l),  |a|, |l|, |a-l| <= K
# ---------------------------------------------------------------------------

def _mode_conv_loops(x, y):
    m, n = x.shape
    K = (m - 1) // 2
    out = np.zeros((m, n), dtype=np.complex128)
    for a in range(-K, K + 1):
        lo = max(-K, a - K)
        hi = min(K, a + K)
        for l in range(lo, hi + 1):
            xi = x[l + K]
            yi = y[a - l + K]
            for j in range(n):
                out[a + K, j] += xi[j] * yi[j]
    return out


def _mode_conv_numpy(x, y):
    m, _ = x.shape
    K = (m - 1) // 2
    out = np.zeros(x.shape, dtype=np.complex128)
    for a in range(-K, K + 1):
        lo = max(-K, a - K)
        hi = min(K, a + K)
        ls = np.arange(lo, hi + 1)
        out[a + K] = np.einsum("ij,ij->j", x[ls + K], y[a - ls + K])
    return out


if USE_NUMBA:
    _jit = numba.njit(cache=True)
    _ai_series = _jit(_ai_series)
    _ai_asym_direct = _jit(_ai_asym_direct)
    _ai_asym = _jit(_ai_asym)
    _taylor_step = _jit(_taylor_step)
    _ai_scalar = _jit(_ai_scalar)
    _airy_array_loop = _jit(_airy_array_loop)
    _cheb_recur_loops = _jit(_cheb_recur_loops)
    _mode_conv_loops = _jit(_mode_conv_loops)


def backend():
    """Name of the active kernel backend."""
    return "numba" if USE_NUMBA else "numpy"


def cheb_diff(n, m):
    """Stack of Chebyshev differentiation matrices D^(1)..D^(m).

    Nodes are x_j = cos(pi j / (n-1)), j = 0..n-1 (descending).
    """
    if USE_NUMBA:
        Z, C = _cheb_setup(n)
        return _cheb_recur_loops(Z, C, m)
    return _cheb_diff_numpy(n, m)


def airy(z):
    """Ai(z) and Ai'(z) for complex arrays (or scalars)."""
    za = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    shape = za.shape
    flat = za.ravel()
    if USE_NUMBA:
        a, b = _airy_array_loop(flat)
    else:
        a, b = _airy_numpy(flat)
    if np.ndim(z) == 0:
        return a[0], b[0]
    return a.reshape(shape), b.reshape(shape)


def mode_convolution(x, y):
    """Truncated Fourier convolution of two (2K+1, n) mode stacks."""
    x = np.ascontiguousarray(x, dtype=np.complex128)
    y = np.ascontiguousarray(y, dtype=np.complex128)
    if USE_NUMBA:
        return _mode_conv_loops(x, y)
    return _mode_conv_numpy(x, y)
