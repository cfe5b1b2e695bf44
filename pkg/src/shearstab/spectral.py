"""Chebyshev collocation on [-1, 1].

Fields are complex (or real) numpy arrays of length ``n`` holding values at
the Gauss-Lobatto nodes ``y_j = cos(pi j/(n-1))``, ordered from y=1 down to
y=-1.  The workspace owns the differentiation matrices, Clenshaw-Curtis
weights and the factorized Dirichlet Helmholtz operators.
"""

from functools import lru_cache
import math

import numpy as np
import scipy.fft
import scipy.linalg as sla
from numpy.polynomial import chebyshev as C

from . import _kernels


class SpectralError(RuntimeError):
    pass


def clenshaw_curtis_weights(n):
    """Clenshaw-Curtis weights for the n Gauss-Lobatto nodes (sum to 2)."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    inner = theta[1:-1]
    if N % 2 == 0:
        w[0] = w[-1] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
        v -= np.cos(N * inner) / (N * N - 1)
    else:
        w[0] = w[-1] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / N
    return w


class SpectralWorkspace:
    """Grid, operators and factorization caches for one resolution n."""

    def __init__(self, n):
        if n < 8:
            raise SpectralError("need at least 8 nodes")
        self.n = int(n)
        self.nodes = np.sin(np.pi * (n - 1 - 2 * np.arange(n)) / (2 * (n - 1)))
        dm = _kernels.cheb_diff(n, 4)
        self.d1, self.d2, self.d3, self.d4 = dm
        self.quad = clenshaw_curtis_weights(n)
        self.inner = slice(1, n - 1)
        self.helmholtz_cache = {}
        self.gram_h1 = {}
        self._hinv = {}
        self._clamped = None

    # -- basic operations -------------------------------------------------

    def integrate(self, f):
        return self.quad @ f

    def inner_product(self, f, g):
        """<f, g> = int f conj(g)."""
        return self.quad @ (f * np.conj(g))

    def pad(self, v_inner):
        out = np.zeros((self.n,) + v_inner.shape[1:], dtype=v_inner.dtype)
        out[1:-1] = v_inner
        return out

    def cheb_coeffs(self, f):
        """Chebyshev coefficients of the interpolant of nodal values f."""
        f = np.asarray(f)
        N = self.n - 1
        c = scipy.fft.dct(f, type=1, axis=0) / N
        c[0] /= 2
        c[-1] /= 2
        return c

    def interp(self, f, y):
        """Evaluate the polynomial interpolant of f at points y."""
        return C.chebval(np.asarray(y), self.cheb_coeffs(f))

    def interp_row(self, y):
        """Barycentric weights v with v @ f = interpolant of f at the point y."""
        x = self.nodes
        diff = y - x
        hit = np.flatnonzero(diff == 0.0)
        v = np.zeros(self.n)
        if hit.size:
            v[hit[0]] = 1.0
            return v
        b = np.ones(self.n)
        b[1::2] = -1.0
        b[0] *= 0.5
        b[-1] *= 0.5
        v = b / diff
        return v / v.sum()

    # -- Helmholtz (d^2 - alpha^2) with Dirichlet rows ------------------

    def helmholtz_lu(self, alpha):
        key = float(alpha)
        if key not in self.helmholtz_cache:
            if alpha <= 0:
                raise SpectralError("Helmholtz solve needs alpha >= 1")
            A = self.d2[1:-1, 1:-1] - alpha * alpha * np.eye(self.n - 2)
            self.helmholtz_cache[key] = sla.lu_factor(A)
        return self.helmholtz_cache[key]

    def helmholtz_inverse(self, alpha):
        """Dense inverse on interior nodes; same factorization as the solver."""
        key = float(alpha)
        if key not in self._hinv:
            self._hinv[key] = sla.lu_solve(self.helmholtz_lu(alpha), np.eye(self.n - 2))
        return self._hinv[key]

    def gram(self, alpha):
        """Gram matrix of int |f'|^2 + alpha^2 |f|^2 on H^1_0 (interior values)."""
        key = float(alpha)
        if key not in self.gram_h1:
            D = self.d1[:, 1:-1]
            W = self.quad
            G = D.T @ (W[:, None] * D) + alpha * alpha * np.diag(W[1:-1])
            self.gram_h1[key] = 0.5 * (G + G.T)
        return self.gram_h1[key]

    # -- clamped (psi = psi' = 0 at both walls) operators ---------------

    def clamped(self):
        """Maps from interior psi values to psi', psi'' (all nodes) and psi''''
        (interior) for the interpolant psi = (1 - y^2) q with q(+-1) = 0."""
        if self._clamped is None:
            x = self.nodes
            s = np.zeros(self.n)
            s[1:-1] = 1.0 / (1.0 - x[1:-1] ** 2)
            S = np.diag(s)[:, 1:-1]
            one = np.diag(1.0 - x * x)
            X = np.diag(x)
            d1c = (one @ self.d1 - 2.0 * X) @ S
            d2c = (one @ self.d2 - 4.0 * X @ self.d1 - 2.0 * np.eye(self.n)) @ S
            d4c = (one @ self.d4 - 8.0 * X @ self.d3 - 12.0 * self.d2) @ S
            self._clamped = (d1c, d2c, d4c[1:-1])
        return self._clamped


@lru_cache(maxsize=8)
def workspace(n):
    """Shared workspace per grid size (immutable apart from write-once caches)."""
    return SpectralWorkspace(n)


def helmholtz_solve(ws, alpha, w, bc="dirichlet"):
    """psi with (d^2 - alpha^2) psi = w on interior nodes and psi(+-1) = 0."""
    if bc != "dirichlet":
        raise SpectralError(f"unsupported bc {bc!r}")
    if alpha < 1:
        raise SpectralError("alpha must be >= 1")
    w = np.asarray(w)
    psi_in = sla.lu_solve(ws.helmholtz_lu(alpha), w[1:-1])
    return ws.pad(psi_in)


def dirichlet_interval_matrix(alpha, a, b, m):
    """Helmholtz LU on [a, b] mapped to m Chebyshev nodes, plus the nodes."""
    return _interval_lu(float(alpha), float(a), float(b), int(m))


@lru_cache(maxsize=64)
def _interval_lu(alpha, a, b, m):
    ws = workspace(m)
    scale = 2.0 / (b - a)
    y = 0.5 * (a + b) + 0.5 * (b - a) * ws.nodes
    A = scale * scale * ws.d2[1:-1, 1:-1] - alpha * alpha * np.eye(m - 2)
    return sla.lu_factor(A), y, scale


def interval_helmholtz(alpha, a, b, w_nodes, m):
    """Dirichlet Helmholtz solve on [a, b] with data at the mapped nodes."""
    lu, _, _ = _interval_lu(float(alpha), float(a), float(b), int(m))
    w_nodes = np.asarray(w_nodes)
    out = np.zeros(w_nodes.shape, dtype=np.result_type(w_nodes, float))
    out[1:-1] = sla.lu_solve(lu, w_nodes[1:-1])
    return out


def interval_nodes(a, b, m):
    return 0.5 * (a + b) + 0.5 * (b - a) * workspace(m).nodes


def _sinh_ratio(num, den):
    # sinh(num)/sinh(den) for 0 <= num <= den without overflow
    num = np.asarray(num, dtype=float)
    if den == 0.0:
        return np.zeros_like(num)
    return np.exp(num - den) * (-np.expm1(-2 * num)) / (-np.expm1(-2 * den))


def stream_remainder(alpha, y, layer, psi_y1, psi_y2):
    """Explicit piecewise-sinh stream function matching psi at y1, y2 and
    vanishing at the walls."""
    y = np.asarray(y, dtype=float)
    y1, y2 = layer.y1, layer.y2
    out = np.zeros(y.shape, dtype=complex)
    lo = y <= y1
    mid = (y > y1) & (y < y2)
    hi = y >= y2
    out[lo] = _sinh_ratio(alpha * (1 + y[lo]), alpha * (1 + y1)) * psi_y1
    if y2 > y1:
        den = alpha * (y2 - y1)
        out[mid] = (_sinh_ratio(alpha * (y[mid] - y1), den) * psi_y2
                    + _sinh_ratio(alpha * (y2 - y[mid]), den) * psi_y1)
    out[hi] = _sinh_ratio(alpha * (1 - y[hi]), alpha * (1 - y2)) * psi_y2
    return out


def split_stream(ws, alpha, w, layer, m=None):
    """Split psi = helmholtz_solve(w) into psi1 (vanishing at -1, y1, y2, 1)
    and the explicit sinh remainder psi2, both returned on the ws grid."""
    if layer.degenerate:
        raise SpectralError("degenerate critical layer: use the lambda <= U(0) path")
    m = m or ws.n
    h = min(layer.y1 + 1.0, layer.y2 - layer.y1, 1.0 - layer.y2)
    if h < 2.0 / (ws.n - 1) ** 2:
        raise SpectralError("critical layer narrower than the grid resolution")
    w = np.asarray(w, dtype=complex)
    psi = helmholtz_solve(ws, alpha, w)
    cw = ws.cheb_coeffs(w)
    cp = ws.cheb_coeffs(psi)
    psi_y1 = C.chebval(layer.y1, cp)
    psi_y2 = C.chebval(layer.y2, cp)
    y = ws.nodes
    psi1 = np.zeros(ws.n, dtype=complex)
    for a, b in ((-1.0, layer.y1), (layer.y1, layer.y2), (layer.y2, 1.0)):
        if b - a <= 0:
            continue
        yl = interval_nodes(a, b, m)
        p = interval_helmholtz(alpha, a, b, C.chebval(yl, cw), m)
        sel = (y >= a) & (y <= b)
        t = (2 * y[sel] - (a + b)) / (b - a)
        psi1[sel] = C.chebval(t, workspace(m).cheb_coeffs(p))
    psi2 = stream_remainder(alpha, y, layer, psi_y1, psi_y2)
    return psi1, psi2


def _grad_norms(ws, f, alpha, k):
    """||d^j f||^2 for j = 0..k."""
    out = [ws.integrate(np.abs(f) ** 2).real]
    g = f
    for _ in range(k):
        g = ws.d1 @ g
        out.append(ws.integrate(np.abs(g) ** 2).real)
    return out


def norm(ws, f, kind="L2", alpha=1, k=1):
    """Quadrature norms.

    kinds: ``L2``, ``Linf``, ``L1``, ``Hk`` (sum over i<=k of
    ||(d, alpha)^i f||^2, binomial tensor convention), ``grad`` (the single
    ||(d, alpha) f||), ``Hm1`` (dual of H^1_0 under the (d, alpha) product),
    ``sqrt1my2`` (||sqrt(1-y^2) f||).
    """
    f = np.asarray(f)
    if kind == "L2":
        return math.sqrt(max(ws.integrate(np.abs(f) ** 2).real, 0.0))
    if kind == "Linf":
        return float(np.max(np.abs(f)))
    if kind == "L1":
        return float(ws.integrate(np.abs(f)).real)
    if kind == "sqrt1my2":
        return math.sqrt(max(ws.integrate((1 - ws.nodes ** 2) * np.abs(f) ** 2).real, 0.0))
    if kind == "grad":
        g = _grad_norms(ws, f, alpha, 1)
        return math.sqrt(g[1] + alpha * alpha * g[0])
    if kind == "Hk":
        if k > 4:
            raise SpectralError("Sobolev index above 4 is not supported")
        g = _grad_norms(ws, f, alpha, k)
        tot = 0.0
        for i in range(k + 1):
            for j in range(i + 1):
                tot += math.comb(i, j) * alpha ** (2 * (i - j)) * g[j]
        return math.sqrt(tot)
    if kind == "Hm1":
        q = ws.quad[1:-1] * f[1:-1]
        G = ws.gram(alpha)
        val = np.vdot(q, sla.solve(G, q, assume_a="pos"))
        return math.sqrt(max(val.real, 0.0))
    raise SpectralError(f"unknown norm kind {kind!r}")
