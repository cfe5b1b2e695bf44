"""Rayleigh problem with limiting absorption and the interior coercive
machinery on the critical layer (y1, y2).

Pairings follow ``<a, b> = int a conj(b)`` and every inequality uses the
real part.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P

from . import spectral
from .checks import EstimateCheck
from .profiles import CriticalLayer, critical_points


class RayleighError(ValueError):
    pass


@dataclass
class RayleighSolution:
    w: np.ndarray
    psi: np.ndarray
    lam: float
    delta: float
    alpha: int
    residual: float


def solve_ray_delta(ws, profile, alpha, lam, delta, f):
    """Solve (U - lam + i delta) W - U'' Psi = f, (d^2 - alpha^2) Psi = W,
    Psi(+-1) = 0 by eliminating Psi through the Helmholtz inverse."""
    if abs(delta) < 1e-12:
        raise RayleighError("|delta| too small for limiting absorption")
    f = np.asarray(f, dtype=complex)
    y = ws.nodes
    U = profile.u(y)
    Upp = profile.d2u(y)
    shift = U - lam + 1j * delta
    Hinv = ws.helmholtz_inverse(alpha)
    A = np.diag(shift[1:-1]) - Upp[1:-1, None] * Hinv
    w = np.empty(ws.n, dtype=complex)
    w[1:-1] = sla.solve(A, f[1:-1])
    w[0] = f[0] / shift[0]
    w[-1] = f[-1] / shift[-1]
    psi = spectral.helmholtz_solve(ws, alpha, w)
    res = spectral.norm(ws, shift * w - Upp * psi - f)
    return RayleighSolution(w, psi, lam, delta, alpha, res)


def check_ray_bounds(ws, profile, sol, f):
    """||(d,a)Psi|| + d^(1/2)||W|| + d^(3/2)(|lam-U(0)|+d)^(-1/2)||W'||
    against ||(d,a)(f/U'')||."""
    f = np.asarray(f, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(f))))
    if abs(f[0]) > 1e-12 * scale or abs(f[-1]) > 1e-12 * scale:
        raise RayleighError("check_ray_bounds needs f(+-1) = 0")
    a, d = sol.alpha, abs(sol.delta)
    lhs = (spectral.norm(ws, sol.psi, "grad", a)
           + math.sqrt(d) * spectral.norm(ws, sol.w)
           + d ** 1.5 / math.sqrt(abs(sol.lam - profile.u_min) + d)
           * spectral.norm(ws, ws.d1 @ sol.w))
    rhs = spectral.norm(ws, f / profile.d2u(ws.nodes), "grad", a)
    p = dict(profile=profile.name, alpha=a, lam=sol.lam, delta=sol.delta)
    return EstimateCheck("ray.delta_bound", p, lhs, rhs, n=ws.n)


# ---------------------------------------------------------------------------
# interior quantities on (y1, y2)
# ---------------------------------------------------------------------------

def _gap_quotient(profile, y2):
    """Q(s) with U(y2) - U(y) = (y2^2 - y^2) Q(y^2), power basis in s = y^2."""
    c = np.asarray(profile.coeffs, dtype=float)
    ps = c[0::2].copy()  # P(s) with U(y) = P(y^2)
    s2 = y2 * y2
    num = ps.copy()
    num[0] -= P.polyval(s2, ps)
    # divide P(s) - P(s2) by (s - s2); remainder is zero up to rounding
    q, _ = P.polydiv(num, np.array([-s2, 1.0]))
    return q


class InteriorLayer:
    """psi1 on (y1, y2) for a batch of fields, with the regularized
    quotient g = psi1/(lam - U) computed without dividing by zero."""

    def __init__(self, profile, alpha, lam, m):
        y1, y2 = critical_points(profile, lam)
        if y2 <= 0:
            raise RayleighError("degenerate critical layer (lam = U(0))")
        self.profile, self.alpha, self.lam, self.m = profile, alpha, lam, m
        self.y1, self.y2 = y1, y2
        self.layer = CriticalLayer(lam, y1, y2)
        self.ws = spectral.workspace(m)
        t = self.ws.nodes
        self.t = t
        self.y = y2 * t
        self.wq = y2 * self.ws.quad
        self.q = P.polyval(self.y ** 2, _gap_quotient(profile, y2))
        self.gap = y2 * y2 * (1 - t * t) * self.q  # lam - U, >= 0 inside
        self.upp = profile.d2u(self.y)

    def solve(self, w_nodes):
        """psi1 (columns) for w given at the interval nodes."""
        return spectral.interval_helmholtz(self.alpha, self.y1, self.y2, w_nodes, self.m)

    def reduced(self, psi1):
        """h = psi1/(1 - t^2) for psi1 of shape (m, k); endpoint values come
        from psi1_t(+-1) = -+2 h(+-1)."""
        d1 = self.ws.d1
        h = np.empty_like(psi1)
        t = self.t
        h[1:-1] = psi1[1:-1] / (1 - t[1:-1] ** 2)[:, None]
        h[0] = -(d1[0] @ psi1) / 2.0
        h[-1] = (d1[-1] @ psi1) / 2.0
        return h

    def integ(self, f):
        return self.wq @ f

    def quantities(self, w_nodes):
        """All interior integrals for a batch of fields (columns of w_nodes)."""
        w = np.asarray(w_nodes, dtype=complex)
        if w.ndim == 1:
            w = w[:, None]
        psi1 = self.solve(w)
        h = self.reduced(psi1)
        y2 = self.y2
        qcol = self.q[:, None]
        g = h / (y2 * y2 * qcol)  # psi1 / (lam - U)
        dg = (self.ws.d1 @ g) / y2
        gap = self.gap[:, None]
        upp = self.upp[:, None]
        dpsi = (self.ws.d1 @ psi1) / y2
        out = {}
        out["A"] = self.integ(gap * np.abs(w) ** 2 / upp).real  # <(lam-U)w/U'', chi w>
        out["B"] = self.integ(psi1 * np.conj(w)).real  # Re <psi1, chi w>
        out["B_im"] = self.integ(psi1 * np.conj(w)).imag
        out["grad_g"] = self.integ(gap ** 2 * np.abs(dg) ** 2).real
        out["psi1_l2"] = self.integ(np.abs(psi1) ** 2).real
        out["dpsi1_l2"] = self.integ(np.abs(dpsi) ** 2).real
        out["hardy_lhs"] = self.integ(np.abs(g) ** 2).real
        out["psi1_0"] = np.abs(C.chebval(0.0, self.ws.cheb_coeffs(psi1))) ** 2
        out["_ug"] = upp * g  # U'' psi1 / (lam - U), smooth
        return out

    def weighted_mean(self, ug, theta):
        """int_{y1+theta}^{y2-theta} U'' psi1/(lam - U) dy."""
        coef = self.ws.cheb_coeffs(ug)
        anti = C.chebint(coef, axis=0)
        a = (self.y1 + theta) / self.y2
        b = (self.y2 - theta) / self.y2
        return self.y2 * (C.chebval(b, anti) - C.chebval(a, anti))


def _to_interval(ws, w, y):
    return C.chebval(y, ws.cheb_coeffs(np.asarray(w, dtype=complex)))


def coercive_values(layer, w_nodes):
    """Per-field (lhs, rhs) of the coercive estimate and the two sides of
    the H^1-type corollary.  Vectorized over columns."""
    qv = layer.quantities(w_nodes)
    a2 = layer.alpha ** 2
    lhs1 = qv["grad_g"] + a2 * qv["psi1_l2"]
    rhs1 = qv["A"] + qv["B"]
    span = layer.y2 - layer.y1
    lhs2 = span ** 2 * (qv["A"] - qv["B"])
    return lhs1, rhs1, lhs2, rhs1, qv


def check_coercive(ws, profile, alpha, lam, w, m=None):
    """Coercive estimate (margin) and its H^1-type consequence (ratio) for a
    field w on the ws grid."""
    layer = InteriorLayer(profile, alpha, lam, m or ws.n)
    wi = _to_interval(ws, w, layer.y)
    lhs1, rhs1, lhs2, rhs2, qv = coercive_values(layer, wi)
    p = dict(profile=profile.name, alpha=alpha, lam=lam)
    c1 = EstimateCheck("coercive.l2", p, lhs1[0], rhs1[0], n=layer.m,
                       note=f"Im<psi1,chi w>={qv['B_im'][0]:.6e}")
    c2 = EstimateCheck("coercive.h1", p, lhs2[0], rhs2[0], n=layer.m)
    return c1, c2


def hardy_values(layer, w_nodes, qv=None):
    qv = qv or layer.quantities(w_nodes)
    span = layer.y2 - layer.y1
    rhs = qv["grad_g"] / span ** 2 + qv["psi1_0"] / span ** 3
    return qv["hardy_lhs"], rhs


def check_hardy_type(ws, profile, alpha, lam, w, m=None):
    layer = InteriorLayer(profile, alpha, lam, m or ws.n)
    lhs, rhs = hardy_values(layer, _to_interval(ws, w, layer.y))
    p = dict(profile=profile.name, alpha=alpha, lam=lam)
    return EstimateCheck("hardy_type", p, lhs[0], rhs[0], n=layer.m)


def single_point_values(layer, w_nodes, theta, qv=None):
    qv = qv or layer.quantities(w_nodes)
    span = layer.y2 - layer.y1
    lhs = qv["psi1_0"] / span ** 3
    mean = layer.weighted_mean(qv["_ug"], theta)
    rhs = (qv["A"] + qv["B"]) / span ** 2 + np.abs(mean) ** 2 / span
    return lhs, rhs


def check_single_point(ws, profile, alpha, lam, theta, w, m=None):
    layer = InteriorLayer(profile, alpha, lam, m or ws.n)
    span = layer.y2 - layer.y1
    if not (0 < theta <= span / 4):
        raise RayleighError("theta must lie in (0, (y2-y1)/4]")
    lhs, rhs = single_point_values(layer, _to_interval(ws, w, layer.y), theta)
    p = dict(profile=profile.name, alpha=alpha, lam=lam, theta=theta)
    return EstimateCheck("single_point", p, lhs[0], rhs[0], n=layer.m)


def coercivity_sweep(profile, alphas, lams, nfields, m, seed, theta_frac=0.25):
    """Ratios and margins over (alpha, lam) x nfields seeded random fields.

    Returns a list of row dicts with the worst case per (alpha, lam).
    Fields are drawn once on [-1, 1] and restricted to each layer.
    """
    rng = np.random.default_rng(seed)
    k = np.arange(13)
    coef = (rng.standard_normal((13, nfields))
            + 1j * rng.standard_normal((13, nfields))) * (0.7 ** k)[:, None]
    rows = []
    for alpha in alphas:
        for lam in lams:
            layer = InteriorLayer(profile, alpha, lam, m)
            w = C.chebval(layer.y, coef).T  # shape (m, nfields)
            lhs1, rhs1, lhs2, rhs2, qv = coercive_values(layer, w)
            hl, hr = hardy_values(layer, w, qv)
            span = layer.y2 - layer.y1
            sl, sr = single_point_values(layer, w, theta_frac * span, qv)
            scale = np.maximum(np.abs(qv["A"]) + np.abs(qv["B"]), 1e-300)
            rows.append(dict(
                profile=profile.name, alpha=alpha, lam=lam, n=m,
                margin_min=float(np.min((rhs1 - lhs1) / scale)),
                ratio_h1=float(np.max(lhs2 / rhs2)),
                ratio_hardy=float(np.max(hl / hr)),
                ratio_single=float(np.max(sl / sr)),
            ))
    return rows
