"""Symmetric convex background flows and their critical-layer geometry."""

from dataclasses import dataclass, field
import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize

from .checks import EstimateCheck

MAX_DEGREE = 8
_SAMPLE = np.linspace(-1.0, 1.0, 4001)


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class FlowProfile:
    """Even polynomial shear profile U(y) on [-1, 1] with U'' > 0."""

    name: str
    coeffs: tuple  # power-basis coefficients a_0 .. a_8

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.size > MAX_DEGREE + 1:
            raise ProfileError(f"degree {c.size - 1} exceeds {MAX_DEGREE}")
        if np.any(c[1::2] != 0.0):
            raise ProfileError("profile must be even (odd coefficients present)")
        p = Polynomial(c)
        object.__setattr__(self, "_polys", tuple(p.deriv(k) for k in range(5)))
        if np.max(np.abs(self.u(_SAMPLE) - self.u(-_SAMPLE))) > 1e-14:
            raise ProfileError("profile is not symmetric")
        if np.min(self.d2u(_SAMPLE)) <= 0.0:
            raise ProfileError("inf U'' must be positive")

    def u(self, y):
        return self._polys[0](y)

    def du(self, y):
        return self._polys[1](y)

    def d2u(self, y):
        return self._polys[2](y)

    def d3u(self, y):
        return self._polys[3](y)

    def d4u(self, y):
        return self._polys[4](y)

    def deriv(self, k, y):
        return self._polys[k](y)

    @property
    def u_min(self):
        return float(self.u(0.0))

    @property
    def u_max(self):
        return float(self.u(1.0))

    @property
    def poly(self):
        return self._polys[0]

    def table(self, npts=11):
        """Rows (y, U, U', U'') for quick inspection."""
        y = np.linspace(-1, 1, npts)
        return np.column_stack([y, self.u(y), self.du(y), self.d2u(y)])


def make_profile(kind, params=()):
    """Build a profile: ``poiseuille`` (y^2), ``quartic`` (y^2 + c4 y^4) or
    ``custom-coefficients`` (power-basis coefficients, lowest first)."""
    params = list(params)
    if kind == "poiseuille":
        return FlowProfile("poiseuille", (0.0, 0.0, 1.0))
    if kind == "quartic":
        c4 = float(params[0]) if params else 0.5
        if c4 < 0:
            raise ProfileError("quartic coefficient must be >= 0")
        return FlowProfile("quartic", (0.0, 0.0, 1.0, 0.0, c4))
    if kind in ("custom-coefficients", "custom"):
        if not params:
            raise ProfileError("custom profile needs coefficients")
        return FlowProfile("custom", tuple(float(p) for p in params))
    raise ProfileError(f"unknown profile kind {kind!r}")


def critical_points(profile, lam):
    """Symmetric roots y1 = -y2 of U(y) = lam for lam in [U(0), U(1)]."""
    u0, u1 = profile.u_min, profile.u_max
    if lam < u0 or lam > u1:
        raise ProfileError(f"lambda={lam} outside [U(0), U(1)] = [{u0}, {u1}]")
    if lam == u0:
        return 0.0, 0.0
    if lam == u1:
        return -1.0, 1.0
    y2 = optimize.brentq(lambda y: profile.u(y) - lam, 0.0, 1.0,
                         xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    return -y2, y2


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass
class CriticalLayer:
    """Critical layer y1 < y2 with cutoff width delta and interior offset theta."""

    lam: float
    y1: float
    y2: float
    delta: float = 0.0
    theta: float = 0.0
    degenerate: bool = field(init=False)

    def __post_init__(self):
        self.degenerate = self.y2 <= 0.0
        if not self.degenerate and self.delta == 0.0:
            self.delta = self.y2
        if not self.degenerate and not (0 < self.delta <= self.y2):
            raise ProfileError("need 0 < delta <= y2")

    @classmethod
    def from_profile(cls, profile, lam, delta=0.0, theta=0.0):
        y1, y2 = critical_points(profile, lam)
        return cls(lam, y1, y2, delta, theta)

    def chi(self, y):
        y = np.asarray(y)
        return ((y > self.y1) & (y < self.y2)).astype(float)

    def chi_c(self, y):
        return 1.0 - self.chi(y)

    def rho(self, y):
        """1 on (y1+delta, y2-delta), 0 outside (y1+delta/2, y2-delta/2)."""
        d = self.delta
        y = np.asarray(y, dtype=float)
        left = smoothstep((y - self.y1 - d / 2) / (d / 2))
        right = smoothstep((self.y2 - d / 2 - y) / (d / 2))
        return left * right

    def rho_c(self, y):
        """0 on (y1-delta/2, y2+delta/2), 1 outside (y1-delta, y2+delta)."""
        d = self.delta
        y = np.asarray(y, dtype=float)
        left = smoothstep((self.y1 - d / 2 - y) / (d / 2))
        right = smoothstep((y - self.y2 - d / 2) / (d / 2))
        return left + right


def _off_ball_intervals(y1, y2, delta):
    pts = sorted([-1.0, 1.0, max(-1.0, y1 - delta), min(1.0, y1 + delta),
                  max(-1.0, y2 - delta), min(1.0, y2 + delta)])
    balls = [(y1 - delta, y1 + delta), (y2 - delta, y2 + delta)]
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0:
            continue
        m = 0.5 * (a + b)
        if any(lo < m < hi for lo, hi in balls):
            continue
        out.append((a, b))
    return out


def weighted_integral_checks(profile, lam, delta):
    """Weighted norms of 1/(U-lam) off B(y1,delta) u B(y2,delta) against
    their algebraic bounds in delta and y2."""
    y1, y2 = critical_points(profile, lam)
    ivs = _off_ball_intervals(y1, y2, delta)
    f = lambda y: 1.0 / (profile.u(y) - lam)
    g = lambda y: profile.du(y) / (profile.u(y) - lam) ** 2

    def quad(fun):
        return sum(integrate.quad(fun, a, b, limit=200, epsabs=0, epsrel=1e-10)[0] for a, b in ivs)

    ys = np.concatenate([np.linspace(a, b, 2001) for a, b in ivs]) if ivs else np.zeros(0)
    linf = float(np.max(np.abs(f(ys)))) if ys.size else 0.0
    l2 = math.sqrt(quad(lambda y: f(y) ** 2))
    l1 = quad(lambda y: abs(f(y)))
    h1 = math.sqrt(quad(lambda y: g(y) ** 2))
    p = dict(profile=profile.name, lam=lam, delta=delta)
    return [
        EstimateCheck("weighted.inv_linf", p, linf, 1.0 / ((y2 + delta) * delta)),
        EstimateCheck("weighted.inv_l2", p, l2, 1.0 / (math.sqrt(delta) * (y2 + delta))),
        EstimateCheck("weighted.inv_l1", p, l1,
                      math.log1p(2 * y2 / delta) / y2 if y2 > 0 else 1.0 / delta),
        EstimateCheck("weighted.du_over_sq_l2", p, h1, 1.0 / (delta ** 1.5 * (y2 + delta))),
    ]


def profile_asymptotics_check(profile, lams=(0.1, 0.25, 0.5, 0.75, 0.9), deltas=(0.02, 0.05, 0.1, 0.2)):
    """U'(y)/y and (U(y)-U(y'))/((y-y')(y+y')) bounded above and below, plus
    the weighted-integral bounds over a (lambda, delta) sweep."""
    y = np.linspace(-1, 1, 2001)
    y = y[np.abs(y) > 1e-9]
    r1 = profile.du(y) / y
    yy, yp = np.meshgrid(np.linspace(-1, 1, 201), np.linspace(-1, 1, 201))
    den = (yy - yp) * (yy + yp)
    ok = np.abs(den) > 1e-8
    r2 = (profile.u(yy) - profile.u(yp))[ok] / den[ok]
    p = dict(profile=profile.name)
    out = [
        EstimateCheck("asym.du_over_y", p, float(r1.max()), float(r1.min())),
        EstimateCheck("asym.difference_quotient", p, float(r2.max()), float(r2.min())),
    ]
    span = profile.u_max - profile.u_min
    for s in lams:
        lam = profile.u_min + s * span
        y2 = critical_points(profile, lam)[1]
        for d in deltas:
            if d <= y2:
                out.extend(weighted_integral_checks(profile, lam, d))
    return out
