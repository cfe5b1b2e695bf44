"""Airy boundary-layer correctors converting Navier-slip solutions into
non-slip ones.

Near the wall y = -1 the homogeneous OS equation is approximated by the
linearized-profile equation

    -nu (d^2 - a^2) W + i a (U_1 - lam) W + o W = 0,  U_1 = U(-1) + U'(-1)(y+1),

whose decaying solution is Ai(e^{-i pi/6} L_1 (y + 1 + d_1)) for the S-profile
sign U'(-1) < 0.  The mirror-image wall uses Ai(e^{-i pi/6} L_2 (1 - y - d_2)).
"""

from dataclasses import dataclass, field
import cmath
import math
import warnings

import numpy as np
from scipy import integrate

from . import _kernels, spectral
from .checks import EstimateCheck
from .orr_sommerfeld import NAVIER_SLIP, NON_SLIP, OSOperator, OSProblem

ROT = cmath.exp(-1j * math.pi / 6)
THRESHOLD_L = 10.0
MIN_LAYER_POINTS = 8


class BoundaryLayerError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Airy function and its tail integral
# ---------------------------------------------------------------------------

def airy(z):
    """Complex Airy function Ai(z) (scalar or array)."""
    return _kernels.airy(z)[0]


def airy_pair(z):
    """(Ai(z), Ai'(z))."""
    return _kernels.airy(z)


def _ai_scalar(z):
    return complex(_kernels.airy(complex(z))[0])


def _tail_integral(z0):
    """int_{z0}^{+inf} Ai(t) dt along any path ending in the decaying sector."""
    z0 = complex(z0)
    if abs(cmath.phase(z0)) < math.pi / 3 and z0 != 0:
        # the horizontal ray z0 + s stays inside the decaying sector
        f = lambda s: _ai_scalar(z0 + s)
        val, _ = integrate.quad(f, 0.0, np.inf, complex_func=True, epsabs=1e-15, epsrel=1e-12, limit=400)
        return val
    # 1/3 - int_0^{z0} Ai along the straight segment
    f = lambda s: _ai_scalar(s * z0) * z0
    pts = max(1, int(abs(z0) // 2))
    with warnings.catch_warnings():
        # oscillatory segments near the real axis trip the roundoff detector
        # at epsabs=1e-15; the result still agrees with direct quadrature
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(f, 0.0, 1.0, complex_func=True, epsabs=1e-15, epsrel=1e-12,
                                limit=400 + 50 * pts)
    return 1.0 / 3.0 - val


def airy_a0(z, branch=1):
    """A0^(1)(z) = int_{e^{i pi/6} z}^{inf} Ai, and A0^(2)(z) = A0^(1)(-conj z)."""
    z = complex(z)
    if branch == 2:
        z = -z.conjugate()
    elif branch != 1:
        raise ValueError("branch must be 1 or 2")
    return _tail_integral(cmath.exp(1j * math.pi / 6) * z)


def airy_table(zs):
    """Rows (z, Ai(z), Ai'(z), A0^(1)(z)) for validation dumps."""
    rows = []
    for z in zs:
        a, ap = airy_pair(complex(z))
        rows.append((complex(z), complex(a), complex(ap), airy_a0(z, 1)))
    return rows


# ---------------------------------------------------------------------------
# wall kernels
# ---------------------------------------------------------------------------

def sinh_kernels(y, alpha):
    """sinh(a(1+y))/sinh(2a) and sinh(a(1-y))/sinh(2a), overflow-free."""
    y = np.asarray(y, dtype=float)
    den = -np.expm1(-4 * alpha)
    kp = np.exp(-alpha * (1 - y)) * (-np.expm1(-2 * alpha * (1 + y))) / den
    km = np.exp(-alpha * (1 + y)) * (-np.expm1(-2 * alpha * (1 - y))) / den
    return kp, km


def wall_coefficients(ws, alpha, w_na):
    """c1 = -int K+ w_na, c2 = int K- w_na (so that psi'(+-1) vanish after
    adding c1 w_cor,1 + c2 w_cor,2)."""
    kp, km = sinh_kernels(ws.nodes, alpha)
    return -ws.integrate(kp * w_na), ws.integrate(km * w_na)


# ---------------------------------------------------------------------------
# corrector set
# ---------------------------------------------------------------------------

@dataclass
class AiryCorrectorSet:
    nu: float
    alpha: int
    lam: float
    L1: float
    L2: float
    d1: complex
    d2: complex
    a0_1: complex
    a0_2: complex
    w_app_1: np.ndarray
    w_app_2: np.ndarray
    psi_app_1: np.ndarray
    psi_app_2: np.ndarray
    ratios: dict = field(default_factory=dict)
    A1: complex = 0j
    A2: complex = 0j
    B1: complex = 0j
    B2: complex = 0j
    A_app: tuple = (0j, 0j)
    B_app: tuple = (0j, 0j)
    C: np.ndarray = None
    w_err_1: np.ndarray = None
    w_err_2: np.ndarray = None
    w_cor_1: np.ndarray = None
    w_cor_2: np.ndarray = None
    psi_cor_1: np.ndarray = None
    psi_cor_2: np.ndarray = None
    dpsi_cor_1: np.ndarray = None
    dpsi_cor_2: np.ndarray = None
    direct: dict = field(default_factory=dict)
    gap: dict = field(default_factory=dict)

    @property
    def det(self):
        return self.A1 * self.A2 - self.B1 * self.B2

    @property
    def L_min(self):
        return min(self.L1, self.L2)


def layer_scales(profile, nu, alpha, lam, o_shift=0j):
    """L_i and d_i at both walls; the o term is folded into lam."""
    lam_eff = lam + 1j * o_shift / alpha
    up_m, up_p = profile.du(-1.0), profile.du(1.0)
    L1 = abs(alpha * up_m / nu) ** (1 / 3)
    L2 = abs(alpha * up_p / nu) ** (1 / 3)
    d1 = (profile.u(-1.0) - lam_eff - 1j * nu * alpha) / up_m
    d2 = (profile.u(1.0) - lam_eff - 1j * nu * alpha) / up_p
    return L1, L2, complex(d1), complex(d2)


def _layer_points(ws, width):
    return int(np.sum(1.0 - ws.nodes < width))


def layer_width(profile, nu, alpha, lam):
    """Narrower of the two Airy decay lengths 1/(L_i (1 + |L_i d_i|)^(1/2))."""
    L1, L2, d1, d2 = layer_scales(profile, nu, alpha, lam)
    return min(1.0 / (L * math.sqrt(1 + abs(L * d))) for L, d in ((L1, d1), (L2, d2)))


def resolving_n(profile, nu, alpha, lam, ladder=(128, 192, 256, 384, 512)):
    """Smallest grid size on the ladder with enough nodes across the layer."""
    width = layer_width(profile, nu, alpha, lam)
    for n in ladder:
        if _layer_points(spectral.workspace(n), width) >= MIN_LAYER_POINTS:
            return n
    raise BoundaryLayerError(f"boundary layer of width {width:.3g} needs more than {ladder[-1]} nodes")


def build_approx(ws, profile, nu, alpha, lam, o_shift=0j):
    """Airy approximations W_app,i, their stream functions and the
    normalized size ratios of the approximate correctors."""
    L1, L2, d1, d2 = layer_scales(profile, nu, alpha, lam, o_shift)
    z1 = L1 * d1
    z2 = L2 * d2
    for L, z in ((L1, z1), (L2, z2)):
        width = 1.0 / (L * math.sqrt(1 + abs(z)))
        if _layer_points(ws, width) < MIN_LAYER_POINTS:
            raise BoundaryLayerError(
                f"boundary layer of width {width:.3g} unresolved at n={ws.n}")
    y = ws.nodes
    w1 = airy(ROT * L1 * (y + 1 + d1))
    w2 = airy(ROT * L2 * (1 - y - d2))
    a01 = airy_a0(z1.conjugate(), 1).conjugate()
    a02 = airy_a0(z2, 2).conjugate()
    p1 = spectral.helmholtz_solve(ws, alpha, w1)
    p2 = spectral.helmholtz_solve(ws, alpha, w2)
    cs = AiryCorrectorSet(nu, alpha, lam, L1, L2, d1, d2, a01, a02, w1, w2, p1, p2)
    for i, (L, z, a0, w, p, dist) in enumerate(((L1, z1, a01, w1, p1, 1 + y),
                                                 (L2, z2, a02, w2, p2, 1 - y)), start=1):
        s = 1 + abs(z)
        a0 = abs(a0)
        cs.ratios[f"L2_{i}"] = spectral.norm(ws, w) * L ** 0.5 * s ** -0.25 / a0
        cs.ratios[f"moment1_{i}"] = spectral.norm(ws, dist * w) * L ** 1.5 * s ** 0.25 / a0
        cs.ratios[f"Linf_{i}"] = spectral.norm(ws, w, "Linf") / (s ** 0.5 * a0)
        cs.ratios[f"L1_{i}"] = spectral.norm(ws, w, "L1") * L / a0
        cs.ratios[f"psi_{i}"] = spectral.norm(ws, p, "grad", alpha) * L ** 1.5 * s ** 0.25 / a0
    return cs


def _direct_corrector(op, wall):
    """Homogeneous clamped solve with psi(+-1) = 0, psi'(1) = 1 (wall=1) or
    psi'(-1) = 1 (wall=2); the boundary data is carried by a cubic lift."""
    from numpy.polynomial import Polynomial
    ws, prob, profile = op.ws, op.prob, op.profile
    a = prob.alpha
    if wall == 1:
        lift = Polynomial([-1, -1, 1, 1]) / 4  # (y^2 - 1)(1 + y)/4
    else:
        lift = Polynomial([1, -1, -1, 1]) / 4  # -(y^2 - 1)(1 - y)/4
    y = ws.nodes
    p = [lift.deriv(k)(y) if k else lift(y) for k in range(5)]
    lap = p[2] - a * a * p[0]
    U = profile.u(y)
    res = (-prob.nu * (p[4] - 2 * a * a * p[2] + a ** 4 * p[0])
           + (1j * a * (U - prob.lam) + prob.o_shift) * lap
           - 1j * a * profile.d2u(y) * p[0])
    x = op.solve_unknowns(-res[1:-1])
    return dict(w=op.to_w @ x + lap, psi=op.to_psi @ x + p[0], dpsi=op.to_dpsi @ x + p[1])


def _assemble(ws, alpha, V1, V2):
    kp, km = sinh_kernels(ws.nodes, alpha)
    A1 = ws.integrate(kp * V1)
    B1 = ws.integrate(km * V1)
    A2 = ws.integrate(km * V2)
    B2 = ws.integrate(kp * V2)
    D = A1 * A2 - B1 * B2
    C = np.array([[A2, -B1], [B2, -A1]]) / D
    return (A1, A2, B1, B2), C


def build_correctors(ws, profile, prob, threshold=THRESHOLD_L, ns_op=None, cl_op=None):
    """Both corrector routes.

    Airy route: w_err,j from the Navier-slip solver, A_i, B_i from the wall
    kernels, C from the 2x2 inversion.  Direct route: clamped homogeneous
    solves with unit wall slope.  ``gap`` holds the relative L2 distance of
    the leading-order (Airy-only) correctors and of the full Airy route to
    the direct route.
    """
    cs = build_approx(ws, profile, prob.nu, prob.alpha, prob.lam, prob.o_shift)
    if cs.L_min < threshold:
        raise BoundaryLayerError(f"min(L1, L2) = {cs.L_min:.3g} below threshold {threshold}")
    a = prob.alpha
    y = ws.nodes
    U = profile.u(y)
    upp = profile.d2u(y)
    U1 = profile.u(-1.0) + profile.du(-1.0) * (y + 1)
    U2 = profile.u(1.0) + profile.du(1.0) * (y - 1)
    ns_op = ns_op or OSOperator(ws, profile, prob.replace(bc=NAVIER_SLIP))
    errs = []
    for W, P, Uj in ((cs.w_app_1, cs.psi_app_1, U1), (cs.w_app_2, cs.psi_app_2, U2)):
        rhs = -1j * a * (U - Uj) * W + 1j * a * upp * P
        errs.append(ns_op.solve(rhs).w)
    cs.w_err_1, cs.w_err_2 = errs
    V1 = cs.w_app_1 + cs.w_err_1
    V2 = cs.w_app_2 + cs.w_err_2
    (cs.A1, cs.A2, cs.B1, cs.B2), cs.C = _assemble(ws, a, V1, V2)
    if abs(cs.det) < 0.5 * abs(cs.B1 * cs.B2):
        raise BoundaryLayerError("|A1 A2 - B1 B2| < |B1 B2|/2: layers too thick for the corrector algebra")
    cs.w_cor_1 = cs.C[0, 0] * V1 + cs.C[0, 1] * V2
    cs.w_cor_2 = cs.C[1, 0] * V1 + cs.C[1, 1] * V2
    d1 = ws.d1
    for j, w in ((1, cs.w_cor_1), (2, cs.w_cor_2)):
        psi = spectral.helmholtz_solve(ws, a, w)
        setattr(cs, f"psi_cor_{j}", psi)
        setattr(cs, f"dpsi_cor_{j}", d1 @ psi)
    (Aa1, Aa2, Ba1, Ba2), Capp = _assemble(ws, a, cs.w_app_1, cs.w_app_2)
    cs.A_app, cs.B_app = (Aa1, Aa2), (Ba1, Ba2)
    lead = (Capp[0, 0] * cs.w_app_1 + Capp[0, 1] * cs.w_app_2,
            Capp[1, 0] * cs.w_app_1 + Capp[1, 1] * cs.w_app_2)
    cl_op = cl_op or OSOperator(ws, profile, prob.replace(bc=NON_SLIP))
    for j in (1, 2):
        d = _direct_corrector(cl_op, j)
        cs.direct[j] = d
        ref = spectral.norm(ws, d["w"])
        full = getattr(cs, f"w_cor_{j}")
        cs.gap[f"leading_{j}"] = spectral.norm(ws, lead[j - 1] - d["w"]) / ref
        cs.gap[f"airy_{j}"] = spectral.norm(ws, full - d["w"]) / ref
    cs.gap["leading"] = max(cs.gap["leading_1"], cs.gap["leading_2"])
    cs.gap["airy"] = max(cs.gap["airy_1"], cs.gap["airy_2"])
    for i, L, a0, A, B, Aa, Ba in ((1, cs.L1, cs.a0_1, cs.A1, cs.B1, Aa1, Ba1),
                                   (2, cs.L2, cs.a0_2, cs.A2, cs.B2, Aa2, Ba2)):
        a0 = abs(a0)
        cs.ratios[f"A_app_{i}"] = abs(Aa) * L ** 2 / a0
        cs.ratios[f"B_app_{i}_lower"] = abs(Ba) * L / a0
        cs.ratios[f"A_{i}"] = abs(A) * L ** (9 / 8) / a0
        cs.ratios[f"B_{i}_lower"] = abs(B) * L / a0
    cs.ratios["det_over_B1B2"] = abs(cs.det) / abs(cs.B1 * cs.B2)
    for j in (1, 2):
        dpsi = getattr(cs, f"dpsi_cor_{j}")
        psi = getattr(cs, f"psi_cor_{j}")
        cs.ratios[f"u_cor_{j}_Linf"] = float(np.max(np.hypot(np.abs(dpsi), a * np.abs(psi))))
    return cs


def decompose_nonslip(ws, profile, prob, F, threshold=THRESHOLD_L):
    """w = w_na + c1 w_cor,1 + c2 w_cor,2 for the non-slip problem.

    Returns (w_na solution, c1, c2, corrector set, reconstructed dict).
    """
    if prob.bc != NON_SLIP:
        raise ValueError("decompose_nonslip expects a non-slip problem")
    ns_op = OSOperator(ws, profile, prob.replace(bc=NAVIER_SLIP))
    na = ns_op.solve(F)
    cs = build_correctors(ws, profile, prob, threshold, ns_op=ns_op)
    c1, c2 = wall_coefficients(ws, prob.alpha, na.w)
    w = na.w + c1 * cs.w_cor_1 + c2 * cs.w_cor_2
    psi = na.psi + c1 * cs.psi_cor_1 + c2 * cs.psi_cor_2
    dpsi = ws.d1 @ psi
    scale = max(spectral.norm(ws, psi), 1e-300)
    rec = dict(w=w, psi=psi, dpsi=dpsi,
               bc_defect=max(abs(dpsi[0]), abs(dpsi[-1]), abs(psi[0]), abs(psi[-1])) / scale)
    return na, complex(c1), complex(c2), cs, rec


def check_c_bounds(ws, profile, prob, F):
    """|c1| + |c2| against its L2, H^-1 and H^1 bounds in nu, alpha, lam."""
    nu, a, lam = prob.nu, prob.alpha, prob.lam
    lim = abs(lam - profile.u_min) ** 0.5 + nu ** 0.25 * a ** -0.25
    p = dict(profile=profile.name, nu=nu, alpha=a, lam=lam)
    if nu * a * a > lim:
        return [EstimateCheck("c_bounds.skipped", p, 0.0, 0.0,
                              note="restriction nu*alpha^2 <= |lam-U(0)|^(1/2) + nu^(1/4) alpha^(-1/4) violated")]
    F = np.asarray(F, dtype=complex)
    na = OSOperator(ws, profile, prob.replace(bc=NAVIER_SLIP)).solve(F)
    c1, c2 = wall_coefficients(ws, a, na.w)
    lhs = abs(c1) + abs(c2)
    du = abs(lam - profile.u_max)
    fl2 = spectral.norm(ws, F)
    fm1 = spectral.norm(ws, F, "Hm1", a)
    fh1 = spectral.norm(ws, F, "Hk", a, 1)
    return [
        EstimateCheck("c_bounds.L2", p, lhs, nu ** (-3 / 8) * a ** (-7 / 8) * (1 + a * du) ** -0.25 * fl2, n=ws.n),
        EstimateCheck("c_bounds.Hm1", p, lhs,
                      nu ** -0.5 * a ** -0.5 * (du + (nu / a) ** (1 / 3)) ** -0.25 * fm1, n=ws.n),
        EstimateCheck("c_bounds.H1", p, lhs, nu ** (-1 / 8) * a ** (-7 / 8) * (1 + du) ** -0.25 * fh1, n=ws.n),
    ]
