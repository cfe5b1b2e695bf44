"""Orr-Sommerfeld resolvent problem

    -nu (d^2 - a^2) w + i a (U - lam) w - i a U'' psi + o w = F,
    (d^2 - a^2) psi = w,

under Navier-slip (psi = w = 0 at the walls) or non-slip
(psi = psi' = 0 at the walls) boundary conditions.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import LinearOperator, eigsh

from . import spectral
from .checks import EstimateCheck

NAVIER_SLIP = "navier_slip"
NON_SLIP = "non_slip"

PAIRS = ("L2->L2_w", "Hm1->L2_w", "Hm1->L2_u", "L2->L2_u", "H1->L2_u",
         "L2->Linf_u", "H1->Linf_u", "H1->L2_w", "L2->L2_dw", "Hm1->L2_dw")

# growth exponents p in  norm <~ nu^(-p)  (alpha fixed)
EXPONENTS = {
    NON_SLIP: {"L2->L2_w": 5 / 8, "L2->L2_u": 1 / 4, "L2->Linf_u": 3 / 8,
               "Hm1->L2_w": 3 / 4, "Hm1->L2_u": 1 / 2, "H1->L2_u": 0.0,
               "H1->L2_w": 3 / 8, "H1->Linf_u": 1 / 8},
    NAVIER_SLIP: {"L2->L2_w": 1 / 2, "Hm1->L2_w": 3 / 4, "Hm1->L2_u": 1 / 2,
                  "L2->L2_u": 1 / 4, "H1->L2_u": 0.0, "H1->L2_w": 1 / 4,
                  "H1->Linf_u": 1 / 8, "L2->L2_dw": 3 / 4, "Hm1->L2_dw": 1.0},
}


class OSSingularError(RuntimeError):
    pass


@dataclass
class OSProblem:
    nu: float
    alpha: int
    lam: float
    bc: str = NAVIER_SLIP
    o_shift: complex = 0j
    eps0: float = 0.1

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.bc not in (NAVIER_SLIP, NON_SLIP):
            raise ValueError(f"unknown bc {self.bc!r}")
        if abs(self.o_shift) > self.eps0 * math.sqrt(self.nu * self.alpha) * (1 + 1e-12):
            raise ValueError("|o_shift| exceeds eps0 * sqrt(nu * alpha)")

    def replace(self, **kw):
        d = dict(nu=self.nu, alpha=self.alpha, lam=self.lam, bc=self.bc,
                 o_shift=self.o_shift, eps0=self.eps0)
        d.update(kw)
        return OSProblem(**d)


@dataclass
class OSSolution:
    w: np.ndarray
    psi: np.ndarray
    u: tuple
    residual: float
    bc_defect: float


class OSOperator:
    """Assembled and factorized OS operator for one (ws, profile, problem).

    Unknowns are interior w values (Navier-slip) or interior psi values of
    the clamped interpolant (non-slip).  ``to_w``, ``to_psi`` and ``to_dpsi``
    map unknowns to nodal fields on the full grid.
    """

    def __init__(self, ws, profile, prob):
        self.ws, self.profile, self.prob = ws, profile, prob
        n = ws.n
        a = prob.alpha
        y = ws.nodes
        U = profile.u(y)[1:-1]
        Upp = profile.d2u(y)[1:-1]
        I = np.eye(n - 2)
        D2i = ws.d2[1:-1, 1:-1]
        if prob.bc == NAVIER_SLIP:
            Hinv = ws.helmholtz_inverse(a)
            A = (prob.nu * (a * a * I - D2i) + np.diag(1j * a * (U - prob.lam) + prob.o_shift)
                 - 1j * a * Upp[:, None] * Hinv)
            self.to_w = np.vstack([np.zeros((1, n - 2)), I, np.zeros((1, n - 2))])
            self.to_psi = ws.pad(Hinv)
            self.to_dpsi = ws.d1[:, 1:-1] @ Hinv
        else:
            d1c, d2c, d4c = ws.clamped()
            lap = d2c[1:-1] - a * a * I
            A = (-prob.nu * (d4c - 2 * a * a * d2c[1:-1] + a ** 4 * I)
                 + (1j * a * (U - prob.lam) + prob.o_shift)[:, None] * lap
                 - 1j * a * np.diag(Upp))
            self.to_w = d2c - a * a * ws.pad(I)
            self.to_psi = ws.pad(I)
            self.to_dpsi = d1c
        self.A = A
        self.lu = sla.lu_factor(A, check_finite=False)
        if not np.all(np.isfinite(self.lu[0])) or np.min(np.abs(np.diag(self.lu[0]))) == 0.0:
            raise OSSingularError(f"singular OS operator at lambda={prob.lam}")

    def solve_unknowns(self, F_inner):
        return sla.lu_solve(self.lu, F_inner, check_finite=False)

    def solve(self, F):
        F = np.asarray(F, dtype=complex)
        x = self.solve_unknowns(F[1:-1])
        w = self.to_w @ x
        psi = self.to_psi @ x
        dpsi = self.to_dpsi @ x
        u = (-dpsi, 1j * self.prob.alpha * psi)
        res = float(np.linalg.norm(self.A @ x - F[1:-1]) / max(np.linalg.norm(F[1:-1]), 1e-300))
        if self.prob.bc == NAVIER_SLIP:
            defect = max(abs(w[0]), abs(w[-1]), abs(psi[0]), abs(psi[-1]))
        else:
            defect = max(abs(dpsi[0]), abs(dpsi[-1]), abs(psi[0]), abs(psi[-1]))
        scale = max(spectral.norm(self.ws, psi), 1e-300)
        return OSSolution(w, psi, u, res, defect / scale)


def solve_os(ws, profile, prob, F):
    """Solve the OS problem for forcing F given on the ws grid."""
    return OSOperator(ws, profile, prob).solve(F)


# ---------------------------------------------------------------------------
# operator norms
# ---------------------------------------------------------------------------

class NormWeights:
    """Input factors R (F = R z, ||F|| = ||z||) and output factors O
    (||out|| = ||O x||) for the discrete norms on one grid."""

    def __init__(self, ws, alpha):
        self.ws, self.alpha = ws, alpha
        W = ws.quad
        sw = np.sqrt(W)
        n = ws.n
        self.r_in = {}
        self.r_in["L2"] = np.diag(1.0 / sw[1:-1])
        G = ws.gram(alpha)
        K = (W[1:-1, None] * sla.inv(G)) * W[None, 1:-1]
        K = 0.5 * (K + K.T)
        L = sla.cholesky(K, lower=True)
        # ||F||^2 = F^T K F = ||L^T F||^2, so F = L^{-T} z
        self.r_in["Hm1"] = sla.solve_triangular(L.T, np.eye(n - 2), lower=False)
        Gf = ws.d1.T @ (W[:, None] * ws.d1) + alpha * alpha * np.diag(W)
        Gf = 0.5 * (Gf + Gf.T)
        Lf = sla.cholesky(Gf, lower=True)
        self.r_in["H1"] = sla.solve_triangular(Lf.T, np.eye(n), lower=False)[1:-1]
        self.sw = sw


def _sigma_max(Y):
    """Largest singular value, deterministic."""
    m, k = Y.shape
    if min(m, k) <= 64:
        return float(sla.svdvals(Y)[0])
    v0 = np.ones(min(m, k)) / math.sqrt(min(m, k))
    if m >= k:
        op = LinearOperator((k, k), matvec=lambda x: Y.conj().T @ (Y @ x), dtype=complex)
    else:
        op = LinearOperator((m, m), matvec=lambda x: Y @ (Y.conj().T @ x), dtype=complex)
    val = eigsh(op, k=1, which="LA", v0=v0.astype(complex), tol=1e-12,
                return_eigenvectors=False)
    return math.sqrt(max(float(val[0].real), 0.0))


def _pair_norm2(r1, r2):
    a = np.einsum("ij,ij->i", r1, r1.conj()).real
    d = np.einsum("ij,ij->i", r2, r2.conj()).real
    b = np.einsum("ij,ij->i", r1, r2.conj())
    return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)


def _block_linf(ws, Y1, Y2, polish=3):
    """sup over y of the spectral norm of the 2-row block (Y1(y); Y2(y)).

    Nodal maximum first, then a bounded scalar search on the interpolants
    around the ``polish`` best nodes.
    """
    vals = _pair_norm2(Y1, Y2)
    best = float(vals.max())
    x = ws.nodes
    for j in np.argsort(-vals)[:polish]:
        lo, hi = x[min(j + 1, ws.n - 1)], x[max(j - 1, 0)]

        def neg(y):
            v = ws.interp_row(y)
            return -float(_pair_norm2((v @ Y1)[None], (v @ Y2)[None])[0])

        r = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, hi - lo)})
        best = max(best, -float(r.fun))
    return math.sqrt(best)


def resolvent_norms(ws, profile, prob, pairs=PAIRS, weights=None, op=None):
    """Operator norms of F -> (w, u, ...) for the requested norm pairs."""
    weights = weights or NormWeights(ws, prob.alpha)
    op = op or OSOperator(ws, profile, prob)
    sw = weights.sw
    a = prob.alpha
    by_in = {}
    for p in pairs:
        by_in.setdefault(p.split("->")[0], []).append(p)
    out = {}
    for kind, plist in by_in.items():
        X = op.solve_unknowns(weights.r_in[kind])
        need_u = any(p.endswith("_u") for p in plist)
        if need_u:
            dpsi = op.to_dpsi @ X
            psi = op.to_psi @ X
        for p in plist:
            target = p.split("->")[1]
            if target == "L2_w":
                out[p] = _sigma_max(sw[:, None] * (op.to_w @ X))
            elif target == "L2_dw":
                w = op.to_w @ X
                out[p] = _sigma_max(np.vstack([sw[:, None] * (ws.d1 @ w), a * sw[:, None] * w]))
            elif target == "L2_u":
                out[p] = _sigma_max(np.vstack([sw[:, None] * dpsi, a * sw[:, None] * psi]))
            elif target == "Linf_u":
                out[p] = _block_linf(ws, dpsi, a * psi)
            else:
                raise ValueError(f"unknown pair {p!r}")
    return out


def resolvent_norm(ws, profile, prob, pair):
    return resolvent_norms(ws, profile, prob, (pair,))[pair]


# ---------------------------------------------------------------------------
# lambda scans and scaling fits
# ---------------------------------------------------------------------------

@dataclass
class ResolventScan:
    nu: float
    alpha: int
    bc: str
    pairs: tuple
    lambda_grid: np.ndarray
    norms: np.ndarray  # (len(lambda_grid), len(pairs))
    sup_norm: dict = field(default_factory=dict)
    argmax_lambda: dict = field(default_factory=dict)
    refinements: int = 0

    def rows(self):
        for i, lam in enumerate(self.lambda_grid):
            for j, p in enumerate(self.pairs):
                yield dict(nu=self.nu, alpha=self.alpha, bc=self.bc, lam=float(lam),
                           pair=p, norm=float(self.norms[i, j]))


def regime_points(profile, nu, alpha):
    """Case-split abscissae: U(0) +- nu^(1/2) a^(-1/2), U(1) - nu^(1/3) a^(-1/3)."""
    s = math.sqrt(nu / alpha)
    return np.array([profile.u_min - s, profile.u_min, profile.u_min + s,
                     profile.u_max - (nu / alpha) ** (1 / 3), profile.u_max])


def initial_grid(profile, nu, alpha, npts=101):
    base = np.linspace(profile.u_min - 1.0, profile.u_max + 1.0, npts)
    return np.unique(np.concatenate([base, regime_points(profile, nu, alpha)]))


def _map(fn, items, workers):
    if workers and workers > 1 and len(items) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


class _Evaluator:
    def __init__(self, n, profile, nu, alpha, bc, pairs, o_shift=0j):
        self.n, self.profile, self.nu, self.alpha = n, profile, nu, alpha
        self.bc, self.pairs, self.o_shift = bc, tuple(pairs), o_shift
        self._weights = None

    def __call__(self, lam):
        ws = spectral.workspace(self.n)
        if self._weights is None:
            self._weights = NormWeights(ws, self.alpha)
        prob = OSProblem(self.nu, self.alpha, float(lam), self.bc, self.o_shift)
        r = resolvent_norms(ws, self.profile, prob, self.pairs, self._weights)
        return [r[p] for p in self.pairs]

    def __getstate__(self):
        d = dict(self.__dict__)
        d["_weights"] = None
        return d


def scan_lambda(ws, profile, nu, alpha, bc, pairs=("L2->L2_w",), npts=101,
                rtol=0.02, max_rounds=12, workers=1, o_shift=0j):
    """Sup over real lambda of the resolvent norms.

    Starts from a uniform grid on [U(0)-1, U(1)+1] plus the regime split
    points, then bisects around every local maximum (per pair) until the
    sup of each pair changes by less than ``rtol`` in a round.
    """
    pairs = tuple(pairs)
    ev = _Evaluator(ws.n, profile, nu, alpha, bc, pairs, o_shift)
    lams = initial_grid(profile, nu, alpha, npts)
    vals = np.array(_map(ev, list(lams), workers))
    rounds = 0
    prev = vals.max(axis=0)
    for rounds in range(1, max_rounds + 1):
        new = set()
        for j in range(len(pairs)):
            col = vals[:, j]
            peaks = [i for i in range(len(col))
                     if (i == 0 or col[i] >= col[i - 1]) and (i == len(col) - 1 or col[i] >= col[i + 1])]
            peaks = sorted(peaks, key=lambda i: -col[i])[:4]
            for i in peaks:
                if i > 0:
                    new.add(0.5 * (lams[i - 1] + lams[i]))
                if i < len(col) - 1:
                    new.add(0.5 * (lams[i] + lams[i + 1]))
        new = np.array(sorted(x for x in new if not np.any(np.isclose(x, lams, rtol=0, atol=1e-13))))
        if new.size == 0:
            break
        nv = np.array(_map(ev, list(new), workers))
        lams = np.concatenate([lams, new])
        vals = np.vstack([vals, nv])
        order = np.argsort(lams, kind="stable")
        lams, vals = lams[order], vals[order]
        cur = vals.max(axis=0)
        if np.all(np.abs(cur - prev) <= rtol * prev) and rounds >= 2:
            prev = cur
            break
        prev = cur
    scan = ResolventScan(nu, alpha, bc, pairs, lams, vals, refinements=rounds)
    for j, p in enumerate(pairs):
        i = int(np.argmax(vals[:, j]))
        scan.sup_norm[p] = float(vals[i, j])
        scan.argmax_lambda[p] = float(lams[i])
    return scan


@dataclass
class ScalingFit:
    nus: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float
    r2: float

    @property
    def accepted(self):
        return self.r2 >= 0.95


def fit_scaling(nus, values):
    """Least-squares fit log(value) = intercept + slope * log(1/nu).

    ``slope`` is the growth exponent p in value ~ nu^(-p).  r2 is reported
    as 1 for exactly constant data.
    """
    nus = np.asarray(nus, dtype=float)
    values = np.asarray(values, dtype=float)
    x = np.log(1.0 / nus)
    yv = np.log(values)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, yv, rcond=None)
    resid = yv - A @ np.array([slope, icpt])
    sst = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 if sst <= 1e-24 * max(1.0, float(np.sum(yv ** 2))) else 1.0 - float(np.sum(resid ** 2)) / sst
    return ScalingFit(nus, values, float(slope), float(icpt), float(r2))


# ---------------------------------------------------------------------------
# energy-type checks for the Navier-slip solution
# ---------------------------------------------------------------------------

def check_energy_estimates(ws, profile, prob, F, sol=None):
    """Energy inequalities for a Navier-slip solution, each in its regime."""
    if prob.bc != NAVIER_SLIP:
        raise ValueError("energy estimates apply to the Navier-slip problem")
    sol = sol or solve_os(ws, profile, prob, F)
    F = np.asarray(F, dtype=complex)
    y = ws.nodes
    nu, a, lam = prob.nu, prob.alpha, prob.lam
    w = sol.w
    upp = profile.d2u(y)
    wl2 = spectral.norm(ws, w)
    dwl2 = spectral.norm(ws, ws.d1 @ w)
    grad_w = math.hypot(dwl2, a * wl2)
    pair = ws.inner_product(F, w / upp)
    p = dict(profile=profile.name, nu=nu, alpha=a, lam=lam)
    out = [
        EstimateCheck("energy.dissipation", p, nu * dwl2 ** 2 + nu * a * a * wl2 ** 2,
                      nu * wl2 ** 2 + abs(pair.real), n=ws.n),
        EstimateCheck("energy.grad_L2", p, a * grad_w, wl2 + spectral.norm(ws, F) / nu, n=ws.n),
        EstimateCheck("energy.grad_Hm1", p, grad_w, wl2 + spectral.norm(ws, F, "Hm1", a) / nu, n=ws.n),
    ]
    if lam <= profile.u_min + math.sqrt(nu / a):
        out.append(EstimateCheck("energy.below_min", p,
                                 a * abs(lam - profile.u_min) * wl2 ** 2
                                 + 2 * math.sqrt(nu * a) * wl2 ** 2, abs(pair), n=ws.n))
    if lam >= profile.u_max - (nu / a) ** (1 / 3):
        out.append(EstimateCheck("energy.above_max", p,
                                 a * abs(lam - profile.u_max) * wl2 ** 2
                                 + 2 * nu ** (1 / 3) * a ** (2 / 3) * wl2 ** 2, abs(pair), n=ws.n))
    return out


def check_weak_type(ws, profile, prob, F, sol=None):
    """|<w/U'', f>| for f = U'' psi (equal to ||u||^2) against the bound built
    from the absorbed Rayleigh solution Ray_{delta1}^{-1} f."""
    from .rayleigh import solve_ray_delta
    sol = sol or solve_os(ws, profile, prob.replace(bc=NAVIER_SLIP), F)
    nu, a, lam = prob.nu, prob.alpha, prob.lam
    upp = profile.d2u(ws.nodes)
    f = upp * sol.psi
    lhs = abs(ws.inner_product(sol.w / upp, f))
    d = (nu / a) ** 0.25
    d1 = d ** (4 / 3) * (abs(lam - profile.u_min) ** 0.5 + d) ** (2 / 3)
    ray = solve_ray_delta(ws, profile, a, lam, d1, f)
    W = ray.w
    rhs = (spectral.norm(ws, F) / a) * (spectral.norm(ws, W)
                                        + math.sqrt(nu / a) / math.sqrt(d1) * spectral.norm(ws, ws.d1 @ W))
    p = dict(profile=profile.name, nu=nu, alpha=a, lam=lam, delta1=d1)
    return EstimateCheck("weak_type.L2", p, lhs, rhs, n=ws.n)
