"""Fourier-Chebyshev nonlinear perturbation solver around a shear flow.

Modes alpha = -K..K in x, Chebyshev in y.  The nonlinear term is written
in the divergence form u.grad w = d_x(u1 w) + d_y(u2 w), so each mode sees
the forcing i a f1 + d_y f2 with f1 = -(u1 w)_a, f2 = -(u2 w)_a.  The
convolutions are evaluated directly over the retained modes, which keeps
them free of aliasing.  The zero mode is evolved as the mean streamwise
velocity u1_0 with Dirichlet walls.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg as sla

from . import _kernels, spectral
from .evolution import LinearPropagator, STARTUP, seeded_omega

MAX_K = 16
STABLE_GROWTH = 4.0
TRANSITION_GROWTH = 10.0
LINEAR_FACTOR = 10.0


class NonlinearError(RuntimeError):
    pass


@dataclass
class NonlinearState:
    nu: float
    K: int
    time: float
    modes: np.ndarray  # (2K+1, n) vorticity, row a+K
    u1_0: np.ndarray
    energy_ledger: dict = field(default_factory=dict)


@dataclass
class NonlinearRun:
    nu: float
    K: int
    amplitude: float
    dt: float
    t_final: float
    verdict: str
    times: np.ndarray
    mode_norms: np.ndarray  # (steps, K+1) L2 norms of w_a, a = 0..K
    linear_norms: np.ndarray  # same for the linear comparison run
    kinetic: np.ndarray
    E: np.ndarray  # (K+1,) stability norm per mode at t_final
    E0: np.ndarray
    final: NonlinearState
    flags: dict = field(default_factory=dict)
    reality_defect: float = 0.0

    @property
    def E_total(self):
        return float(self.E.sum())


class _ZeroMode:
    """CN heat step for u1_0 with u1_0(+-1) = 0 (identity when nu = 0)."""

    def __init__(self, ws, nu, dt):
        self.ws, self.nu, self.dt = ws, nu, dt
        n = ws.n
        if nu > 0:
            D2 = ws.d2[1:-1, 1:-1]
            I = np.eye(n - 2)
            lu = sla.lu_factor(I - 0.5 * dt * nu * D2)
            self.P = sla.lu_solve(lu, I + 0.5 * dt * nu * D2)
            self.S = sla.lu_solve(lu, I)
            self.P_half = self.S
        self.rows = slice(1, n - 1) if nu > 0 else slice(0, n)

    def step(self, u, g, half=False):
        out = np.zeros_like(u)
        if self.nu == 0:
            return u + self.dt * g
        r = self.rows
        if half:
            v = self.P_half @ u[r] + 0.5 * self.dt * (self.S @ g[r])
            out[r] = self.P_half @ v + 0.5 * self.dt * (self.S @ g[r])
        else:
            out[r] = self.P @ u[r] + self.dt * (self.S @ g[r])
        return out


def seeded_modes(ws, K, seed, active=None):
    """Unit-H^4 random data for modes 1..K (or the listed ``active`` modes)."""
    n = ws.n
    modes = np.zeros((2 * K + 1, n), dtype=complex)
    for a in (active or range(1, K + 1)):
        w = seeded_omega(ws, a, seed * 1000 + a)
        w = w * 0.5 ** (a - 1)
        modes[K + a] = w
        modes[K - a] = np.conj(w)
    return modes


def h4_sum(ws, modes, K):
    """sum over all a of ||w_a||_{H^4_a} (negative modes by symmetry)."""
    tot = 0.0
    for a in range(-K, K + 1):
        if np.any(modes[a + K]):
            tot += spectral.norm(ws, modes[a + K], "Hk", abs(a), 4)
    return tot


class _Stepper:
    def __init__(self, ws, profile, nu, K, dt, background=True):
        if K > MAX_K:
            raise NonlinearError(f"K={K} above the desk-scale limit {MAX_K}")
        self.ws, self.nu, self.K, self.dt = ws, nu, K, dt
        self.props = [LinearPropagator(ws, profile, nu, a, dt, advect=background, coupling=background)
                      for a in range(1, K + 1)]
        self.zero = _ZeroMode(ws, nu, dt)

    def fields(self, xs, u10):
        """Full (2K+1, n) stacks of w, u1, u2 and the per-mode outputs."""
        ws, K, n = self.ws, self.K, self.ws.n
        W = np.zeros((2 * K + 1, n), dtype=complex)
        U1 = np.zeros_like(W)
        U2 = np.zeros_like(W)
        parts = []
        for a, (p, x) in enumerate(zip(self.props, xs), start=1):
            w, dphi, phi, dw = _out(p, x)
            parts.append((w, dphi, phi, dw))
            W[K + a], U1[K + a], U2[K + a] = w, -dphi, 1j * a * phi
            W[K - a], U1[K - a], U2[K - a] = np.conj(w), -np.conj(dphi), np.conj(1j * a * phi)
        U1[K] = u10
        W[K] = -(ws.d1 @ u10)
        return W, U1, U2, parts

    def fluxes(self, W, U1, U2):
        f1 = -_kernels.mode_convolution(U1, W)
        f2 = -_kernels.mode_convolution(U2, W)
        return f1, f2

    def rhs(self, f1, f2):
        K = self.K
        g = [p.forcing(f1[K + a], f2[K + a]) for a, p in enumerate(self.props, start=1)]
        g0 = -f2[K]  # d_t u1_0 - nu u1_0'' = -(u2 w)_0
        return g, g0


def _out(p, x):
    n = p.ws.n
    o = p.outputs @ x
    return o[:n], o[n:2 * n], o[2 * n:3 * n], o[3 * n:]


def run_nonlinear(ws, profile, nu, K, omega_in, amplitude, t_final, dt=0.02, eps_weight=0.05,
                  u1_0=None, background=True, sample_every=10, linear_compare=True):
    """IMEX run: CN per mode for the linear part, AB2 for the convolution.

    ``omega_in`` is a (2K+1, n) stack rescaled so that the H^4 sum equals
    ``amplitude`` (unless it is all zero).  Returns a NonlinearRun with the
    verdict ``stable``, ``transitioned`` or ``inconclusive``.
    """
    n = ws.n
    W0 = np.asarray(omega_in, dtype=complex).copy()
    if W0.shape != (2 * K + 1, n):
        raise NonlinearError("omega_in must have shape (2K+1, n)")
    s = h4_sum(ws, W0, K)
    if s > 0:
        W0 *= amplitude / s
    st = _Stepper(ws, profile, nu, K, dt, background)
    xs = [p.state_from_w(W0[K + a]) for a, p in enumerate(st.props, start=1)]
    xl = [x.copy() for x in xs]
    u10 = np.zeros(n, dtype=complex) if u1_0 is None else np.asarray(u1_0, dtype=complex).copy()
    nsteps = int(math.ceil(t_final / dt - 1e-9))
    q = ws.quad
    sw = 1 - ws.nodes ** 2
    wt_rate = eps_weight * math.sqrt(nu)
    # E ledger accumulators per mode a = 1..K
    sup_u = np.zeros(K)
    l2_u = np.zeros(K)
    sup_uinf = np.zeros(K)
    l2_w = np.zeros(K)
    sup_w = np.zeros(K)
    sup_sw = np.zeros(K)
    sup_w0 = 0.0
    prev = None
    times, norms, lnorms, kin = [], [], [], []
    flags = {"blow_up": False}
    reality = 0.0

    def ledger(t, parts, weight_dt):
        nonlocal sup_w0
        e = math.exp(wt_rate * t)
        for i, (w, dphi, phi, _) in enumerate(parts):
            a = i + 1
            u2 = np.abs(dphi) ** 2 + a * a * np.abs(phi) ** 2
            uL2 = math.sqrt(q @ u2)
            wL2 = math.sqrt(q @ np.abs(w) ** 2)
            sup_u[i] = max(sup_u[i], e * uL2)
            sup_uinf[i] = max(sup_uinf[i], e * math.sqrt(u2.max()))
            sup_w[i] = max(sup_w[i], e * wL2)
            sup_sw[i] = max(sup_sw[i], e * math.sqrt(q @ (sw * np.abs(w) ** 2)))
            l2_u[i] += weight_dt * (e * uL2) ** 2
            l2_w[i] += weight_dt * (e * wL2) ** 2

    def E_now():
        a = np.arange(1, K + 1)
        Ea = (np.sqrt(a) * sup_u + np.sqrt(a) * np.sqrt(l2_u) + sup_uinf
              + nu ** 0.25 * a ** 0.25 * np.sqrt(l2_w) + nu ** 0.25 * sup_w + sup_sw)
        return np.concatenate([[sup_w0], Ea])

    for i in range(nsteps + 1):
        t = i * dt
        W, U1, U2, parts = st.fields(xs, u10)
        w0n = math.sqrt(q @ np.abs(W[K]) ** 2)
        sup_w0 = max(sup_w0, w0n)
        ledger(t, parts, 0.5 * dt if i in (0, nsteps) else dt)
        if i == 0:
            E_init = E_now()
        if i % sample_every == 0 or i == nsteps:
            times.append(t)
            norms.append([w0n] + [math.sqrt(q @ np.abs(p[0]) ** 2) for p in parts])
            ke = q @ np.abs(u10) ** 2 + 2 * sum(q @ (np.abs(p[1]) ** 2 + (a * np.abs(p[2])) ** 2)
                                                 for a, p in enumerate(parts, start=1))
            kin.append(float(ke))
            if linear_compare:
                lnorms.append([0.0] + [math.sqrt(q @ np.abs(_out(p, x)[0]) ** 2)
                                       for p, x in zip(st.props, xl)])
        if not all(np.all(np.isfinite(x)) for x in xs) or not np.all(np.isfinite(u10)):
            flags["blow_up"] = True
            break
        if i == nsteps:
            break
        f1, f2 = st.fluxes(W, U1, U2)
        g, g0 = st.rhs(f1, f2)
        start_up = i < STARTUP and nu > 0
        if prev is None or start_up:
            gx, gx0 = g, g0
        else:
            gx = [1.5 * a - 0.5 * b for a, b in zip(g, prev[0])]
            gx0 = 1.5 * g0 - 0.5 * prev[1]
        prev = (g, g0)
        for j, p in enumerate(st.props):
            if start_up:
                xs[j] = p.half_steps(xs[j], gx[j], gx[j])
                if linear_compare:
                    xl[j] = p.half_steps(xl[j])
            else:
                xs[j] = p.P @ xs[j] + dt * (p.S @ gx[j])
                if linear_compare:
                    xl[j] = p.P @ xl[j]
        u10 = st.zero.step(u10, gx0, half=start_up)
    W, _, _, _ = st.fields(xs, u10)
    reality = float(max(np.max(np.abs(W[K + a] - np.conj(W[K - a]))) for a in range(K + 1)))
    E = E_now()
    norms = np.array(norms)
    lnorms = np.array(lnorms) if linear_compare else None
    verdict = _verdict(norms, lnorms, E, E_init, flags)
    final = NonlinearState(nu, K, times[-1], W, u10, {"E": E, "E0": E_init})
    return NonlinearRun(nu, K, amplitude, dt, times[-1], verdict, np.array(times), norms, lnorms,
                        np.array(kin), E, E_init, final, flags, reality)


def _verdict(norms, lnorms, E, E0, flags):
    if flags.get("blow_up"):
        return "transitioned"
    nz = norms[:, 1:].sum(axis=1)
    if nz[0] > 0 and np.max(nz) > TRANSITION_GROWTH * nz[0]:
        return "transitioned"
    ok_E = E.sum() <= STABLE_GROWTH * max(E0.sum(), 1e-300)
    ok_lin = True
    if lnorms is not None:
        floor = 1e-12 * max(norms[0, 1:].max(), 1e-300)
        ok_lin = bool(np.all(norms[-1, 1:] <= LINEAR_FACTOR * lnorms[-1, 1:] + floor))
    return "stable" if (ok_E and ok_lin) else "inconclusive"


def bootstrap_ratio(run, ws, omega_h4_sum):
    """sum E over (sum ||w_in||_{H^4} + nu^(-2/3) (sum E)^2)."""
    tot = run.E_total
    return tot / (omega_h4_sum + run.nu ** (-2 / 3) * tot ** 2)


def threshold_sweep(ws, profile, nus, amp_factors, seeds, K=8, t_final=None, dt=0.02):
    """Verdict table over nu x amplitude (A nu^(2/3)) x seed, the smallest
    transitioning amplitude per nu and an exploratory log-log fit."""
    from .orr_sommerfeld import fit_scaling
    rows = []
    a_star = {}
    for nu in nus:
        tf = t_final or nu ** -0.5
        first = None
        for A in sorted(amp_factors):
            for seed in seeds:
                W0 = seeded_modes(ws, K, seed)
                r = run_nonlinear(ws, profile, nu, K, W0, A * nu ** (2 / 3), tf, dt)
                rows.append(dict(nu=nu, amplitude=A * nu ** (2 / 3), A=A, seed=seed, verdict=r.verdict,
                                 final_E=r.E_total, max_E=float(max(r.E_total, r.E0.sum()))))
                if r.verdict == "transitioned" and first is None:
                    first = A * nu ** (2 / 3)
        a_star[nu] = first
    defined = [(nu, v) for nu, v in a_star.items() if v is not None]
    fit = fit_scaling([d[0] for d in defined], [d[1] for d in defined]) if len(defined) >= 2 else None
    return rows, a_star, fit


def monotonicity_violations(rows):
    """Fraction of cells whose verdict contradicts a stable-below /
    transitioned-above ordering in amplitude (per nu and seed)."""
    bad = tot = 0
    keys = sorted({(r["nu"], r["seed"]) for r in rows})
    for nu, seed in keys:
        col = sorted((r for r in rows if r["nu"] == nu and r["seed"] == seed), key=lambda r: r["A"])
        seen_trans = False
        for r in col:
            tot += 1
            if r["verdict"] == "transitioned":
                seen_trans = True
            elif seen_trans and r["verdict"] == "stable":
                bad += 1
    return bad / tot if tot else 0.0
