"""Single-mode linearized evolution

    d_t w - nu (d^2 - a^2) w + i a U w - i a U'' phi = i a f1 + d_y f2,
    (d^2 - a^2) phi = w,

with clamped walls phi = phi' = 0 (nu > 0) or phi = 0 only (nu = 0), and
the weighted space-time functionals of the linear stability estimate.
"""

from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import chebyshev as C

from . import spectral
from .checks import EstimateCheck
from .orr_sommerfeld import fit_scaling

EPS_WEIGHT = 0.05
STARTUP = 2
GROWTH_ABORT = 1e6

FUNCTIONALS = ("u_LinfL2", "u_L2L2", "u_LinfLinf", "w_L2L2", "w_LinfL2", "dw_L2L2", "sw_LinfL2")


class EvolutionError(RuntimeError):
    pass


@dataclass
class EvolutionRun:
    nu: float
    alpha: int
    dt: float
    t_final: float
    eps_weight: float
    n: int
    times: np.ndarray = None  # every step
    series: dict = field(default_factory=dict)  # name -> per-step values
    snapshots: list = field(default_factory=list)  # (t, w) pairs
    functionals: dict = field(default_factory=dict)
    forcing_norm: float = 0.0
    projection: tuple = (0j, 0j)
    flags: dict = field(default_factory=dict)

    def total(self):
        return sum(self.functionals.values())


@dataclass
class RateFit:
    window: tuple
    rate: float
    r2: float
    exponent_vs_nu: object = None


def seeded_omega(ws, alpha, seed, degree=10, decay=0.5):
    """Smooth random vorticity: Chebyshev series with geometric decay,
    made compatible with the clamped walls and normalized in H^4_alpha."""
    rng = np.random.default_rng(seed)
    k = np.arange(degree + 1)
    coef = (rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)) * decay ** k
    w = C.chebval(ws.nodes, coef)
    w, _ = compatibility_projection(ws, alpha, w)
    return w / spectral.norm(ws, w, "Hk", alpha, 4)


def compatibility_projection(ws, alpha, w):
    """Remove the span of e^{+-alpha y} under the quadrature pairing
    (Gram-Schmidt).  Returns the projected field and the removed
    pairings <w, e^{alpha y}>, <w, e^{-alpha y}>."""
    y = ws.nodes
    w = np.asarray(w, dtype=complex)
    basis = [np.exp(alpha * (y - 1)), np.exp(-alpha * (y + 1))]
    removed = (ws.inner_product(w, basis[0]), ws.inner_product(w, basis[1]))
    q = []
    for b in basis:
        v = b.astype(complex)
        for e in q:
            v = v - ws.inner_product(v, e) * e
        q.append(v / math.sqrt(ws.inner_product(v, v).real))
    for e in q:
        w = w - ws.inner_product(w, e) * e
    return w, removed


class LinearPropagator:
    """Crank-Nicolson propagator for one (profile, nu, alpha, dt).

    Viscous case: unknowns are interior phi values of the clamped
    interpolant.  Inviscid case: unknowns are nodal w values and phi comes
    from the Dirichlet Helmholtz inverse.  ``outputs`` maps the state to
    stacked (w, phi', phi, w') nodal fields.
    """

    def __init__(self, ws, profile, nu, alpha, dt, advect=True, coupling=True):
        if nu < 0:
            raise ValueError("nu must be >= 0")
        self.ws, self.profile, self.nu, self.alpha, self.dt = ws, profile, nu, alpha, dt
        n = ws.n
        a = alpha
        y = ws.nodes
        U = profile.u(y) if advect else np.zeros(n)
        Upp = profile.d2u(y) if coupling else np.zeros(n)
        if nu > 0:
            d1c, d2c, d4c = ws.clamped()
            I = np.eye(n - 2)
            lap_full = d2c - a * a * ws.pad(I)
            M = lap_full[1:-1]
            K = (nu * (d4c - 2 * a * a * d2c[1:-1] + a ** 4 * I)
                 - 1j * a * U[1:-1, None] * M + 1j * a * np.diag(Upp[1:-1]))
            to_w, to_phi, to_dphi = lap_full, ws.pad(I), d1c
            self.rows = slice(1, n - 1)
        else:
            Hinv = ws.pad(ws.helmholtz_inverse(a))  # (n, n-2)
            to_phi = np.zeros((n, n))
            to_phi[:, 1:-1] = Hinv
            M = np.eye(n)
            K = -1j * a * np.diag(U) + 1j * a * Upp[:, None] * to_phi
            to_w, to_dphi = np.eye(n), ws.d1 @ to_phi
            self.rows = slice(0, n)
        lhs = M - 0.5 * dt * K
        rhs = M + 0.5 * dt * K
        lu = sla.lu_factor(lhs)
        self.P = sla.lu_solve(lu, rhs)
        self.S = sla.lu_solve(lu, np.eye(lhs.shape[0]))
        # backward-Euler half step with the same factorization (start-up damping)
        self.P_half = self.S @ M
        self.M = M
        self.outputs = np.vstack([to_w, to_dphi, to_phi, ws.d1 @ to_w])
        self.to_w = to_w

    def state_from_w(self, w):
        w = np.asarray(w, dtype=complex)
        if self.nu > 0:
            return sla.solve(self.M, w[1:-1])
        return w.copy()

    def forcing(self, f1, f2):
        g = 1j * self.alpha * np.asarray(f1, dtype=complex) + self.ws.d1 @ np.asarray(f2, dtype=complex)
        return g[self.rows]

    def step(self, x, g0=None, g1=None):
        x = self.P @ x
        if g0 is not None:
            x = x + 0.5 * self.dt * (self.S @ (g0 + g1))
        return x

    def half_steps(self, x, g_mid=None, g1=None):
        """Two backward-Euler half steps replacing one CN step.  Used for the
        first steps so that the stiff clamped modes, which CN leaves almost
        undamped, are removed from the data."""
        x = self.P_half @ x
        if g_mid is not None:
            x = x + 0.5 * self.dt * (self.S @ g_mid)
        x = self.P_half @ x
        if g1 is not None:
            x = x + 0.5 * self.dt * (self.S @ g1)
        return x


def _fields(prop, x):
    n = prop.ws.n
    out = prop.outputs @ x
    return out[:n], out[n:2 * n], out[2 * n:3 * n], out[3 * n:]


def _step_values(ws, alpha, w, dphi, phi, dw):
    q = ws.quad
    y2 = 1 - ws.nodes ** 2
    aw = np.abs(w) ** 2
    u2 = np.abs(dphi) ** 2 + alpha * alpha * np.abs(phi) ** 2
    return dict(
        u_L2=q @ u2,
        u_Linf=float(np.max(u2)),
        w_L2=q @ aw,
        dw_L2=q @ np.abs(dw) ** 2,
        sw_L2=q @ (y2 * aw),
    )


def run_linear(ws, profile, nu, alpha, omega_in, forcing=None, t_final=100.0, dt=None,
               eps_weight=EPS_WEIGHT, snapshot_every=0, advect=True, coupling=True,
               project=True, prop=None):
    """Crank-Nicolson run with the weighted functionals accumulated per step.

    The first ``STARTUP`` steps are backward-Euler half-step pairs.

    ``forcing`` is None or a callable t -> (f1, f2) of nodal fields.
    """
    if nu <= 0:
        raise ValueError("run_linear needs nu > 0; use run_euler for nu = 0")
    dt = dt or default_dt(alpha)
    w0 = np.asarray(omega_in, dtype=complex)
    removed = (0j, 0j)
    if project:
        w0, removed = compatibility_projection(ws, alpha, w0)
    prop = prop or LinearPropagator(ws, profile, nu, alpha, dt, advect, coupling)
    nsteps = int(math.ceil(t_final / dt - 1e-9))
    run = EvolutionRun(nu, alpha, dt, nsteps * dt, eps_weight, ws.n, projection=removed)
    run.flags["nu_alpha2_gt_1"] = nu * alpha * alpha > 1.0  # outside the small-nu regime
    x = prop.state_from_w(w0)
    g = None
    if forcing is not None:
        g = prop.forcing(*forcing(0.0))
    _integrate(run, prop, x, nsteps, forcing, g, snapshot_every)
    return run


def default_dt(alpha):
    return 0.05 / alpha


def _integrate(run, prop, x, nsteps, forcing, g, snapshot_every):
    ws, a, dt = prop.ws, run.alpha, run.dt
    keys = ("u_L2", "u_Linf", "w_L2", "dw_L2", "sw_L2")
    vals = {k: np.empty(nsteps + 1) for k in keys}
    fnorm = np.zeros(nsteps + 1)
    w, dphi, phi, dw = _fields(prop, x)
    v = _step_values(ws, a, w, dphi, phi, dw)
    for k in keys:
        vals[k][0] = v[k]
    start = v["w_L2"]
    bc = 0.0
    if forcing is not None:
        f1, f2 = forcing(0.0)
        fnorm[0] = ws.quad @ (np.abs(f1) ** 2 + np.abs(f2) ** 2)
    for i in range(1, nsteps + 1):
        t = i * dt
        start_up = i <= STARTUP and run.nu > 0
        if forcing is not None:
            f1, f2 = forcing(t)
            g1 = prop.forcing(f1, f2)
            if start_up:
                x = prop.half_steps(x, prop.forcing(*forcing(t - 0.5 * dt)), g1)
            else:
                x = prop.step(x, g, g1)
            g = g1
            fnorm[i] = ws.quad @ (np.abs(f1) ** 2 + np.abs(f2) ** 2)
        elif start_up:
            x = prop.half_steps(x)
        else:
            x = prop.step(x)
        w, dphi, phi, dw = _fields(prop, x)
        v = _step_values(ws, a, w, dphi, phi, dw)
        for k in keys:
            vals[k][i] = v[k]
        if run.nu > 0:
            scale = math.sqrt(max(ws.quad @ np.abs(phi) ** 2, 1e-300))
            bc = max(bc, abs(dphi[0]) / scale, abs(dphi[-1]) / scale)
        if snapshot_every and i % snapshot_every == 0:
            run.snapshots.append((t, w.copy()))
        if not np.isfinite(v["w_L2"]) or (start > 0 and v["w_L2"] > GROWTH_ABORT ** 2 * start):
            raise EvolutionError(f"norm growth beyond {GROWTH_ABORT:g}x at t={t:.4g} "
                                 f"(dt={dt}, n={ws.n}, nu={run.nu})")
    run.times = dt * np.arange(nsteps + 1)
    run.series = vals
    run.flags["bc_defect"] = bc
    run.final_state = x
    _functionals(run, fnorm)


def _functionals(run, fnorm):
    t = run.times
    a, nu = run.alpha, run.nu
    wt = np.exp(2 * run.eps_weight * math.sqrt(nu) * t)
    s = run.series
    trap = lambda f: float(np.trapezoid(wt * f, t)) if t.size > 1 else 0.0
    run.functionals = {
        "u_LinfL2": a * float(np.max(wt * s["u_L2"])),
        "u_L2L2": a * trap(s["u_L2"]),
        "u_LinfLinf": float(np.max(wt * s["u_Linf"])),
        "w_L2L2": math.sqrt(nu) * math.sqrt(a) * trap(s["w_L2"]),
        "w_LinfL2": math.sqrt(nu) * float(np.max(wt * s["w_L2"])),
        "dw_L2L2": nu ** 1.5 * trap(s["dw_L2"]),
        "sw_LinfL2": float(np.max(wt * s["sw_L2"])),
    }
    run.forcing_norm = trap(fnorm)


def energy_flux(ws, profile, alpha, w, dphi, phi, f1=None, f2=None):
    """Right side of d/dt ||u||^2 + 2 nu ||w||^2 = 2 a Im<U' phi', phi> - 2 Re<g, phi>."""
    q = ws.quad
    flux = 2 * alpha * (q @ (profile.du(ws.nodes) * dphi * np.conj(phi))).imag
    if f1 is not None:
        g_phi = 1j * alpha * (q @ (f1 * np.conj(phi))) - q @ (f2 * np.conj(dphi))
        flux -= 2 * g_phi.real
    return float(flux)


def fit_rate(times, values, window):
    """Decay rate of log(values) (values are squared norms) on the window."""
    t0, t1 = window
    if t1 > times[-1] * (1 + 1e-12) or t0 < 0:
        raise EvolutionError(f"window {window} exceeds the run [0, {times[-1]}]")
    sel = (times >= t0) & (times <= t1)
    tt = times[sel]
    yy = 0.5 * np.log(values[sel])
    A = np.column_stack([tt, np.ones_like(tt)])
    (slope, icpt), *_ = np.linalg.lstsq(A, yy, rcond=None)
    res = yy - A @ np.array([slope, icpt])
    sst = float(np.sum((yy - yy.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / sst if sst > 0 else 1.0
    return RateFit((t0, t1), float(-slope), r2)


def dissipation_window(nu):
    return (nu ** -0.5, 5 * nu ** -0.5)


def measure_enhanced_dissipation(runs):
    """Per-run decay rate of ||w(t)|| on [nu^-1/2, 5 nu^-1/2] and the fitted
    exponent q in rate ~ nu^q (ScalingFit slope is -q).  Non-positive
    rates leave the exponent undefined (NaN)."""
    fits = [fit_rate(r.times, r.series["w_L2"], dissipation_window(r.nu)) for r in runs]
    nus = np.array([r.nu for r in runs])
    rates = np.array([f.rate for f in fits])
    sf = None
    if len(runs) >= 2 and np.all(rates > 0):
        sf = fit_scaling(nus, rates)
    for f in fits:
        f.exponent_vs_nu = sf
    return fits, sf


def verify_spacetime_bound(run, ws, omega_in):
    """Sum of the weighted functionals over ||w_in||^2_{H^4} + nu^-1 (forcing)."""
    w_in = np.asarray(omega_in)
    rhs = spectral.norm(ws, w_in, "Hk", run.alpha, 4) ** 2 + run.forcing_norm / run.nu
    p = dict(nu=run.nu, alpha=run.alpha, t_final=run.t_final, eps=run.eps_weight)
    return EstimateCheck("spacetime.linear", p, run.total(), rhs, n=run.n)


# ---------------------------------------------------------------------------
# inviscid runs
# ---------------------------------------------------------------------------

def spectral_tail(ws, w, frac=0.1):
    """Largest Chebyshev coefficient in the top ``frac`` of the spectrum
    relative to the largest overall."""
    c = np.abs(ws.cheb_coeffs(w))
    k = max(1, int(frac * c.size))
    return float(c[-k:].max() / max(c.max(), 1e-300))


def run_euler(ws, profile, alpha, omega_in, t_final=100.0, dt=None, fit_from=10.0,
              tail_tol=1e-6, monitor_every=20):
    """Inviscid run (phi(+-1) = 0) with decay fits of ||phi'||, ||a phi||
    and |w(t, 0)| on [fit_from, t_end].  The run stops early (flagged)
    once the spectral tail of w exceeds ``tail_tol``."""
    if t_final > 200:
        raise ValueError("t_final must be <= 200")
    dt = dt or 0.02 / alpha
    prop = LinearPropagator(ws, profile, 0.0, alpha, dt)
    nsteps = int(round(t_final / dt))
    x = np.asarray(omega_in, dtype=complex).copy()
    centre = ws.interp_row(0.0)
    q = ws.quad
    t_list, dphi_l, aphi_l, w0_l, wl2 = [], [], [], [], []
    truncated = False
    for i in range(nsteps + 1):
        if i:
            x = prop.step(x)
        if i % monitor_every == 0 or i == nsteps:
            w, dphi, phi, _ = _fields(prop, x)
            t_list.append(i * dt)
            dphi_l.append(math.sqrt(q @ np.abs(dphi) ** 2))
            aphi_l.append(alpha * math.sqrt(q @ np.abs(phi) ** 2))
            w0_l.append(abs(centre @ w))
            wl2.append(math.sqrt(q @ np.abs(w) ** 2))
            if spectral_tail(ws, w) > tail_tol:
                truncated = True
                break
    t = np.array(t_list)
    run = EvolutionRun(0.0, alpha, dt, float(t[-1]), 0.0, ws.n)
    run.times = t
    run.series = dict(dphi=np.array(dphi_l), aphi=np.array(aphi_l), w_centre=np.array(w0_l),
                      w_L2=np.array(wl2))
    run.flags["truncated"] = truncated
    fits = {}
    sel = t >= fit_from
    if np.count_nonzero(sel) >= 3:
        lt = np.log(t[sel])
        for name in ("dphi", "aphi", "w_centre"):
            yv = np.log(run.series[name][sel])
            A = np.column_stack([lt, np.ones_like(lt)])
            (slope, icpt), *_ = np.linalg.lstsq(A, yv, rcond=None)
            res = yv - A @ np.array([slope, icpt])
            sst = float(np.sum((yv - yv.mean()) ** 2))
            fits[name] = RateFit((fit_from, float(t[-1])), float(slope),
                                 1.0 - float(np.sum(res ** 2)) / sst if sst > 0 else 1.0)
    return run, fits


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, run):
    """Snapshots as a flat complex128 array plus a JSON header next to it."""
    path = Path(path)
    data = np.array([w for _, w in run.snapshots], dtype=np.complex128)
    data.tofile(path.with_suffix(".bin"))
    header = dict(n=run.n, alpha=run.alpha, nu=run.nu, dt=run.dt,
                  t=[float(t) for t, _ in run.snapshots], dtype="complex128",
                  shape=list(data.shape))
    path.with_suffix(".json").write_text(json.dumps(header, indent=1, sort_keys=True))


def load_checkpoint(path):
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    data = np.fromfile(path.with_suffix(".bin"), dtype=np.complex128).reshape(header["shape"])
    return header, data
