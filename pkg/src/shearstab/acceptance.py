"""Acceptance experiments.

Each ``criterion_k`` runs one desk-scale experiment and returns a dict
with ``id``, ``name``, ``passed`` and a flat ``metrics`` map.  Timings are
kept apart (``elapsed`` key, stripped before the summary is written) so
that summaries stay byte-stable.
"""

from dataclasses import dataclass, replace
import math
import time

import numpy as np

from . import boundary_layer as bl
from . import evolution as ev
from . import nonlinear as nl
from . import orr_sommerfeld as osm
from . import profiles, rayleigh, spectral


@dataclass(frozen=True)
class Settings:
    seed: int = 0
    workers: int = 1
    scan_nus: tuple = (1e-3, 3e-4, 1e-4, 3e-5, 1e-5)
    scan_n: int = 256
    scan_npts: int = 101
    coercive_alphas: tuple = (1, 2, 4)
    coercive_lams: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    coercive_fields: int = 100
    coercive_n: tuple = (128, 256)
    corrector_nus: tuple = (1e-3, 1e-4, 1e-5)
    corrector_lams: tuple = (0.2, 0.5, 0.8)
    linear_nus: tuple = (1e-3, 1e-4, 1e-5)
    linear_alphas: tuple = (1, 2)
    linear_n: int = 192
    euler_n: tuple = (384, 512)
    euler_t: float = 100.0
    nl_nu: float = 1e-4
    nl_K: int = 8
    nl_n: int = 128
    nl_amps: tuple = (0.01, 0.1, 1.0, 10.0, 100.0)
    nl_t: float = None


SMOKE = Settings(scan_nus=(1e-3, 1e-4), scan_n=64, scan_npts=21, coercive_alphas=(1,),
                 coercive_lams=(0.5,), coercive_fields=5, coercive_n=(32, 64),
                 corrector_nus=(1e-3,), corrector_lams=(0.5,), linear_nus=(1e-3, 1e-2),
                 linear_alphas=(1,), linear_n=64, euler_n=(64, 96), euler_t=20.0,
                 nl_K=2, nl_n=48, nl_amps=(0.01, 1.0), nl_t=5.0)


def _result(cid, name, passed, metrics, t0):
    return dict(id=cid, name=name, passed=bool(passed), metrics=metrics,
                elapsed=time.perf_counter() - t0)


def criterion_1(s):
    t0 = time.perf_counter()
    ws = spectral.workspace(64)
    y = ws.nodes
    e1 = np.max(np.abs(spectral.helmholtz_solve(ws, 1, np.ones(64)) - (np.cosh(y) / np.cosh(1.0) - 1)))
    e2 = np.max(np.abs(spectral.helmholtz_solve(ws, 1, np.sin(np.pi * y))
                       + np.sin(np.pi * y) / (np.pi ** 2 + 1)))
    err = float(max(e1, e2))
    return _result(1, "spectral oracle", err <= 1e-10, dict(max_error=err), t0)


def criterion_2(s):
    t0 = time.perf_counter()
    m = {}
    ok = True
    for name in ("poiseuille", "quartic"):
        prof = profiles.make_profile(name)
        sweeps = [rayleigh.coercivity_sweep(prof, s.coercive_alphas, s.coercive_lams,
                                            s.coercive_fields, n, s.seed) for n in s.coercive_n]
        margin = min(r["margin_min"] for r in sweeps[0] + sweeps[1])
        ok &= margin >= -1e-8
        m[f"{name}.margin_min"] = margin
        for key in ("ratio_h1", "ratio_hardy", "ratio_single"):
            lo = max(r[key] for r in sweeps[0])
            hi = max(r[key] for r in sweeps[1])
            change = abs(hi - lo) / abs(lo) if lo else math.inf
            ok &= bool(np.isfinite(lo) and np.isfinite(hi) and change < 0.05)
            m[f"{name}.{key}.max"] = hi
            m[f"{name}.{key}.change"] = change
    return _result(2, "coercivity suite", ok, m, t0)


def resolvent_scaling(s, bc, targets):
    """Scans over the nu sweep; returns (metrics, passed, scans)."""
    prof = profiles.make_profile("poiseuille")
    ws = spectral.workspace(s.scan_n)
    pairs = tuple(targets)
    scans = [osm.scan_lambda(ws, prof, nu, 1, bc, pairs, npts=s.scan_npts, workers=s.workers)
             for nu in s.scan_nus]
    m, ok = {}, True
    for p in pairs:
        fit = osm.fit_scaling(s.scan_nus, [sc.sup_norm[p] for sc in scans])
        m[f"{p}.slope"] = fit.slope
        m[f"{p}.r2"] = fit.r2
        m[f"{p}.bound"] = targets[p] + 0.10
        ok &= fit.slope <= targets[p] + 0.10
        if bc == osm.NON_SLIP:
            ok &= fit.accepted
        for nu, sc in zip(s.scan_nus, scans):
            m[f"{p}.sup@{nu:g}"] = sc.sup_norm[p]
            m[f"{p}.argmax@{nu:g}"] = sc.argmax_lambda[p]
    return m, ok, scans


NON_SLIP_TARGETS = {"L2->L2_w": 5 / 8, "Hm1->L2_w": 3 / 4, "Hm1->L2_u": 1 / 2,
                    "L2->L2_u": 1 / 4, "H1->L2_u": 0.0}
NAVIER_TARGETS = {"L2->L2_w": 1 / 2, "Hm1->L2_w": 3 / 4, "L2->L2_u": 1 / 4, "Hm1->L2_u": 1 / 2}


def criterion_3(s):
    t0 = time.perf_counter()
    m, ok, _ = resolvent_scaling(s, osm.NON_SLIP, NON_SLIP_TARGETS)
    return _result(3, "non-slip resolvent scaling", ok, m, t0)


def criterion_4(s):
    t0 = time.perf_counter()
    m, ok, _ = resolvent_scaling(s, osm.NAVIER_SLIP, NAVIER_TARGETS)
    return _result(4, "Navier-slip resolvent scaling", ok, m, t0)


def criterion_5(s):
    t0 = time.perf_counter()
    prof = profiles.make_profile("poiseuille")
    m, ok = {}, True
    for lam in s.corrector_lams:
        gaps = []
        for nu in s.corrector_nus:
            ws = spectral.workspace(bl.resolving_n(prof, nu, 1, lam))
            prob = osm.OSProblem(nu, 1, lam, osm.NON_SLIP)
            F = (1 - ws.nodes ** 2).astype(complex)
            na, c1, c2, cs, rec = bl.decompose_nonslip(ws, prof, prob, F)
            direct = osm.solve_os(ws, prof, prob, F)
            rel = spectral.norm(ws, rec["w"] - direct.w) / spectral.norm(ws, direct.w)
            key = f"lam={lam:g},nu={nu:g}"
            m[f"{key}.L1"] = cs.L1
            m[f"{key}.gap"] = cs.gap["leading"]
            m[f"{key}.reconstruction"] = rel
            m[f"{key}.n"] = ws.n
            gaps.append(cs.gap["leading"])
            ok &= rel <= 1e-4
        mono = all(b < a for a, b in zip(gaps, gaps[1:]))
        m[f"lam={lam:g}.monotone"] = mono
        ok &= mono
        if 1e-5 in s.corrector_nus:
            ok &= gaps[list(s.corrector_nus).index(1e-5)] <= 0.15
    a0 = bl.airy_a0(0.0, 1)
    ai0 = complex(bl.airy(0.0))
    m["A0(0).error"] = abs(a0 - 1 / 3)
    m["Ai(0).error"] = abs(ai0 - 0.355028053887817)
    ok &= m["A0(0).error"] <= 1e-8 and m["Ai(0).error"] <= 1e-10
    return _result(5, "corrector fidelity", ok, m, t0)


def linear_sweep(s):
    """Forcing-free runs over linear_alphas x linear_nus to 5 nu^(-1/2)."""
    prof = profiles.make_profile("poiseuille")
    ws = spectral.workspace(s.linear_n)
    runs = {}
    for a in s.linear_alphas:
        w0 = ev.seeded_omega(ws, a, s.seed)
        for nu in s.linear_nus:
            runs[(a, nu)] = ev.run_linear(ws, prof, nu, a, w0, t_final=5 * nu ** -0.5)
    return runs


def criterion_6(s, runs=None):
    t0 = time.perf_counter()
    runs = runs or linear_sweep(s)
    m, ok = {}, True
    rates = {}
    for a in s.linear_alphas:
        sel = [runs[(a, nu)] for nu in s.linear_nus]
        fits, sf = ev.measure_enhanced_dissipation(sel)
        for nu, f in zip(s.linear_nus, fits):
            m[f"alpha={a},nu={nu:g}.rate"] = f.rate
            rates[(a, nu)] = f.rate
            ok &= f.rate > 0
        if sf is None:
            m[f"alpha={a}.exponent"] = None
            ok = False
        else:
            m[f"alpha={a}.exponent"] = -sf.slope
            m[f"alpha={a}.r2"] = sf.r2
            ok &= 0.4 <= -sf.slope <= 0.6
    if 1 in s.linear_alphas and 2 in s.linear_alphas:
        order = all(rates[(2, nu)] >= rates[(1, nu)] for nu in s.linear_nus)
        m["rate_alpha2_ge_alpha1"] = order
    return _result(6, "enhanced dissipation", ok, m, t0)


def criterion_7(s, runs=None):
    t0 = time.perf_counter()
    runs = runs or linear_sweep(s)
    # data are H^4-normalized, so the functional is already the ratio
    vals = {k: r.functionals["u_L2L2"] for k, r in runs.items()}
    m = {f"alpha={a},nu={nu:g}.u_L2L2": v for (a, nu), v in sorted(vals.items())}
    v = np.array(list(vals.values()))
    factor = float(v.max() / v.min())
    m["factor"] = factor
    return _result(7, "inviscid damping uniformity", factor < 10, m, t0)


def criterion_8(s):
    t0 = time.perf_counter()
    prof = profiles.make_profile("poiseuille")
    for n in s.euler_n:
        ws = spectral.workspace(n)
        run, fits = ev.run_euler(ws, prof, 1, ev.seeded_omega(ws, 1, s.seed), s.euler_t)
        if not run.flags["truncated"]:
            break
    m = {"n": ws.n, "t_end": run.t_final, "truncated": run.flags["truncated"]}
    for k, f in fits.items():
        m[f"{k}.exponent"] = f.rate
        m[f"{k}.r2"] = f.r2
    wl2 = run.series["w_L2"]
    m["w_L2.max_over_initial"] = float(wl2.max() / wl2[0])
    ok = (not run.flags["truncated"]
          and abs(fits["dphi"].rate + 1) <= 0.2
          and abs(fits["aphi"].rate + 2) <= 0.3
          and fits["w_centre"].rate <= -7 / 8 + 0.25)
    return _result(8, "Euler decay rates", ok, m, t0)


def heat_oracle(n=96, K=4, nu=1e-3, T=5.0, dt=0.01):
    """Zero-mode-only nonlinear run against the exact heat semigroup."""
    prof = profiles.make_profile("poiseuille")
    ws = spectral.workspace(n)
    y = ws.nodes
    r = nl.run_nonlinear(ws, prof, nu, K, np.zeros((2 * K + 1, n)), 0.0, T, dt=dt,
                         u1_0=np.sin(np.pi * y))
    exact = -np.pi * np.cos(np.pi * y) * np.exp(-nu * np.pi ** 2 * T)
    return float(np.max(np.abs(r.final.modes[K] - exact)))


def criterion_9(s):
    t0 = time.perf_counter()
    prof = profiles.make_profile("poiseuille")
    ws = spectral.workspace(s.nl_n)
    rows, a_star, _ = nl.threshold_sweep(ws, prof, [s.nl_nu], s.nl_amps, [s.seed], K=s.nl_K,
                                         t_final=s.nl_t)
    m = {f"A={r['A']:g}.verdict": r["verdict"] for r in rows}
    m.update({f"A={r['A']:g}.final_E": r["final_E"] for r in rows})
    small = [r for r in rows if r["A"] == min(s.nl_amps)]
    viol = nl.monotonicity_violations(rows)
    heat = heat_oracle()
    m.update(violations=viol, heat_error=heat, A_star=a_star[s.nl_nu])
    ok = all(r["verdict"] == "stable" for r in small) and viol < 0.10 and heat <= 1e-6
    return _result(9, "nonlinear threshold", ok, m, t0)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9)


def run_all(s, only=None, log=None):
    """Criteria 1-9 in order (criterion 10 is a property of reruns).
    The linear sweep is shared between criteria 6 and 7."""
    out = []
    runs = None
    for fn in CRITERIA:
        cid = int(fn.__name__.split("_")[1])
        if only and cid not in only:
            continue
        if cid in (6, 7):
            shared = 0.0
            if runs is None:
                t0 = time.perf_counter()
                runs = linear_sweep(s)
                shared = time.perf_counter() - t0
            res = fn(s, runs)
            res["elapsed"] += shared
        else:
            res = fn(s)
        if log:
            log(res)
        out.append(res)
    return out


def with_overrides(base, overrides):
    unknown = set(overrides) - set(Settings.__dataclass_fields__)
    if unknown:
        raise KeyError(f"unknown acceptance settings: {sorted(unknown)}")
    conv = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    return replace(base, **conv)
