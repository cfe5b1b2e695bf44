"""Command-line harness: TOML config in, CSV sweeps plus a JSON summary out.

Exit codes: 0 ok, 1 acceptance failure, 2 config error, 3 numerical failure.
"""

import os

# Pin BLAS/OpenMP pools before numpy loads: --threads controls worker
# processes only, so reductions never depend on the thread count.
for _v in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
    os.environ[_v] = "1"

import argparse
import csv
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
import sys
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

log = logging.getLogger("shearstab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NU_MAX = 1.0
SUMMARY_DIGITS = 8

COMMANDS = ("resolvent-scan", "coercivity-check", "corrector-check", "airy-table",
            "evolve-linear", "evolve-euler", "evolve-nonlinear", "threshold-sweep",
            "estimate-sweep", "accept")
PROFILES = ("poiseuille", "quartic", "custom")
BCS = ("navier_slip", "non_slip")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    profile: str = "poiseuille"
    profile_params: list = field(default_factory=list)
    n: list = field(default_factory=lambda: [128])
    nu: list = field(default_factory=lambda: [1e-3])
    alpha: list = field(default_factory=lambda: [1])
    bc: str = "non_slip"
    lambdas: list = None  # explicit lambda values
    lambda_npts: int = 101
    pairs: list = None
    seeds: list = field(default_factory=lambda: [0])
    amplitudes: list = field(default_factory=lambda: [0.01])
    t_final: float = None
    K: int = 8
    nfields: int = 100
    airy_z: list = None
    tolerances: dict = field(default_factory=dict)
    accept: dict = field(default_factory=dict)
    out: str = "out"

    def validate(self):
        if self.kind not in COMMANDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")
        if self.bc not in BCS:
            raise ConfigError(f"unknown bc {self.bc!r}")
        for v in self.nu:
            if not (isinstance(v, (int, float)) and 0 < v <= NU_MAX):
                raise ConfigError(f"nu={v!r} outside (0, {NU_MAX}]")
        for a in self.alpha:
            if not (isinstance(a, int) and a >= 1):
                raise ConfigError(f"alpha={a!r} must be a positive integer")
        for n in self.n:
            if not (isinstance(n, int) and 8 <= n <= 1024):
                raise ConfigError(f"grid size n={n!r} outside [8, 1024]")
        for s in self.seeds:
            if not isinstance(s, int):
                raise ConfigError(f"seed {s!r} must be an integer")
        if self.pairs is not None:
            from .orr_sommerfeld import PAIRS
            bad = [p for p in self.pairs if p not in PAIRS]
            if bad:
                raise ConfigError(f"unknown norm pairs {bad}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        return self


_SECTIONS = {
    "experiment": {"kind", "profile", "profile_params", "seeds", "out"},
    "grid": {"n"},
    "sweep": {"nu", "alpha", "bc", "amplitudes", "t_final", "K", "nfields", "pairs"},
    "lambda": {"values", "npts"},
    "airy": {"z"},
    "tolerances": None,
    "accept": None,
}


def load_config(path, kind, seed=None):
    raw = {}
    if path:
        try:
            raw = tomllib.loads(Path(path).read_text())
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    kw = {}
    for sec, keys in _SECTIONS.items():
        body = raw.get(sec, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{sec}] must be a table")
        if keys is None:
            kw[sec] = dict(body)
            continue
        bad = set(body) - keys
        if bad:
            raise ConfigError(f"unknown keys in [{sec}]: {sorted(bad)}")
        for k, v in body.items():
            if sec == "lambda":
                kw["lambdas" if k == "values" else "lambda_npts"] = v
            elif sec == "airy":
                kw["airy_z"] = v
            else:
                kw[k] = v
    cfg_kind = kw.pop("kind", None)
    if cfg_kind is not None and cfg_kind != kind:
        raise ConfigError(f"config is for {cfg_kind!r}, not {kind!r}")
    for k in ("n", "nu", "alpha", "seeds", "amplitudes"):
        if k in kw and not isinstance(kw[k], list):
            kw[k] = [kw[k]]
    if seed is not None:
        kw["seeds"] = [seed]
    try:
        cfg = ExperimentConfig(kind=kind, **kw)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    return cfg.validate()


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _clean(x):
    """Round floats to SUMMARY_DIGITS significant digits for stable JSON."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{SUMMARY_DIGITS}g}")
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def write_json(path, obj):
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return v


def write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _profile(cfg):
    from . import profiles
    return profiles.make_profile(cfg.profile, cfg.profile_params)


def cmd_resolvent_scan(cfg, out, threads):
    from . import orr_sommerfeld as osm, spectral
    prof = _profile(cfg)
    pairs = tuple(cfg.pairs or osm.EXPONENTS[cfg.bc])
    rows, sups = [], []
    for n in cfg.n:
        ws = spectral.workspace(n)
        for alpha in cfg.alpha:
            for nu in cfg.nu:
                if cfg.lambdas is not None:
                    lams = [float(x) for x in cfg.lambdas]
                    ev = osm._Evaluator(n, prof, nu, alpha, cfg.bc, pairs)
                    vals = np.array(osm._map(ev, lams, threads)).reshape(len(lams), len(pairs))
                    scan = osm.ResolventScan(nu, alpha, cfg.bc, pairs, np.array(lams), vals)
                    for j, p in enumerate(pairs):
                        i = int(np.argmax(vals[:, j])) if lams else None
                        scan.sup_norm[p] = float(vals[i, j]) if lams else float("nan")
                        scan.argmax_lambda[p] = lams[i] if lams else float("nan")
                else:
                    scan = osm.scan_lambda(ws, prof, nu, alpha, cfg.bc, pairs, npts=cfg.lambda_npts,
                                           workers=threads)
                for r in scan.rows():
                    rows.append(dict(profile=prof.name, n=n, **r))
                for p in pairs:
                    sups.append(dict(profile=prof.name, n=n, nu=nu, alpha=alpha, bc=cfg.bc, pair=p,
                                     sup_norm=scan.sup_norm[p], argmax_lambda=scan.argmax_lambda[p]))
    write_csv(out / "resolvent_scan.csv", rows, ["profile", "n", "nu", "alpha", "bc", "lam", "pair", "norm"])
    write_csv(out / "resolvent_sup.csv", sups,
              ["profile", "n", "nu", "alpha", "bc", "pair", "sup_norm", "argmax_lambda"])
    fits = {}
    for n in cfg.n:
        for alpha in cfg.alpha:
            for p in pairs:
                sel = [s for s in sups if s["n"] == n and s["alpha"] == alpha and s["pair"] == p]
                if len(sel) >= 2:
                    f = osm.fit_scaling([s["nu"] for s in sel], [s["sup_norm"] for s in sel])
                    fits[f"n={n},alpha={alpha},{p}"] = dict(
                        slope=f.slope, r2=f.r2, exponent=osm.EXPONENTS[cfg.bc].get(p))
    return dict(sup=sups, fits=fits), True


def cmd_coercivity_check(cfg, out, threads):
    from . import profiles, rayleigh
    names = [cfg.profile] if cfg.profile != "custom" else ["custom"]
    if cfg.tolerances.get("both_profiles", False):
        names = ["poiseuille", "quartic"]
    lams = cfg.lambdas if cfg.lambdas is not None else [0.1 * k for k in range(1, 10)]
    rows = []
    for name in names:
        prof = profiles.make_profile(name, cfg.profile_params if name == cfg.profile else ())
        for n in cfg.n:
            for seed in cfg.seeds:
                for r in rayleigh.coercivity_sweep(prof, cfg.alpha, lams, cfg.nfields, n, seed):
                    rows.append(dict(seed=seed, **r))
    cols = ["profile", "n", "seed", "alpha", "lam", "margin_min", "ratio_h1", "ratio_hardy", "ratio_single"]
    write_csv(out / "coercivity.csv", rows, cols)
    tol = cfg.tolerances.get("margin", -1e-8)
    ok = all(r["margin_min"] >= tol for r in rows)
    worst = min((r["margin_min"] for r in rows), default=None)
    return dict(rows=len(rows), margin_min=worst, margin_ok=ok), True


def cmd_corrector_check(cfg, out, threads):
    from . import boundary_layer as bl, orr_sommerfeld as osm, spectral
    prof = _profile(cfg)
    lams = cfg.lambdas if cfg.lambdas is not None else [0.2, 0.5, 0.8]
    rows = []
    for nu in cfg.nu:
        for alpha in cfg.alpha:
            for lam in lams:
                ns = cfg.n if cfg.tolerances.get("fixed_n") else [bl.resolving_n(prof, nu, alpha, lam)]
                for n in ns:
                    ws = spectral.workspace(n)
                    prob = osm.OSProblem(nu, alpha, lam, osm.NON_SLIP)
                    F = (1 - ws.nodes ** 2).astype(complex)
                    na, c1, c2, cs, rec = bl.decompose_nonslip(ws, prof, prob, F)
                    direct = osm.solve_os(ws, prof, prob, F)
                    rel = spectral.norm(ws, rec["w"] - direct.w) / spectral.norm(ws, direct.w)
                    r = dict(profile=prof.name, n=n, nu=nu, alpha=alpha, lam=lam, L1=cs.L1, L2=cs.L2,
                             gap_leading=cs.gap["leading"], gap_airy=cs.gap["airy"],
                             reconstruction=rel, bc_defect=rec["bc_defect"], c1=abs(c1), c2=abs(c2))
                    r.update({f"ratio_{k}": v for k, v in sorted(cs.ratios.items())})
                    rows.append(r)
    cols = list(rows[0]) if rows else ["profile", "n", "nu", "alpha", "lam", "L1", "L2", "gap_leading",
                                       "gap_airy", "reconstruction", "bc_defect", "c1", "c2"]
    write_csv(out / "correctors.csv", rows, cols)
    return dict(rows=rows), True


def cmd_airy_table(cfg, out, threads):
    from . import boundary_layer as bl
    zs = cfg.airy_z if cfg.airy_z is not None else [[x, 0.0] for x in (-4, -2, -1, 0, 1, 2, 4)]
    rows = []
    for z, ai, aip, a0 in bl.airy_table([complex(*p) if isinstance(p, list) else complex(p) for p in zs]):
        rows.append(dict(z_re=z.real, z_im=z.imag, ai_re=ai.real, ai_im=ai.imag, dai_re=aip.real,
                         dai_im=aip.imag, a0_re=a0.real, a0_im=a0.imag))
    write_csv(out / "airy.csv", rows, ["z_re", "z_im", "ai_re", "ai_im", "dai_re", "dai_im", "a0_re", "a0_im"])
    return dict(rows=len(rows)), True


def _series_csv(path, run, stride, params):
    keys = sorted(run.series)
    idx = range(0, len(run.times), max(1, stride))
    rows = []
    for i in idx:
        r = dict(params, t=float(run.times[i]))
        r.update({k: float(run.series[k][i]) for k in keys})
        rows.append(r)
    write_csv(path, rows, list(params) + ["t"] + keys)


def cmd_evolve_linear(cfg, out, threads):
    from . import evolution as ev, spectral
    prof = _profile(cfg)
    runs, summary = [], []
    for n in cfg.n:
        ws = spectral.workspace(n)
        for alpha in cfg.alpha:
            for seed in cfg.seeds:
                w0 = ev.seeded_omega(ws, alpha, seed)
                for nu in cfg.nu:
                    tf = cfg.t_final or 5 * nu ** -0.5
                    run = ev.run_linear(ws, prof, nu, alpha, w0, t_final=tf)
                    runs.append(run)
                    p = dict(profile=prof.name, n=n, nu=nu, alpha=alpha, seed=seed)
                    tag = f"linear_n{n}_a{alpha}_nu{nu:g}_s{seed}"
                    _series_csv(out / f"{tag}.csv", run, max(1, len(run.times) // 2000), p)
                    win = ev.dissipation_window(nu)
                    rate = ev.fit_rate(run.times, run.series["w_L2"], win) if win[1] <= run.t_final else None
                    # largest weight exponent eps with e^{eps sqrt(nu) t} |w| still decaying
                    eps_max = rate.rate / math.sqrt(nu) if rate and rate.rate > 0 else None
                    summary.append(dict(p, functionals=run.functionals, total=run.total(),
                                        rate=rate.rate if rate else None, eps_max=eps_max,
                                        flags=run.flags))
    return dict(runs=summary), True


def cmd_evolve_euler(cfg, out, threads):
    from . import evolution as ev, spectral
    prof = _profile(cfg)
    tf = cfg.t_final or 100.0
    summary = []
    for n in cfg.n:
        ws = spectral.workspace(n)
        for alpha in cfg.alpha:
            for seed in cfg.seeds:
                run, fits = ev.run_euler(ws, prof, alpha, ev.seeded_omega(ws, alpha, seed), tf)
                p = dict(profile=prof.name, n=n, alpha=alpha, seed=seed)
                _series_csv(out / f"euler_n{n}_a{alpha}_s{seed}.csv", run, 1, p)
                summary.append(dict(p, t_end=run.t_final, truncated=run.flags["truncated"],
                                    fits={k: dict(exponent=f.rate, r2=f.r2) for k, f in fits.items()}))
    return dict(runs=summary), True


def cmd_evolve_nonlinear(cfg, out, threads):
    from . import nonlinear as nl, spectral
    prof = _profile(cfg)
    rows = []
    for n in cfg.n:
        ws = spectral.workspace(n)
        for nu in cfg.nu:
            tf = cfg.t_final or nu ** -0.5
            for amp in cfg.amplitudes:
                for seed in cfg.seeds:
                    r = nl.run_nonlinear(ws, prof, nu, cfg.K, nl.seeded_modes(ws, cfg.K, seed), amp, tf)
                    rows.append(dict(profile=prof.name, n=n, K=cfg.K, nu=nu, amplitude=amp, seed=seed,
                                     verdict=r.verdict, final_E=r.E_total, max_E=max(r.E_total, float(r.E0.sum())),
                                     reality_defect=r.reality_defect))
    write_csv(out / "nonlinear.csv", rows, ["profile", "n", "K", "nu", "amplitude", "seed", "verdict",
                                           "final_E", "max_E", "reality_defect"])
    return dict(rows=rows), True


def cmd_threshold_sweep(cfg, out, threads):
    from . import nonlinear as nl, spectral
    prof = _profile(cfg)
    rows, stars = [], {}
    fit = None
    for n in cfg.n:
        ws = spectral.workspace(n)
        r, a_star, fit = nl.threshold_sweep(ws, prof, cfg.nu, cfg.amplitudes, cfg.seeds, K=cfg.K,
                                            t_final=cfg.t_final)
        rows += [dict(profile=prof.name, n=n, K=cfg.K, **x) for x in r]
        stars.update({f"n={n},nu={k:g}": v for k, v in a_star.items()})
    write_csv(out / "threshold.csv", rows, ["profile", "n", "K", "nu", "A", "amplitude", "seed", "verdict",
                                           "final_E", "max_E"])
    return dict(a_star=stars, violations=nl.monotonicity_violations(rows),
                fit=None if fit is None else dict(slope=fit.slope, r2=fit.r2)), True


def cmd_estimate_sweep(cfg, out, threads):
    from . import boundary_layer as bl, orr_sommerfeld as osm, rayleigh, spectral
    prof = _profile(cfg)
    lams = cfg.lambdas if cfg.lambdas is not None else [0.2, 0.5, 0.8]
    checks = []
    for n in cfg.n:
        ws = spectral.workspace(n)
        y = ws.nodes
        for seed in cfg.seeds:
            rng = np.random.default_rng(seed)
            coef = (rng.standard_normal(9) + 1j * rng.standard_normal(9)) * 0.6 ** np.arange(9)
            F = (1 - y ** 2) * np.polynomial.chebyshev.chebval(y, coef)
            for alpha in cfg.alpha:
                for nu in cfg.nu:
                    for lam in lams:
                        prob = osm.OSProblem(nu, alpha, lam, osm.NAVIER_SLIP)
                        checks += osm.check_energy_estimates(ws, prof, prob, F)
                        checks.append(osm.check_weak_type(ws, prof, prob, F))
                        checks += bl.check_c_bounds(ws, prof, prob.replace(bc=osm.NON_SLIP), F)
                    for lam in lams:
                        sol = rayleigh.solve_ray_delta(ws, prof, alpha, lam, 0.05, F)
                        checks.append(rayleigh.check_ray_bounds(ws, prof, sol, F))
    rows = [c.row() for c in checks]
    cols = sorted({k for r in rows for k in r})
    write_csv(out / "estimates.csv", rows, cols)
    worst = {}
    for c in checks:
        worst[c.check_id] = max(worst.get(c.check_id, 0.0), c.ratio)
    return dict(max_ratio=worst, count=len(checks)), True


def cmd_accept(cfg, out, threads):
    from . import acceptance as acc
    base = acc.SMOKE if cfg.accept.get("preset") == "smoke" else acc.Settings()
    over = {k: v for k, v in cfg.accept.items() if k not in ("preset", "only")}
    try:
        s = acc.with_overrides(base, over)
    except (KeyError, TypeError) as e:
        raise ConfigError(str(e)) from e
    from dataclasses import replace
    s = replace(s, seed=cfg.seeds[0], workers=threads)
    only = cfg.accept.get("only")

    def report(r):
        log.info("criterion %d (%s): %s [%.1fs]", r["id"], r["name"], "PASS" if r["passed"] else "FAIL",
                 r["elapsed"])

    results = acc.run_all(s, only=only, log=report)
    timings = {str(r["id"]): r.pop("elapsed") for r in results}
    write_json(out / "timings.json", timings)
    rows = [dict(id=r["id"], name=r["name"], passed=r["passed"]) for r in results]
    write_csv(out / "criteria.csv", rows, ["id", "name", "passed"])
    summary = {str(r["id"]): r for r in results}
    return dict(criteria=summary, all_passed=all(r["passed"] for r in results)), \
        all(r["passed"] for r in results)


HANDLERS = {
    "resolvent-scan": cmd_resolvent_scan,
    "coercivity-check": cmd_coercivity_check,
    "corrector-check": cmd_corrector_check,
    "airy-table": cmd_airy_table,
    "evolve-linear": cmd_evolve_linear,
    "evolve-euler": cmd_evolve_euler,
    "evolve-nonlinear": cmd_evolve_nonlinear,
    "threshold-sweep": cmd_threshold_sweep,
    "estimate-sweep": cmd_estimate_sweep,
    "accept": cmd_accept,
}


def _numeric_errors():
    from . import boundary_layer, evolution, nonlinear, orr_sommerfeld, rayleigh, spectral
    return (orr_sommerfeld.OSSingularError, boundary_layer.BoundaryLayerError, evolution.EvolutionError,
            nonlinear.NonlinearError, spectral.SpectralError, rayleigh.RayleighError,
            np.linalg.LinAlgError, FloatingPointError, ArithmeticError)


def run_experiment(cfg, out, threads=1):
    """Run one experiment; returns the exit code.  Artifacts go to ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        summary, ok = HANDLERS[cfg.kind](cfg, out, threads)
    except _numeric_errors() as e:
        log.error("numerical failure: %s: %s", type(e).__name__, e)
        write_json(out / "summary.json", dict(kind=cfg.kind, status="numerical_failure",
                                               error=f"{type(e).__name__}: {e}"))
        return EXIT_NUMERIC
    summary = dict(kind=cfg.kind, status="ok" if ok else "fail", seeds=cfg.seeds, result=summary)
    write_json(out / "summary.json", summary)
    if cfg.kind != "accept":
        write_json(out / "timings.json", {"total": time.perf_counter() - t0})
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    ap = argparse.ArgumentParser(prog="shearstab", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML experiment file")
    ap.add_argument("--out", help="output directory (SHEARSTAB_OUT takes precedence)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for parallel scans")
    ap.add_argument("--seed", type=int, help="override the seed list with a single seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command, args.seed)
        _profile(cfg)
    except ValueError as e:  # ConfigError and profile validation
        log.error("config error: %s", e)
        return EXIT_CONFIG
    out = os.environ.get("SHEARSTAB_OUT") or args.out or cfg.out
    try:
        return run_experiment(cfg, out, args.threads)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
