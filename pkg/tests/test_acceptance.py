"""Acceptance criteria 1-10.

The full suite runs once through the CLI (``accept``, one worker) and the
criteria are read back from its summary; criterion 10 reruns it with two
workers and compares the summaries byte for byte.  Each test appends one
PASS/FAIL line that is printed in the terminal summary.
"""

import json
from pathlib import Path
import subprocess
import sys

import pytest

ROOT = Path(__file__).resolve().parents[1]
CONFIG = ROOT / "configs" / "accept.toml"
LINES = []

# runtime budgets in seconds (criteria without one are omitted)
BUDGET = {1: 1, 2: 120, 3: 1200, 6: 900, 8: 600, 9: 1800}

pytestmark = pytest.mark.slow


def _accept(out, threads):
    r = subprocess.run([sys.executable, "-m", "shearstab.cli", "accept", "--config", str(CONFIG),
                        "--out", str(out), "--threads", str(threads), "--seed", "0"],
                       capture_output=True, text=True)
    assert r.returncode in (0, 1), r.stderr
    return out


@pytest.fixture(scope="session")
def accept_run(tmp_path_factory):
    out = _accept(tmp_path_factory.mktemp("accept1"), 1)
    summary = json.loads((out / "summary.json").read_text())
    timings = json.loads((out / "timings.json").read_text())
    return out, summary["result"]["criteria"], timings


def _report(cid, ok, detail):
    LINES.append(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _fmt(m, keys):
    return ", ".join(f"{k}={m[k]:.4g}" if isinstance(m[k], float) else f"{k}={m[k]}" for k in keys)


def _check(accept_run, cid, keys):
    _, crit, timings = accept_run
    c = crit[str(cid)]
    t = timings[str(cid)]
    in_budget = t < BUDGET.get(cid, float("inf"))
    ok = c["passed"] and in_budget
    _report(cid, ok, f"{c['name']}; {_fmt(c['metrics'], keys)}; {t:.1f}s")
    assert in_budget, f"runtime {t:.1f}s over budget {BUDGET[cid]}s"
    assert c["passed"], json.dumps(c["metrics"], indent=1, sort_keys=True)


def test_criterion_01_spectral_oracle(accept_run):
    _check(accept_run, 1, ["max_error"])


def test_criterion_02_coercivity(accept_run):
    _check(accept_run, 2, ["poiseuille.margin_min", "quartic.margin_min", "poiseuille.ratio_h1.change",
                           "quartic.ratio_single.change"])


def test_criterion_03_nonslip_scaling(accept_run):
    _check(accept_run, 3, [f"{p}.{s}" for p in ("L2->L2_w", "Hm1->L2_w", "Hm1->L2_u", "L2->L2_u",
                                                  "H1->L2_u") for s in ("slope", "r2")])


def test_criterion_04_navier_slip_scaling(accept_run):
    _check(accept_run, 4, [f"{p}.slope" for p in ("L2->L2_w", "Hm1->L2_w", "L2->L2_u", "Hm1->L2_u")])


def test_criterion_05_correctors(accept_run):
    keys = [f"lam={l},nu=1e-05.gap" for l in ("0.2", "0.5", "0.8")]
    keys += [f"lam={l}.monotone" for l in ("0.2", "0.5", "0.8")]
    _check(accept_run, 5, keys + ["A0(0).error", "Ai(0).error"])


def test_criterion_06_enhanced_dissipation(accept_run):
    _check(accept_run, 6, ["alpha=1.exponent", "alpha=2.exponent", "alpha=1,nu=0.0001.rate",
                           "rate_alpha2_ge_alpha1"])


def test_criterion_07_damping_uniformity(accept_run):
    _check(accept_run, 7, ["factor"])


def test_criterion_08_euler_rates(accept_run):
    _check(accept_run, 8, ["dphi.exponent", "aphi.exponent", "w_centre.exponent", "n", "truncated"])


def test_criterion_09_nonlinear_threshold(accept_run):
    _check(accept_run, 9, ["A=0.01.verdict", "violations", "heat_error", "A_star"])


def test_criterion_10_determinism(accept_run, tmp_path_factory):
    first = (accept_run[0] / "summary.json").read_bytes()
    second = (_accept(tmp_path_factory.mktemp("accept2"), 2) / "summary.json").read_bytes()
    same = first == second
    _report(10, same, f"summary JSON byte-identical across --threads 1/2: {same} ({len(first)} bytes)")
    assert same
