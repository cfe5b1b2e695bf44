import csv
import json
from pathlib import Path
import subprocess
import sys
import time

import pytest

from shearstab import cli

ROOT = Path(__file__).resolve().parents[1]
SMOKE = ROOT / "configs" / "smoke.toml"


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _run(*args, env=None):
    return subprocess.run([sys.executable, "-m", "shearstab.cli", *args], capture_output=True, text=True,
                          env=env)


def test_smoke_config_fast(tmp_path):
    t0 = time.perf_counter()
    r = _run("resolvent-scan", "--config", str(SMOKE), "--out", str(tmp_path / "o"))
    assert r.returncode == 0, r.stderr
    assert time.perf_counter() - t0 < 10
    rows = list(csv.DictReader(open(tmp_path / "o" / "resolvent_scan.csv")))
    assert rows and set(rows[0]) == {"profile", "n", "nu", "alpha", "bc", "lam", "pair", "norm"}
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["status"] == "ok"
    assert "elapsed" not in json.dumps(summary) and (tmp_path / "o" / "timings.json").exists()


@pytest.mark.parametrize("text", [
    "[sweep]\nnu = [0.0]\n",
    "[sweep]\nnu = [2.0]\n",
    "[sweep]\nalpha = [0]\n",
    "[sweep]\nbc = 'periodic'\n",
    "[sweep]\nunknown = 1\n",
    "[bogus]\n",
    "[experiment]\nprofile = 'cubic'\n",
    "[experiment]\nkind = 'airy-table'\n",
    "[experiment]\nseeds = [0.5]\n",
    "not toml [",
])
def test_config_errors_exit_2(tmp_path, text):
    assert cli.main(["resolvent-scan", "--config", _write(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_bad_profile_coefficients_exit_2(tmp_path):
    cfg = _write(tmp_path, "[experiment]\nprofile = 'custom'\nprofile_params = [0, 1, 1]\n")
    assert cli.main(["airy-table", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_empty_sweep_writes_empty_csv(tmp_path):
    cfg = _write(tmp_path, "[sweep]\nnu = []\n[lambda]\nvalues = []\n")
    assert cli.main(["resolvent-scan", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    lines = (tmp_path / "o" / "resolvent_scan.csv").read_text().splitlines()
    assert lines == ["profile,n,nu,alpha,bc,lam,pair,norm"]
    cfg = _write(tmp_path, "[sweep]\nnu = []\namplitudes = []\n", "n.toml")
    assert cli.main(["evolve-nonlinear", "--config", cfg, "--out", str(tmp_path / "n")]) == 0
    assert len((tmp_path / "n" / "nonlinear.csv").read_text().splitlines()) == 1


def test_numerical_failure_exit_3(tmp_path):
    # nu = 0.5 gives boundary layers far too thick for the corrector algebra
    cfg = _write(tmp_path, "[sweep]\nnu = [0.5]\n[lambda]\nvalues = [0.5]\n[grid]\nn = [64]\n"
                           "[tolerances]\nfixed_n = true\n")
    assert cli.main(["corrector-check", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["status"] == "numerical_failure" and "BoundaryLayerError" in s["error"]


def test_env_var_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("SHEARSTAB_OUT", str(tmp_path / "env"))
    assert cli.main(["airy-table", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "airy.csv").exists() and not (tmp_path / "flag").exists()


def test_summary_independent_of_threads(tmp_path):
    cfg = _write(tmp_path, "[grid]\nn = [48]\n[sweep]\nnu = [1e-3, 1e-4]\nbc = 'navier_slip'\n"
                           "pairs = ['L2->L2_w']\n[lambda]\nnpts = 15\n")
    outs = []
    for th in ("1", "2"):
        o = tmp_path / f"t{th}"
        r = _run("resolvent-scan", "--config", cfg, "--out", str(o), "--threads", th, "--seed", "3")
        assert r.returncode == 0, r.stderr
        outs.append(((o / "summary.json").read_bytes(), (o / "resolvent_scan.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_accept_smoke_reports_failures(tmp_path):
    cfg = ROOT / "configs" / "accept_smoke.toml"
    code = cli.main(["accept", "--config", str(cfg), "--out", str(tmp_path / "a")])
    s = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert set(s["result"]["criteria"]) == {str(i) for i in range(1, 10)}
    assert code == (0 if s["result"]["all_passed"] else 1)


@pytest.mark.parametrize("cmd,files", [
    ("coercivity-check", ["coercivity.csv"]),
    ("evolve-linear", ["linear_n32_a1_nu0.01_s0.csv"]),
    ("evolve-euler", ["euler_n32_a1_s0.csv"]),
    ("evolve-nonlinear", ["nonlinear.csv"]),
    ("threshold-sweep", ["threshold.csv"]),
    ("estimate-sweep", ["estimates.csv"]),
])
def test_subcommands_produce_artifacts(tmp_path, cmd, files):
    cfg = _write(tmp_path, "[grid]\nn = [32]\n[sweep]\nnu = [1e-2]\nalpha = [1]\nK = 2\nnfields = 3\n"
                           "amplitudes = [1e-3]\nt_final = 2.0\n[lambda]\nvalues = [0.5]\n")
    assert cli.main([cmd, "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    for f in files:
        assert (tmp_path / "o" / f).exists()
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["kind"] == cmd
