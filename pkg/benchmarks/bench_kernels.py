"""Numba vs pure-numpy timings for the hot kernels, plus two end-to-end
workloads run in subprocesses with and without SHEARSTAB_NO_NUMBA.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from shearstab import _kernels as k

WORKLOADS = {
    "correctors nu=1e-5": (
        "from shearstab import boundary_layer as bl, profiles, spectral\n"
        "from shearstab.orr_sommerfeld import OSProblem, NON_SLIP\n"
        "p = profiles.make_profile('poiseuille')\n"
        "for lam in (0.2, 0.5, 0.8):\n"
        "    ws = spectral.workspace(bl.resolving_n(p, 1e-5, 1, lam))\n"
        "    bl.build_correctors(ws, p, OSProblem(1e-5, 1, lam, NON_SLIP))\n"),
    "nonlinear K=8 n=96 t=20": (
        "from shearstab import nonlinear as nl, profiles, spectral\n"
        "p = profiles.make_profile('poiseuille')\n"
        "ws = spectral.workspace(96)\n"
        "nl.run_nonlinear(ws, p, 1e-4, 8, nl.seeded_modes(ws, 8, 0), 1e-3, 20.0)\n"),
}


def best(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_table(repeat):
    if not k.USE_NUMBA:
        print("numba backend disabled; kernel comparison skipped")
        return
    rng = np.random.default_rng(0)
    z = rng.uniform(-12, 12, 4096) + 1j * rng.uniform(-12, 12, 4096)
    x = rng.standard_normal((17, 128)) + 1j * rng.standard_normal((17, 128))
    y = rng.standard_normal((17, 128)) + 1j * rng.standard_normal((17, 128))
    # warm up the JIT so compile time is not counted
    k.cheb_diff(16, 4), k.airy(z[:4]), k.mode_convolution(x, y)
    rows = [
        ("cheb_diff n=384 m=4", lambda: k.cheb_diff(384, 4), lambda: k._cheb_diff_numpy(384, 4)),
        ("airy 4096 complex points", lambda: k.airy(z), lambda: k._airy_numpy(z)),
        ("mode convolution K=8 n=128", lambda: k.mode_convolution(x, y), lambda: k._mode_conv_numpy(x, y)),
    ]
    print(f"{'kernel':32s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fast, slow in rows:
        tf, ts = best(fast, repeat), best(slow, repeat)
        print(f"{name:32s} {1e3 * tf:11.3f} {1e3 * ts:11.3f} {ts / tf:8.2f}")


def workload_table():
    print(f"\n{'workload (fresh process)':32s} {'numba [s]':>11s} {'numpy [s]':>11s}")
    for name, code in WORKLOADS.items():
        out = []
        for flag in ("0", "1"):
            env = dict(os.environ, SHEARSTAB_NO_NUMBA=flag)
            t0 = time.perf_counter()
            subprocess.run([sys.executable, "-c", code], env=env, check=True)
            out.append(time.perf_counter() - t0)
        print(f"{name:32s} {out[0]:11.2f} {out[1]:11.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-workloads", action="store_true")
    args = ap.parse_args()
    print(f"backend: {k.backend()}")
    kernel_table(args.repeat)
    if not args.skip_workloads:
        workload_table()


if __name__ == "__main__":
    main()
