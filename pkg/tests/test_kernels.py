import os
import subprocess
import sys

import numpy as np
import pytest

from shearstab import _kernels as k


def test_cheb_diff_backends_agree():
    for n in (8, 33, 128):
        a = k.cheb_diff(n, 4)
        b = k._cheb_diff_numpy(n, 4)
        for m in range(4):
            assert np.allclose(a[m], b[m], rtol=1e-12, atol=1e-12 * np.abs(b[m]).max())


def test_airy_backends_agree():
    rng = np.random.default_rng(5)
    z = rng.uniform(-15, 15, 300) + 1j * rng.uniform(-15, 15, 300)
    a, ap = k.airy(z)
    b, bp = k._airy_numpy(z.astype(np.complex128))
    sc = np.maximum(1.0, np.abs(b))
    assert np.max(np.abs(a - b) / sc) < 1e-12
    assert np.max(np.abs(ap - bp) / np.maximum(1.0, np.abs(bp))) < 1e-12


def test_mode_convolution_oracle():
    # direct product of the truncated Fourier series, modes |a| <= K kept
    rng = np.random.default_rng(2)
    K, n = 3, 5
    x = rng.standard_normal((2 * K + 1, n)) + 1j * rng.standard_normal((2 * K + 1, n))
    y = rng.standard_normal((2 * K + 1, n)) + 1j * rng.standard_normal((2 * K + 1, n))
    ref = np.zeros_like(x)
    for a in range(-K, K + 1):
        for b in range(-K, K + 1):
            if abs(a - b) <= K:
                ref[a + K] += x[b + K] * y[a - b + K]
    assert np.allclose(k.mode_convolution(x, y), ref, atol=1e-13)
    assert np.allclose(k._mode_conv_numpy(x, y), ref, atol=1e-13)


def test_env_flag_selects_numpy():
    env = dict(os.environ, SHEARSTAB_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", "from shearstab import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


@pytest.mark.skipif(k.numba is None, reason="numba not installed")
def test_default_backend_is_numba():
    if os.environ.get("SHEARSTAB_NO_NUMBA", "0") in ("", "0"):
        assert k.backend() == "numba"
