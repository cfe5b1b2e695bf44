"""Property-based invariants across modules."""

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shearstab import _kernels, rayleigh, spectral
from shearstab import orr_sommerfeld as osm
from shearstab.checks import EstimateCheck
from shearstab.orr_sommerfeld import NAVIER_SLIP, NON_SLIP, OSProblem
from shearstab.profiles import make_profile

WS = spectral.workspace(48)
POIS = make_profile("poiseuille")
finite = st.floats(-1.0, 1.0, allow_nan=False, allow_infinity=False)
coeffs = arrays(np.float64, 8, elements=finite)


def _field(re, im):
    return np.polynomial.chebyshev.chebval(WS.nodes, re + 1j * im)


@given(coeffs, coeffs, st.integers(1, 4))
def test_helmholtz_residual(re, im, alpha):
    w = _field(re, im)
    psi = spectral.helmholtz_solve(WS, alpha, w)
    r = (WS.d2 @ psi - alpha ** 2 * psi - w)[1:-1]
    assert np.max(np.abs(r)) <= 1e-9 * (1 + np.max(np.abs(w)))
    assert psi[0] == 0 and psi[-1] == 0


@given(coeffs, coeffs, st.floats(-3, 3))
def test_norm_homogeneity_and_triangle(a, b, c):
    f, g = _field(a, b), _field(b, a)
    for kind in ("L2", "Hm1", "grad"):
        nf, ng = spectral.norm(WS, f, kind), spectral.norm(WS, g, kind)
        assert spectral.norm(WS, c * f, kind) <= abs(c) * nf * (1 + 1e-10) + 1e-14
        assert spectral.norm(WS, f + g, kind) <= (nf + ng) * (1 + 1e-10) + 1e-14


@given(coeffs, coeffs, st.floats(-0.5, 1.5), st.sampled_from([NAVIER_SLIP, NON_SLIP]))
def test_os_linearity_and_reflection(re, im, lam, bc):
    prob = OSProblem(1e-2, 1, lam, bc)
    op = osm.OSOperator(WS, POIS, prob)
    F, G = _field(re, im), _field(im, re)
    a, b, ab = op.solve(F).w, op.solve(G).w, op.solve(F + 2j * G).w
    scale = 1 + np.max(np.abs(a)) + np.max(np.abs(b))
    assert np.max(np.abs(ab - a - 2j * b)) <= 1e-9 * scale
    # even profile: F(-y) -> w(-y)
    assert np.max(np.abs(op.solve(F[::-1]).w - a[::-1])) <= 1e-8 * scale


@given(coeffs, coeffs, st.sampled_from([1, 2, 4]), st.floats(0.05, 0.95))
def test_coercive_margin_nonnegative(re, im, alpha, lam):
    w = _field(re, im)
    c1, _ = rayleigh.check_coercive(WS, POIS, alpha, lam, w, m=64)
    assert c1.margin >= -1e-8 * max(abs(c1.rhs), abs(c1.lhs), 1e-300)


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_fit_scaling_recovers_power_law(p, c):
    nus = np.array([1e-3, 3e-4, 1e-4, 3e-5])
    f = osm.fit_scaling(nus, c * nus ** (-p))
    assert abs(f.slope - p) < 1e-9 and f.r2 > 1 - 1e-9


@given(st.floats(0, 1e6), st.floats(0, 1e6))
def test_estimate_check_ratio(lhs, rhs):
    c = EstimateCheck("x", {}, lhs, rhs)
    if rhs > 0:
        assert not c.flagged and c.ratio == lhs / rhs
    else:
        assert c.flagged and c.ratio == (0.0 if lhs == 0 else np.inf)


@given(arrays(np.float64, (4, 3), elements=finite), arrays(np.float64, (4, 3), elements=finite))
def test_convolution_preserves_reality(a, b):
    K = 2

    def stack(r):
        x = np.zeros((2 * K + 1, 3), dtype=complex)
        x[K] = r[0]
        for m in (1, 2):
            x[K + m] = r[m] + 1j * r[3] * m
            x[K - m] = np.conj(x[K + m])
        return x

    c = _kernels.mode_convolution(stack(a), stack(b))
    for m in range(1, K + 1):
        assert np.allclose(c[K - m], np.conj(c[K + m]), atol=1e-12)
    assert np.allclose(c[K].imag, 0, atol=1e-12)
