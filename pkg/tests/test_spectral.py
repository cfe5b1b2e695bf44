import math

import numpy as np
import pytest
from numpy.polynomial import chebyshev as C

from shearstab import spectral
from shearstab.profiles import CriticalLayer


@pytest.fixture(scope="module")
def ws64():
    return spectral.workspace(64)


def test_nodes_and_quadrature(ws64):
    y = ws64.nodes
    assert y[0] == 1.0 and y[-1] == -1.0 and np.all(np.diff(y) < 0)
    assert ws64.quad.sum() == pytest.approx(2.0, abs=1e-14)
    # Clenshaw-Curtis is exact for polynomials below the grid degree
    assert ws64.integrate(y ** 20) == pytest.approx(2 / 21, abs=1e-14)


def test_differentiation_exact_on_polynomials(ws64):
    y = ws64.nodes
    p = C.Chebyshev([0.3, -1, 0.5, 0.25, 2.0, 0.1])
    for k, D in enumerate((ws64.d1, ws64.d2, ws64.d3, ws64.d4), start=1):
        exact = p.deriv(k)(y)
        rel = np.max(np.abs(D @ p(y) - exact)) / np.max(np.abs(exact))
        assert rel < 10.0 ** (2 * k - 13)


def test_helmholtz_closed_forms(ws64):
    y = ws64.nodes
    assert np.all(spectral.helmholtz_solve(ws64, 1, np.zeros(64)) == 0)
    psi = spectral.helmholtz_solve(ws64, 1, np.ones(64))
    assert np.max(np.abs(psi - (np.cosh(y) / math.cosh(1) - 1))) < 1e-12
    assert ws64.interp(psi, 0.0) == pytest.approx(1 / math.cosh(1) - 1, abs=1e-13)
    psi = spectral.helmholtz_solve(ws64, 1, np.sin(np.pi * y))
    assert np.max(np.abs(psi + np.sin(np.pi * y) / (np.pi ** 2 + 1))) < 1e-12


def test_clamped_maps_exact_for_clamped_polynomial(ws64):
    y = ws64.nodes
    psi = (1 - y ** 2) ** 2 * (1 + y + 0.5 * y ** 3)
    p = np.polynomial.Polynomial([1, 0, -1]) ** 2 * np.polynomial.Polynomial([1, 1, 0, 0.5])
    d1c, d2c, d4c = ws64.clamped()
    assert np.max(np.abs(d1c @ psi[1:-1] - p.deriv(1)(y))) < 1e-9
    assert np.max(np.abs(d2c @ psi[1:-1] - p.deriv(2)(y))) < 1e-8
    assert np.max(np.abs(d4c @ psi[1:-1] - p.deriv(4)(y[1:-1]))) < 1e-5


def test_norms(ws64):
    y = ws64.nodes
    z = np.zeros(64)
    for kind in ("L2", "Linf", "L1", "grad", "Hk", "Hm1", "sqrt1my2"):
        assert spectral.norm(ws64, z, kind) == 0.0
    assert spectral.norm(ws64, np.ones(64)) == pytest.approx(math.sqrt(2))
    s = np.sin(np.pi * y)
    assert spectral.norm(ws64, s, "grad", 1) == pytest.approx(math.sqrt(np.pi ** 2 + 1), rel=1e-12)
    # H^-1 of sin(pi y) is ||s|| / sqrt(pi^2 + alpha^2) (eigenfunction)
    assert spectral.norm(ws64, s, "Hm1", 1) == pytest.approx(1 / math.sqrt(np.pi ** 2 + 1), rel=1e-8)


def test_interp_row_matches_chebval(ws64):
    f = np.exp(ws64.nodes) * np.cos(3 * ws64.nodes)
    for x in (-0.97, -0.3, 0.0, 0.41, ws64.nodes[5]):
        assert ws64.interp_row(x) @ f == pytest.approx(ws64.interp(f, x), abs=1e-13)


def test_split_stream(ws64, poiseuille):
    layer = CriticalLayer.from_profile(poiseuille, 0.25)
    z1, z2 = spectral.split_stream(ws64, 1, np.zeros(64), layer)
    assert np.all(z1 == 0) and np.all(z2 == 0)
    w = np.ones(64)
    psi1, psi2 = spectral.split_stream(ws64, 1, w, layer)
    psi = spectral.helmholtz_solve(ws64, 1, w)
    y = ws64.nodes
    # psi2 carries the boundary values of psi at the critical points
    p_y2 = ws64.interp(psi, 0.5)
    assert ws64.interp(psi2, 0.5) == pytest.approx(p_y2, abs=1e-10)
    # psi1 + psi2 reproduces psi everywhere
    assert np.max(np.abs(psi1 + psi2 - psi)) < 1e-10
    # psi2 is Helmholtz-harmonic on the middle interval: sinh interpolation
    mid = np.abs(y) < 0.5
    expect = p_y2 * (np.sinh(y + 0.5) + np.sinh(0.5 - y)) / np.sinh(1.0)
    assert np.max(np.abs(psi2[mid] - expect[mid])) < 1e-10
