import numpy as np
import pytest

from shearstab import rayleigh, spectral
from shearstab.rayleigh import RayleighError


@pytest.fixture(scope="module")
def ws():
    return spectral.workspace(96)


def test_zero_forcing(ws, poiseuille):
    sol = rayleigh.solve_ray_delta(ws, poiseuille, 1, 0.5, 0.1, np.zeros(ws.n))
    assert np.all(sol.w == 0)
    with pytest.raises(RayleighError):
        rayleigh.solve_ray_delta(ws, poiseuille, 1, 0.5, 0.0, np.ones(ws.n))


def test_far_lambda_neumann_oracle(ws, poiseuille):
    # W = f/s + U'' Hinv (f/s) / s + ...  with s = U - lam + i delta
    y = ws.nodes
    f = np.ones(ws.n, dtype=complex)
    s = poiseuille.u(y) - 10 + 0.1j
    w0 = f / s
    w1 = w0 + poiseuille.d2u(y) * spectral.helmholtz_solve(ws, 1, w0) / s
    sol = rayleigh.solve_ray_delta(ws, poiseuille, 1, 10.0, 0.1, f)
    assert np.max(np.abs(sol.w - w1)) < 1e-3
    assert sol.residual < 1e-12


def test_conjugation_symmetry(ws, poiseuille):
    rng = np.random.default_rng(3)
    f = (1 - ws.nodes ** 2) * (rng.standard_normal(ws.n) + 1j * rng.standard_normal(ws.n))
    a = rayleigh.solve_ray_delta(ws, poiseuille, 2, 0.4, 0.05, f)
    b = rayleigh.solve_ray_delta(ws, poiseuille, 2, 0.4, -0.05, np.conj(f))
    assert np.max(np.abs(b.w - np.conj(a.w))) < 1e-10 * np.max(np.abs(a.w))


@pytest.mark.parametrize("delta,grids", [(0.05, (128, 256)), (0.01, (256, 512))])
def test_ray_bound_ratio_refinement(poiseuille, delta, grids):
    # the absorption layer has width ~delta, so delta = 0.01 needs n >= 256
    vals = []
    for n in grids:
        ws = spectral.workspace(n)
        f = (1 - ws.nodes ** 2) ** 2
        sol = rayleigh.solve_ray_delta(ws, poiseuille, 1, 0.25, delta, f)
        vals.append(rayleigh.check_ray_bounds(ws, poiseuille, sol, f).ratio)
    assert np.isfinite(vals[0]) and abs(vals[1] - vals[0]) / vals[0] < 0.05
    if delta == 0.01:
        assert vals[1] == pytest.approx(4.2302, rel=1e-3)  # regression baseline


def test_zero_field_checks_flagged(ws, poiseuille):
    z = np.zeros(ws.n)
    c1, c2 = rayleigh.check_coercive(ws, poiseuille, 1, 0.5, z)
    assert c1.flagged and c1.ratio == 0.0 and c2.ratio == 0.0
    assert rayleigh.check_hardy_type(ws, poiseuille, 1, 0.5, z).ratio == 0.0
    assert rayleigh.check_single_point(ws, poiseuille, 1, 0.5, 0.1, z).ratio == 0.0


def test_coercive_margin_random_fields(ws, poiseuille):
    rng = np.random.default_rng(11)
    for _ in range(20):
        coef = (rng.standard_normal(12) + 1j * rng.standard_normal(12)) * 0.7 ** np.arange(12)
        w = np.polynomial.chebyshev.chebval(ws.nodes, coef)
        c1, c2 = rayleigh.check_coercive(ws, poiseuille, 2, 0.5, w)
        assert c1.margin >= -1e-8 * max(abs(c1.rhs), 1.0)


def test_hardy_ratio_bounded_towards_degenerate_layer(poiseuille):
    rows = rayleigh.coercivity_sweep(poiseuille, (1,), (1e-3, 1e-2, 0.1, 0.5, 0.9), 20, 128, 0)
    r = [row["ratio_hardy"] for row in rows]
    assert all(np.isfinite(r))
    # no blow-up as y2 - y1 shrinks
    assert r[0] <= 2 * max(r[1:])


def test_single_point_theta_range(ws, poiseuille):
    with pytest.raises(RayleighError):
        rayleigh.check_single_point(ws, poiseuille, 1, 0.25, 0.5, np.ones(ws.n))
