import numpy as np
import pytest
from scipy import optimize

from shearstab import profiles
from shearstab.profiles import ProfileError, critical_points, make_profile


def test_poiseuille_values(poiseuille):
    assert poiseuille.u(0.5) == pytest.approx(0.25)
    assert np.allclose(poiseuille.d2u(np.linspace(-1, 1, 9)), 2.0)
    assert poiseuille.du(-1.0) == -2.0


def test_quartic_second_derivative(quartic):
    y = np.linspace(-1, 1, 21)
    assert np.allclose(quartic.d2u(y), 2 + 6 * y ** 2)
    assert quartic.d2u(y).min() == pytest.approx(2.0)


@pytest.mark.parametrize("coeffs", [(0, 1, 1), (0, 0, 1, 0.1)])
def test_odd_coefficients_rejected(coeffs):
    with pytest.raises(ProfileError):
        make_profile("custom", coeffs)


def test_non_convex_rejected():
    with pytest.raises(ProfileError):
        make_profile("custom", (0, 0, -1))
    with pytest.raises(ProfileError):
        make_profile("nope")


def test_critical_points(poiseuille, quartic):
    assert critical_points(poiseuille, 0.25) == pytest.approx((-0.5, 0.5), abs=1e-14)
    assert critical_points(poiseuille, 0.0) == (0.0, 0.0)
    # bisection oracle for y^2 + y^4/2 = lam
    for lam, exact in ((0.375, None), (0.28125, 0.5)):
        root = optimize.bisect(lambda y: y * y + 0.5 * y ** 4 - lam, 0, 1, xtol=1e-15)
        y1, y2 = critical_points(quartic, lam)
        assert y2 == pytest.approx(root, abs=1e-12) and y1 == -y2
        if exact is not None:
            assert y2 == pytest.approx(exact, abs=1e-12)
    assert critical_points(quartic, 0.375)[1] == pytest.approx(0.5682214845747, abs=1e-12)
    with pytest.raises(ProfileError):
        critical_points(poiseuille, 1.5)


def test_asymptotics(poiseuille, quartic):
    c = profiles.profile_asymptotics_check(poiseuille, lams=(0.25,), deltas=(0.1,))
    du = next(x for x in c if x.check_id == "asym.du_over_y")
    assert du.lhs == pytest.approx(2.0) and du.rhs == pytest.approx(2.0)
    l1 = next(x for x in c if x.check_id == "weighted.inv_l1")
    assert np.isfinite(l1.lhs) and l1.lhs > 0
    q = profiles.profile_asymptotics_check(quartic, lams=(), deltas=())
    dq = next(x for x in q if x.check_id == "asym.difference_quotient")
    assert 1.0 - 1e-12 <= dq.rhs and dq.lhs <= 4.0 + 1e-12


def test_weighted_l1_quadrature_oracle(poiseuille):
    # off B(+-0.5, 0.1): int |1/(y^2 - 1/4)| by the closed-form antiderivative
    F = lambda y: np.log(abs((y - 0.5) / (y + 0.5)))
    exact = 2 * (abs(F(0.4) - F(0.0)) + abs(F(1.0) - F(0.6)))
    chk = [c for c in profiles.weighted_integral_checks(poiseuille, 0.25, 0.1)
           if c.check_id == "weighted.inv_l1"][0]
    assert chk.lhs == pytest.approx(exact, rel=1e-8)


def test_critical_layer_cutoffs(poiseuille):
    layer = profiles.CriticalLayer.from_profile(poiseuille, 0.25, delta=0.2)
    y = np.linspace(-1, 1, 401)
    rho = layer.rho(y)
    assert np.all(rho[(y > -0.3) & (y < 0.3)] == 1.0)
    assert np.all(rho[(y < -0.4) | (y > 0.4)] == 0.0)
    rc = layer.rho_c(y)
    assert np.all(rc[(y > -0.6) & (y < 0.6)] == 0.0)
    assert np.all(rc[(y < -0.7) | (y > 0.7)] == 1.0)
