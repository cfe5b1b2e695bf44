import numpy as np
import pytest

from shearstab import acceptance
from shearstab import nonlinear as nl
from shearstab import spectral


def test_zero_amplitude_is_background(poiseuille):
    ws = spectral.workspace(32)
    K = 2
    r = nl.run_nonlinear(ws, poiseuille, 1e-3, K, np.zeros((2 * K + 1, 32)), 0.0, 1.0)
    assert np.all(r.final.modes == 0) and np.all(r.E == 0)


def test_heat_oracle():
    assert acceptance.heat_oracle() <= 1e-6


def test_kinetic_energy_conserved_without_background(poiseuille):
    ws = spectral.workspace(48)
    K = 3
    W0 = nl.seeded_modes(ws, K, 1)
    drift = []
    for dt in (0.004, 0.002):
        r = nl.run_nonlinear(ws, poiseuille, 0.0, K, W0, 5.0, 100 * 0.002, dt=dt, background=False,
                             sample_every=1, linear_compare=False)
        drift.append(abs(r.kinetic[-1] - r.kinetic[0]) / r.kinetic[0])
        assert r.reality_defect < 1e-12
    assert drift[1] < 1e-6


def test_reality_of_seeded_modes():
    ws = spectral.workspace(32)
    K = 3
    W = nl.seeded_modes(ws, K, 4)
    for a in range(1, K + 1):
        assert np.array_equal(W[K - a], np.conj(W[K + a]))
    assert np.all(W[K] == 0)


def test_small_amplitude_stable(poiseuille):
    ws = spectral.workspace(64)
    K, nu = 4, 1e-4
    r = nl.run_nonlinear(ws, poiseuille, nu, K, nl.seeded_modes(ws, K, 0), 0.1 * nu ** (2 / 3), 20.0)
    assert r.verdict == "stable"
    assert np.isfinite(nl.bootstrap_ratio(r, ws, 0.1 * nu ** (2 / 3)))


def test_input_validation(poiseuille):
    ws = spectral.workspace(32)
    with pytest.raises(nl.NonlinearError):
        nl.run_nonlinear(ws, poiseuille, 1e-3, 17, np.zeros((35, 32)), 0.0, 1.0)
    with pytest.raises(nl.NonlinearError):
        nl.run_nonlinear(ws, poiseuille, 1e-3, 2, np.zeros((3, 32)), 0.0, 1.0)


def test_monotonicity_violations():
    rows = [dict(nu=1e-4, seed=0, A=a, verdict=v)
            for a, v in ((0.1, "stable"), (1, "transitioned"), (10, "stable"), (100, "transitioned"))]
    assert nl.monotonicity_violations(rows) == pytest.approx(0.25)
    assert nl.monotonicity_violations([]) == 0.0
