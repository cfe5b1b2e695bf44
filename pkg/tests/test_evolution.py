import math

import numpy as np
import pytest

from shearstab import evolution as ev
from shearstab import spectral


@pytest.fixture(scope="module")
def ws():
    return spectral.workspace(64)


def test_zero_data(ws, poiseuille):
    run = ev.run_linear(ws, poiseuille, 1e-3, 1, np.zeros(ws.n), t_final=5.0)
    assert all(v == 0 for v in run.functionals.values())


def test_seeded_data_normalized_and_compatible(ws):
    w = ev.seeded_omega(ws, 2, 7)
    assert spectral.norm(ws, w, "Hk", 2, 4) == pytest.approx(1.0)
    _, removed = ev.compatibility_projection(ws, 2, w)
    assert abs(removed[0]) < 1e-12 and abs(removed[1]) < 1e-12
    assert np.array_equal(w, ev.seeded_omega(ws, 2, 7))


def test_pure_diffusion_bound(ws, poiseuille):
    nu, a = 1e-2, 2
    w0 = ev.seeded_omega(ws, a, 1)
    run = ev.run_linear(ws, poiseuille, nu, a, w0, t_final=20.0, advect=False, coupling=False)
    w = np.sqrt(run.series["w_L2"])
    bound = w[0] * np.exp(-nu * a * a * run.times)
    assert np.all(w <= bound * (1 + 1e-8))


def test_energy_identity(ws, poiseuille):
    nu, a, dt = 1e-2, 1, 1e-3
    prop = ev.LinearPropagator(ws, poiseuille, nu, a, dt)
    x = prop.state_from_w(ev.seeded_omega(ws, a, 2))
    for _ in range(4):
        x = prop.half_steps(x)
    q = ws.quad

    def parts(x):
        w, dphi, phi, _ = ev._fields(prop, x)
        e = q @ (np.abs(dphi) ** 2 + a * a * np.abs(phi) ** 2)
        rhs = ev.energy_flux(ws, poiseuille, a, w, dphi, phi) - 2 * nu * (q @ np.abs(w) ** 2)
        return e, rhs

    e0, r0 = parts(x)
    x1 = prop.step(x)
    e1, r1 = parts(x1)
    resid = (e1 - e0) / dt - 0.5 * (r0 + r1)
    assert abs(resid) < 1e-4 * abs(r0)


def test_rates_positive_and_ordered(poiseuille):
    ws = spectral.workspace(96)
    rates = {}
    for a in (1, 2):
        run = ev.run_linear(ws, poiseuille, 1e-3, a, ev.seeded_omega(ws, a, 0), t_final=5 / math.sqrt(1e-3))
        rates[a] = ev.fit_rate(run.times, run.series["w_L2"], ev.dissipation_window(1e-3)).rate
    assert rates[1] > 0 and rates[2] >= rates[1]


def test_fit_rate_window_checks():
    t = np.linspace(0, 10, 101)
    f = ev.fit_rate(t, np.exp(-2 * 0.3 * t), (1, 9))
    assert f.rate == pytest.approx(0.3) and f.r2 == pytest.approx(1.0)
    with pytest.raises(ev.EvolutionError):
        ev.fit_rate(t, np.exp(-t), (1, 20))


def test_forced_run_bound(ws, poiseuille):
    y = ws.nodes
    forcing = lambda t: (math.exp(-t) * (1 - y ** 2), np.zeros(ws.n))
    w0 = ev.seeded_omega(ws, 1, 3)
    run = ev.run_linear(ws, poiseuille, 1e-2, 1, w0, forcing=forcing, t_final=10.0)
    chk = ev.verify_spacetime_bound(run, ws, w0)
    assert run.forcing_norm > 0 and np.isfinite(chk.ratio)


def test_euler_short_run(poiseuille):
    ws = spectral.workspace(128)
    run, fits = ev.run_euler(ws, poiseuille, 1, ev.seeded_omega(ws, 1, 0), t_final=30.0)
    wl = run.series["w_L2"]
    # U'' is constant, so the U''-term exchanges no enstrophy
    assert np.max(np.abs(wl / wl[0] - 1)) < 1e-6
    assert set(fits) == {"dphi", "aphi", "w_centre"}
    assert run.series["dphi"][-1] < run.series["dphi"][0]
    with pytest.raises(ValueError):
        ev.run_euler(ws, poiseuille, 1, np.zeros(ws.n), t_final=300.0)


def test_euler_truncation_flag(poiseuille):
    ws = spectral.workspace(32)
    run, _ = ev.run_euler(ws, poiseuille, 1, ev.seeded_omega(ws, 1, 0), t_final=100.0)
    assert run.flags["truncated"] and run.t_final < 100.0


def test_checkpoint_roundtrip(tmp_path, ws, poiseuille):
    run = ev.run_linear(ws, poiseuille, 1e-2, 1, ev.seeded_omega(ws, 1, 0), t_final=1.0,
                        snapshot_every=5)
    ev.save_checkpoint(tmp_path / "ck", run)
    header, data = ev.load_checkpoint(tmp_path / "ck")
    assert header["n"] == ws.n and header["alpha"] == 1 and header["nu"] == 1e-2
    assert np.array_equal(data, np.array([w for _, w in run.snapshots]))


def test_nu_checks(ws, poiseuille):
    with pytest.raises(ValueError):
        ev.run_linear(ws, poiseuille, 0.0, 1, np.ones(ws.n))
