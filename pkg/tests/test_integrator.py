import warnings

import numpy as np
import pytest

from nskorteweg.diagnostics import DIAG_COLUMNS, read_diagnostics_csv
from nskorteweg.dynamics import drift_u, rhs_r
from nskorteweg.fields import State
from nskorteweg.integrator import (
    Schedule,
    cfl_bound,
    detect_stop,
    simulate_batch,
    simulate_path,
    step_em,
    step_imex,
)
from nskorteweg.noise import NoiseSpec, WienerIncrement
from nskorteweg.spectral import read_field_binary

from conftest import make_state

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

TWO_PI = 2 * np.pi


def wavy(m=8, **kw):
    return make_state(
        lambda x: 1 + 0.2 * np.cos(TWO_PI * x), lambda x: 0.1 * np.sin(TWO_PI * x), m=m, **kw
    )


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(1.0, 0.0)
    with pytest.raises(ValueError):
        Schedule(1.0, 0.1, method="rk4")
    with pytest.raises(ValueError):
        Schedule(0.1, 1.0)
    assert Schedule(0.1, 0.03).n_steps == 4
    assert Schedule(0.1, 1e-3).n_steps == 100
    assert Schedule(0.1, 1e-3, noise_substeps=4).noise_dt == pytest.approx(2.5e-4)


@pytest.mark.parametrize("step", [step_em, step_imex])
def test_equilibrium_unchanged(step):
    s = make_state(1.0, 0.0, alpha=0.5, beta=0.0, noise="multiplicative_sin")
    out = step(s, 1e-3, WienerIncrement(np.ones(16), 1e-3))
    assert np.allclose(out.r, s.r, atol=1e-14) and np.allclose(out.u, 0, atol=1e-14)
    assert out.time == pytest.approx(1e-3)


def test_em_is_forward_euler_without_noise():
    s = wavy()
    dt = 1e-4
    out = step_em(s, dt)
    assert np.allclose(out.r, s.r + dt * rhs_r(s), atol=1e-14)
    assert np.allclose(out.u, s.u + dt * drift_u(s), atol=1e-13)


def test_constant_forcing_gives_exact_increment():
    s = make_state(1.0, 0.0)
    out = step_em(s, 1e-3, forcing=2.5)
    assert np.allclose(out.u - s.u, 2.5e-3, rtol=1e-13)


def test_em_adds_cut_off_noise():
    s = make_state(1.0, np.pi / 2, noise="multiplicative_sin")
    s = State(s.r, s.u, s.params.replace(noise=NoiseSpec(mode_count=1)), s.grid)
    out = step_em(s, 1e-4, WienerIncrement(np.array([0.01]), 1e-4))
    assert np.allclose(out.u - s.u, 0.01, atol=1e-12)


def test_imex_converges_to_explicit():
    s = wavy()
    t_end = 0.01
    finals = {}
    for method in ("imex_em", "explicit_em"):
        for dt in (4e-4, 2e-4, 1e-4, 5e-5):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                traj, rep, _ = simulate_path(s, s.params, Schedule(t_end, dt, method, record_every=10**6), 0)
            assert not rep.stopped
            finals[method, dt] = np.concatenate([traj.r[-1], traj.u[-1]])
    diffs = [np.linalg.norm(finals["imex_em", dt] - finals["explicit_em", dt]) for dt in (2e-4, 1e-4, 5e-5)]
    order = np.polyfit(np.log([2e-4, 1e-4, 5e-5]), np.log(diffs), 1)[0]
    assert order >= 1.0


def test_detect_stop_examples():
    s = wavy()
    assert not detect_stop(s, s.params).stopped
    g = s.grid
    # r = c sin(2 pi x) has W2,inf norm c (1 + 2 pi + 4 pi^2) up to grid sampling
    R = 50.0
    c = (R + 1) / (1 + TWO_PI + TWO_PI**2)
    big = State(c * np.sin(TWO_PI * g.x), 0 * g.x, s.params.replace(trunc_radius=R), g)
    rep = detect_stop(big)
    assert rep.stopped and rep.reason == "norm_threshold" and rep.y_max >= R
    nan = State(np.where(g.x < 0.5, 0.0, np.nan), 0 * g.x, s.params, g)
    assert detect_stop(nan).reason == "nonfinite"
    low = State(np.full(g.n_points, np.log(1e-9)), 0 * g.x, s.params, g)
    assert detect_stop(low).reason == "density_floor"


def test_zero_horizon_returns_ic():
    s = wavy()
    traj, rep, recs = simulate_path(s, s.params, Schedule(0.0, 1e-3), 1)
    assert len(traj.times) == 1 and np.array_equal(traj.r[0], s.r) and not rep.stopped
    assert recs[0].t == 0.0


def test_reproducible_bitwise():
    s = wavy(noise="multiplicative_sin")
    sched = Schedule(0.005, 1e-4, record_every=5)
    a, _, _ = simulate_path(s, s.params, sched, 123)
    b, _, _ = simulate_path(s, s.params, sched, 123)
    c, _, _ = simulate_path(s, s.params, sched, 124)
    assert np.array_equal(a.r, b.r) and np.array_equal(a.u, b.u)
    assert np.array_equal(a.diagnostics, b.diagnostics)
    assert not np.array_equal(a.u, c.u)


def test_equilibrium_trajectory_constant():
    s = make_state(1.0, 0.0)
    traj, _, _ = simulate_path(s, s.params, Schedule(0.01, 1e-3), 0)
    assert np.allclose(traj.r, s.r, atol=1e-14) and np.allclose(traj.u, 0, atol=1e-14)
    assert np.allclose(traj.column("H"), 1.0)


def test_batch_matches_single_paths():
    s = wavy(noise="multiplicative_sin")
    sched = Schedule(0.003, 1e-4, record_every=10)
    seeds = [5, 6, 7]
    batch, reps = simulate_batch(s, s.params, sched, seeds)
    for p, seed in enumerate(seeds):
        single, rep, _ = simulate_path(s, s.params, sched, seed)
        assert np.allclose(batch.r[:, p], single.r, rtol=0, atol=1e-12)
        assert (reps[p].stopped, reps[p].reason) == (rep.stopped, rep.reason)
        assert reps[p].y_max == pytest.approx(rep.y_max, rel=1e-12)


def test_stopped_path_is_frozen_and_padded():
    s = wavy(trunc_radius=50.0)
    # second path starts beyond R with a harmless density
    g = s.grid
    r = np.stack([s.r, 3 * np.sin(TWO_PI * g.x)])
    ic = State(r, np.stack([s.u, s.u]), s.params, g)
    traj, reps = simulate_batch(ic, s.params, Schedule(0.002, 1e-4, record_every=5), [1, 2])
    assert not reps[0].stopped
    assert reps[1].stopped and reps[1].reason == "norm_threshold" and reps[1].tau_R == 0.0
    assert len(traj.times) == 5
    assert np.all(np.isnan(traj.diagnostics[1:, 1, 1:]))
    assert np.all(np.isfinite(traj.diagnostics[:, 0]))


def test_cut_off_stop_semantics():
    # a run that grows past R is stopped with reason norm_threshold and tau_R on the time grid
    s = make_state(lambda x: 1 + 0.3 * np.cos(TWO_PI * x), lambda x: 2 * np.sin(TWO_PI * x), m=8, trunc_radius=20.0)
    dt = 1e-4
    traj, rep, _ = simulate_path(s, s.params, Schedule(0.05, dt), 0)
    assert rep.stopped and rep.reason == "norm_threshold"
    assert rep.tau_R / dt == pytest.approx(round(rep.tau_R / dt))
    assert rep.y_max >= 20.0


def test_cfl_warning_for_explicit():
    s = wavy(m=16)
    assert cfl_bound(s) < 1e-2
    with pytest.warns(UserWarning):
        simulate_path(s, s.params, Schedule(0.02, 1e-2, method="explicit_em"), 0, store_states=False)


def test_trajectory_outputs(tmp_path):
    s = wavy()
    traj, _, _ = simulate_path(s, s.params, Schedule(0.001, 1e-4, record_every=5), 9)
    traj.write_snapshots(tmp_path / "snap.bin")
    recs = read_field_binary(tmp_path / "snap.bin")
    assert len(recs) == 2 * len(traj.times)
    assert np.array_equal(recs[2][2], traj.r[1]) and np.array_equal(recs[3][2], traj.u[1])
    traj.write_diagnostics(tmp_path / "d.csv")
    back = read_diagnostics_csv(tmp_path / "d.csv")
    assert back.shape == (3, len(DIAG_COLUMNS))
    assert np.array_equal(back, traj.diagnostics)
    traj.write_manifest(tmp_path / "m.toml")
    doc = tomllib.loads((tmp_path / "m.toml").read_text())
    assert doc["seeds"] == ["9"] and doc["params"]["alpha"] == 1.0
