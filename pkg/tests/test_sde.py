import math

import numpy as np
import pytest

from smallnoise import (
    LimitLaw,
    ModelSpec,
    SimConfig,
    SimulationError,
    builtin_model,
    exact_feller_endpoint,
    flow_map,
    flow_map_grid,
    ks_pvalue,
    sample_limit,
    simulate_X,
    simulate_coupled,
    simulate_coupled_ensemble,
    simulate_ensemble,
)


# ------------------------------------------------------------ configuration

def test_sim_config_validation():
    SimConfig(dt=0.01, horizon=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.0, horizon=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=2.0, horizon=1.0, seed=0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.01, horizon=1.0, seed=-1)
    with pytest.raises(ValueError):
        SimConfig(dt=0.01, horizon=1.0, seed=0, scheme="milstein")
    with pytest.raises(ValueError):
        SimConfig(dt=0.01, horizon=1.0, seed=0, record_stride=0)


def test_n_steps_rounding():
    assert SimConfig(dt=0.1, horizon=1.0, seed=0).n_steps == 10
    assert SimConfig(dt=0.3, horizon=1.0, seed=0).n_steps == 3


# ----------------------------------------------------------- single paths

def test_single_path_grid_and_determinism(wf):
    cfg = SimConfig(dt=0.01, horizon=1.0, seed=12, record_stride=7)
    p = simulate_X(wf, 0.05, 0.3, cfg)
    assert p.times[0] == 0.0
    assert p.values[0] == 0.3
    assert p.times[-1] == pytest.approx(1.0)
    q = simulate_X(wf, 0.05, 0.3, cfg)
    np.testing.assert_array_equal(p.values, q.values)


def test_noiseless_run_tracks_flow_at_first_order(wf):
    x0, horizon = 0.2, 2.0
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        cfg = SimConfig(dt=dt, horizon=horizon, seed=0)
        p = simulate_X(wf, 0.1, x0, cfg, zero_noise=True)
        errs.append(abs(p.values[-1] - flow_map(wf, horizon, x0)))
    # Explicit Euler converges at order dt: halving dt roughly halves the
    # endpoint error.
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.25)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.25)


def test_start_at_zero_is_absorbed_immediately(wf):
    cfg = SimConfig(dt=0.01, horizon=0.5, seed=4)
    p = simulate_X(wf, 0.2, 0.0, cfg)
    assert p.absorbed_at == 0.0
    assert np.all(p.values == 0.0)


def test_absorbed_paths_stay_at_zero(wf):
    cfg = SimConfig(dt=0.01, horizon=6.0, seed=77)
    times = np.linspace(0.0, 6.0, 25)
    ens = simulate_ensemble(wf, 1e-3, 1e-3, cfg, 400, times)
    dead = np.isfinite(ens.absorbed_at)
    assert dead.any() and (~dead).any()
    for i in np.flatnonzero(dead)[:20]:
        after = ens.times >= ens.absorbed_at[i]
        assert np.all(ens.values[i, after] == 0.0)
        before = ens.times < ens.absorbed_at[i]
        assert np.all(ens.values[i, before] > 0.0)


def test_states_remain_in_state_space(wf):
    cfg = SimConfig(dt=0.005, horizon=3.0, seed=5)
    ens = simulate_ensemble(wf, 0.5, 0.9, cfg, 300, np.linspace(0, 3, 13))
    assert np.all(ens.values >= 0.0)
    assert np.all(ens.values <= 1.0)


# --------------------------------------------------------------- ensembles

def test_thread_count_does_not_change_bytes(balancing):
    cfg = SimConfig(dt=0.01, horizon=2.0, seed=31)
    times = np.linspace(0.0, 2.0, 9)
    serial = simulate_ensemble(balancing, 0.02, 0.02, cfg, 513, times, threads=1)
    threaded = simulate_ensemble(balancing, 0.02, 0.02, cfg, 513, times, threads=3)
    np.testing.assert_array_equal(serial.values, threaded.values)
    np.testing.assert_array_equal(serial.absorbed_at, threaded.absorbed_at)


def test_ensemble_records_requested_times(wf):
    cfg = SimConfig(dt=0.01, horizon=1.0, seed=2)
    ens = simulate_ensemble(wf, 0.1, 0.2, cfg, 8, [0.0, 0.25, 0.999])
    assert ens.n_paths == 8
    assert ens.values.shape == (8, 3)
    np.testing.assert_allclose(ens.times, [0.0, 0.25, 1.0])
    assert np.all(ens.values[:, 0] == 0.2)
    with pytest.raises(ValueError):
        simulate_ensemble(wf, 0.1, 0.2, cfg, 8, [0.5, 0.2])
    with pytest.raises(ValueError):
        simulate_ensemble(wf, 0.1, 0.2, cfg, 8, [0.0, 1.5])


def test_sup_error_against_dense_reference(wf):
    cfg = SimConfig(dt=0.002, horizon=1.0, seed=9)
    steps = np.arange(cfg.n_steps + 1)
    reference = flow_map_grid(wf, 0.3, steps * cfg.dt)
    ens = simulate_ensemble(
        wf, 0.05, 0.3, cfg, 4, steps * cfg.dt,
        reference=reference, zero_noise=True,
    )
    # Noiseless stepping against the exact flow: sup error is pure Euler
    # discretization error, small but nonzero.
    assert ens.sup_error is not None
    assert np.all(ens.sup_error > 0.0)
    assert np.all(ens.sup_error < 1e-3)
    gap = np.abs(ens.values - reference[None, :]).max()
    assert np.all(ens.sup_error >= gap - 1e-15)


@pytest.mark.filterwarnings("ignore:overflow:RuntimeWarning")
def test_simulation_error_on_explosion():
    runaway = ModelSpec(
        name="runaway",
        drift=lambda x: x * (1.0 + x * x),
        diffusion=lambda x: x,
        a=1.0,
        b=1.0,
        drift_root=math.inf,
        state_upper=math.inf,
    )
    cfg = SimConfig(dt=0.5, horizon=400.0, seed=1)
    with pytest.raises(SimulationError) as info:
        simulate_X(runaway, 1.0, 10.0, cfg, zero_noise=True)
    assert info.value.step >= 0


# ---------------------------------------------------------------- coupling

def test_coupled_pair_shapes_and_start_points(wf):
    cfg = SimConfig(dt=0.01, horizon=1.0, seed=3)
    pair = simulate_coupled(wf, 1e-2, cfg)
    assert pair.x_path.values[0] == pytest.approx(1e-2)
    assert pair.y_path.values[0] == pytest.approx(1.0)
    assert pair.seed == 3


def test_coupled_companion_martingale(wf):
    # exp(-a*t) * Y(t) has constant expectation 1.
    cfg = SimConfig(dt=0.005, horizon=3.0, seed=17)
    _, y_ens = simulate_coupled_ensemble(wf, 1e-3, cfg, 4000, [3.0])
    discounted = math.exp(-wf.a * 3.0) * y_ens.values[:, 0]
    se = discounted.std(ddof=1) / math.sqrt(discounted.size)
    assert abs(discounted.mean() - 1.0) <= 3.0 * se


def test_coupled_paths_shrink_together(wf):
    # Both processes see identical draws, so the rescaled gap at a fixed
    # time shrinks down the ladder (the L1 lemma at test scale).
    cfg = SimConfig(dt=0.002, horizon=1.0, seed=23)
    gaps = []
    for eps in (1e-2, 1e-4):
        x_ens, y_ens = simulate_coupled_ensemble(wf, eps, cfg, 600, [1.0])
        gaps.append(np.mean(np.abs(x_ens.values[:, 0] / eps - y_ens.values[:, 0])))
    assert gaps[1] < gaps[0]


# ------------------------------------------------------- exact endpoint law

def test_feller_endpoint_validation():
    with pytest.raises(ValueError):
        exact_feller_endpoint(1.0, 1.0, 0.0, 10, seed=0)
    with pytest.raises(ValueError):
        exact_feller_endpoint(-1.0, 1.0, 1.0, 10, seed=0)


def test_feller_endpoint_mean_and_atom():
    a, b, t, n = 1.0, 1.0, 0.7, 200000
    xs = exact_feller_endpoint(a, b, t, n, seed=29)
    se = xs.std(ddof=1) / math.sqrt(n)
    assert abs(xs.mean() - 1.0) <= 3.0 * se
    rate = 2.0 * a / (b * -math.expm1(-a * t))
    atom = math.exp(-rate)
    atom_se = math.sqrt(atom * (1.0 - atom) / n)
    assert abs(np.mean(xs == 0.0) - atom) <= 3.0 * atom_se


def test_feller_endpoint_approaches_limit_law_generic_slopes():
    # At t much larger than 1/a the discounted endpoint and the limit law
    # coincide; exercised away from the unit-slope defaults.
    a, b = 1.3, 2.5
    xs = exact_feller_endpoint(a, b, 50.0 / a, 30000, seed=41)
    ys = sample_limit(LimitLaw(a, b), 30000, seed=43)
    assert ks_pvalue(xs, ys) > 1e-3


def test_feller_endpoint_matches_euler_simulation():
    # Dual route at test scale: the Euler scheme on the linear model with
    # epsilon playing the diffusion slope and x0 = 1 is the linear process
    # itself; its discounted endpoint must match the exact sampler.
    a, b, t = 1.0, 1.0, 0.5
    model = builtin_model("linear_feller", a)
    cfg = SimConfig(dt=2e-4, horizon=t, seed=37)
    ens = simulate_ensemble(model, b, 1.0, cfg, 4000, [t])
    euler = math.exp(-a * t) * ens.values[:, 0]
    exact = exact_feller_endpoint(a, b, t, 4000, seed=39)
    assert ks_pvalue(euler, exact) > 0.01
