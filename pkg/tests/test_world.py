"""World tests: density-derived spawn counts, determinism, kinematics
clamps (analytic oracles), disturbance selection, dropout bursts."""

import numpy as np
import pytest

from tacsim.config import ScenarioConfig
from tacsim.world import (
    DisturbanceState,
    Equipage,
    Mode,
    SpawnError,
    disruption_params,
    gnss_error_m,
    init_disturbance,
    select_fraction,
    spawn_traffic,
    step_kinematics,
    update_dropouts,
)


def cfg(**kw):
    base = dict(family="comms_impairment", density_veh_km2=50,
                footprint_area_km2=2.0, duration_s=60.0)
    base.update(kw)
    return ScenarioConfig(**base)


def test_spawn_count_density_area():
    world = spawn_traffic(cfg(density_veh_km2=50, footprint_area_km2=2.0),
                          np.random.default_rng(0))
    assert world.n == 100


def test_spawn_count_max_density():
    world = spawn_traffic(cfg(density_veh_km2=250, footprint_area_km2=1.0),
                          np.random.default_rng(0))
    assert world.n == 250


def test_spawn_determinism():
    a = spawn_traffic(cfg(), np.random.default_rng(42))
    b = spawn_traffic(cfg(), np.random.default_rng(42))
    assert np.array_equal(a.pos, b.pos)
    assert np.array_equal(a.dest, b.dest)
    assert np.array_equal(a.equipage, b.equipage)


def test_spawn_spacing_honored():
    world = spawn_traffic(cfg(density_veh_km2=250, footprint_area_km2=0.5),
                          np.random.default_rng(3))
    d2 = np.sum((world.pos[:, None, :2] - world.pos[None, :, :2]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    assert np.sqrt(d2.min()) >= 20.0 - 1e-9


def test_spawn_too_small_footprint():
    with pytest.raises(SpawnError):
        spawn_traffic(cfg(density_veh_km2=100000, footprint_area_km2=0.001),
                      np.random.default_rng(0))


def test_altitude_bands_round_robin():
    world = spawn_traffic(cfg(), np.random.default_rng(1))
    assert set(np.unique(world.pos[:, 2])) == {30.0, 60.0, 90.0}


def test_kinematics_zero_accel_advance():
    pos, vel = step_kinematics(np.array([0.0, 0.0, 30.0]),
                               np.array([10.0, 0.0, 0.0]),
                               np.zeros(3), 1.0)
    assert np.allclose(pos, [10.0, 0.0, 30.0])
    assert np.allclose(vel, [10.0, 0.0, 0.0])


def test_kinematics_accel_clamp():
    _, vel = step_kinematics(np.zeros(3), np.zeros(3),
                             np.array([10.0, 0.0, 0.0]), 1.0, accel_max=3.0)
    assert vel[0] == pytest.approx(3.0)


def test_kinematics_speed_clamp():
    _, vel = step_kinematics(np.zeros(3), np.array([14.0, 0.0, 0.0]),
                             np.array([3.0, 0.0, 0.0]), 1.0,
                             accel_max=3.0, speed_max=15.0)
    assert np.linalg.norm(vel) == pytest.approx(15.0)


def test_closing_range_rate_analytic():
    # two opposing vehicles at 10 m/s each close at -20 m/s
    p1, v1 = np.array([0.0, 0.0, 30.0]), np.array([10.0, 0.0, 0.0])
    p2, v2 = np.array([100.0, 0.0, 30.0]), np.array([-10.0, 0.0, 0.0])
    r0 = np.linalg.norm(p2 - p1)
    p1n, _ = step_kinematics(p1, v1, np.zeros(3), 0.5)
    p2n, _ = step_kinematics(p2, v2, np.zeros(3), 0.5)
    r1 = np.linalg.norm(p2n - p1n)
    assert (r1 - r0) / 0.5 == pytest.approx(-20.0)


def test_trapezoidal_integration():
    # constant accel a from rest: x = 0.5*(v0+v1)*dt = 0.5*a*dt^2
    pos, vel = step_kinematics(np.zeros(3), np.zeros(3),
                               np.array([2.0, 0.0, 0.0]), 1.0)
    assert pos[0] == pytest.approx(1.0)
    assert vel[0] == pytest.approx(2.0)


def test_select_fraction_deterministic():
    rng = np.random.default_rng(5)
    sel = select_fraction(100, 0.1, rng)
    assert len(sel) == 10
    rng2 = np.random.default_rng(5)
    assert np.array_equal(sel, select_fraction(100, 0.1, rng2))


def test_spoof_selection_counts():
    config = cfg(family="message_integrity",
                 disturbance={"fault": "spoof", "fraction": 0.1})
    world = spawn_traffic(config, np.random.default_rng(0))
    state = init_disturbance(config, world, np.random.default_rng(1))
    assert len(state.spoof_senders) == 10
    assert len(state.replay_senders) == 0


def test_mixed_fault_disjoint_senders():
    config = cfg(family="message_integrity",
                 disturbance={"fault": "mixed", "fraction": 0.2})
    world = spawn_traffic(config, np.random.default_rng(0))
    state = init_disturbance(config, world, np.random.default_rng(1))
    assert len(state.spoof_senders) == 20
    assert len(state.replay_senders) == 20
    assert not set(state.spoof_senders) & set(state.replay_senders)


def test_gnss_ramp_profile():
    config = cfg(family="gnss_corruption",
                 disturbance={"start_s": 30, "ramp_s": 60, "error_max_m": 60})
    assert gnss_error_m(config, 10_000) == 0.0
    assert gnss_error_m(config, 60_000) == pytest.approx(30.0)
    assert gnss_error_m(config, 300_000) == 60.0


def test_dropout_bursts_toggle():
    config = cfg(family="degraded_observability",
                 density_veh_km2=10, footprint_area_km2=1.0,
                 disturbance={"dropout_burst_s": 3.0, "dropout_interval_s": 8.0})
    world = spawn_traffic(config, np.random.default_rng(0))
    state = init_disturbance(config, world, np.random.default_rng(1))
    rng = np.random.default_rng(2)
    frac = []
    for step in range(3000):
        mask = update_dropouts(config, state, step * 100.0, rng)
        frac.append(mask.mean())
    overall = np.mean(frac)
    assert 0.1 < overall < 0.6  # bursts actually occur and clear


def test_mixed_equipage_fraction():
    config = cfg(family="mixed_equipage", density_veh_km2=50,
                 footprint_area_km2=2.0,
                 disturbance={"non_v2v_fraction": 0.2})
    world = spawn_traffic(config, np.random.default_rng(0))
    assert int((world.equipage == Equipage.NON_V2V).sum()) == 20


def test_disruption_levels():
    assert disruption_params(cfg(disturbance={"disruption": "high"}))[1] > \
        disruption_params(cfg(disturbance={"disruption": "low"}))[1]
    with pytest.raises(Exception):
        disruption_params(cfg(disturbance={"disruption": "extreme"}))
