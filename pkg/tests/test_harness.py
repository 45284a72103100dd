import math

import numpy as np
import pytest

from aerobat_guard import harness
from aerobat_guard.harness import sim
from aerobat_guard.harness.scenario import (AerobatSection, AeroSection, ControllerSection, Disturbance,
                                            NoiseSection, ObserverSection, Scenario)
from aerobat_guard.spatial import euler_to_rotation


# -- rk4_step ------------------------------------------------------------------

def test_rk4_constant_state():
    x = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(harness.rk4_step(lambda t, s: np.zeros(3), x, 0.1), x)


def test_rk4_exponential_decay():
    out = harness.rk4_step(lambda t, s: -s, np.array([1.0]), 0.1)
    assert abs(out[0] - math.exp(-0.1)) < 1e-7


def test_rk4_harmonic_oscillator_energy():
    # unit oscillator; energy is exactly 1/2 along the true solution
    f = lambda t, s: np.array([s[1], -s[0]])
    x = np.array([1.0, 0.0])
    dt = 1e-4
    for k in range(100_000):
        x = harness.rk4_step(f, x, dt, k * dt)
    energy = 0.5 * (x @ x)
    assert abs(energy - 0.5) / 0.5 < 1e-8
    assert np.allclose(x, [math.cos(10.0), -math.sin(10.0)], atol=1e-9)


def test_rk4_reprojects_rotation_block():
    R = euler_to_rotation([0.3, -0.2, 1.0])
    spin = lambda t, s: np.concatenate([[0.0], (R @ np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0.0]])).ravel()])
    out = harness.rk4_step(spin, np.concatenate([[0.0], R.ravel()]), 0.05, rotation_slices=(slice(1, 10),))
    Q = out[1:].reshape(3, 3)
    assert np.linalg.norm(Q.T @ Q - np.eye(3)) < 1e-12


def test_rk4_nonfinite_derivative_dumps_state():
    with pytest.raises(harness.NonFiniteStateError) as exc:
        harness.rk4_step(lambda t, s: np.full_like(s, np.nan), np.array([1.0, 2.0]), 0.1)
    assert np.array_equal(exc.value.state, [1.0, 2.0])


@pytest.mark.parametrize("dt", [0.0, -1e-3])
def test_rk4_rejects_bad_step(dt):
    with pytest.raises(ValueError):
        harness.rk4_step(lambda t, s: s, np.ones(1), dt)


# -- clock ---------------------------------------------------------------------

def test_clock_time_is_tick_times_dt():
    clock = harness.SimClock(1e-4, {"a": 50})
    clock.advance_to(123_457)
    assert clock.t == 123_457 * 1e-4


def test_clock_schedule_and_counts():
    clock = harness.SimClock(1.0 / 12000, {"control": 60, "mocap": 50})
    fired = {"control": 0, "mocap": 0}
    while clock.tick <= 12000:
        for k in fired:
            fired[k] += clock.fire(k)
        clock.advance_to(min(clock.next_tick(k) for k in fired))
    assert fired == {"control": 201, "mocap": 241}
    with pytest.raises(ValueError):
        clock.advance_to(0)


# -- scenario schema -------------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    sc = harness.preset_scenario("test3", duration=2.5, seed=7)
    path = tmp_path / "s.yaml"
    harness.save_scenario(path, sc)
    assert harness.load_scenario(path) == sc


def test_bundled_scenario_matches_preset():
    from pathlib import Path
    sc = harness.load_scenario(Path(__file__).resolve().parents[1] / "scenarios" / "hover_test1.yaml")
    assert sc == harness.preset_scenario("test1").replace(name="hover-test1")


def test_missing_required_key_is_named():
    with pytest.raises(harness.ScenarioError) as exc:
        harness.loads_scenario("duration: 1.0\n")
    assert exc.value.path == "observer"
    assert "missing" in str(exc.value)


def test_unknown_key_reports_path_and_line():
    text = "duration: 1.0\nobserver:\n  G_bound: 1.0\nguard:\n  mass: 0.2\n  colour: red\n"
    with pytest.raises(harness.ScenarioError) as exc:
        harness.loads_scenario(text, source="bad.yaml")
    assert exc.value.path == "guard.colour"
    assert exc.value.line == 6
    assert str(exc.value).startswith("bad.yaml:6:")


def test_type_error_reports_path():
    with pytest.raises(harness.ScenarioError) as exc:
        harness.loads_scenario("duration: fast\nobserver: {G_bound: 1.0}\n")
    assert exc.value.path == "duration"
    assert exc.value.line == 1


def test_dt_must_divide_loop_periods():
    sc = Scenario(duration=1.0, observer=ObserverSection(G_bound=1.0), dt=1e-3)
    with pytest.raises(harness.ScenarioError, match="does not divide"):
        sc.validate()


@pytest.mark.parametrize("field,value", [("duration", 0.0), ("dt", -1.0)])
def test_non_positive_times_rejected(field, value):
    sc = Scenario(duration=1.0, observer=ObserverSection(G_bound=1.0)).replace(**{field: value})
    with pytest.raises(harness.ScenarioError):
        sc.validate()


# -- closed-loop runs ------------------------------------------------------------

def _trim_scenario(**kw):
    # zero position gains, aero off, payload centred under the cage
    base = dict(duration=2.0, observer=ObserverSection(G_bound=1.0), dt=1.0 / 2400,
                controller=ControllerSection(position_gains=((0.0, 0.0, 0.0),) * 3),
                aerobat=AerobatSection(shoulder=(0.0, 0.01, 0.0)),
                aero=AeroSection(enabled=False), noise=NoiseSection(0.0, 0.0, 0.0))
    base.update(kw)
    return Scenario(**base)


@pytest.fixture(scope="module")
def trim_log():
    return harness.run(_trim_scenario())


def test_zero_gain_trim_holds_position(trim_log):
    assert not trim_log.diverged
    drift = np.abs(trim_log.positions() - [0.0, 0.0, 0.2]).max(axis=0)
    assert drift[0] < 1e-9 and drift[1] < 1e-9
    # 16-bit PWM rounds the per-motor trim, leaving a tiny vertical residual
    assert drift[2] < 2e-4


def test_loop_rates_are_exact(trim_log):
    c = trim_log.counts
    # 2 s including the t = 0 tick
    assert c["ticks_control"] == 401 and c["control"] == 401
    assert c["ticks_mocap"] == 481 and c["mocap_sent"] == 481
    assert c["ticks_imu"] == 401 and c["ticks_pwm"] == 101


def test_log_row_count(trim_log):
    sc = _trim_scenario()
    assert len(trim_log.rows) == sc.total_ticks() // sc.decimation() + 1
    assert trim_log.rows.shape[1] == len(harness.COLUMNS)


def test_custom_decimation_row_count():
    sc = _trim_scenario(duration=0.25, log_decimation=24)
    log = harness.run(sc)
    assert len(log.rows) == 600 // 24 + 1


def test_rotation_stays_orthonormal(trim_log):
    assert trim_log.max_orthonormality_error < 1e-9


def test_same_seed_gives_identical_log_bytes():
    sc = harness.preset_scenario("test2", duration=0.5, seed=3)
    assert sim.format_log(harness.run(sc)) == sim.format_log(harness.run(sc))


def test_different_seed_changes_noisy_log():
    a = harness.run(harness.preset_scenario("test1", duration=0.2, seed=1))
    b = harness.run(harness.preset_scenario("test1", duration=0.2, seed=2))
    assert not np.array_equal(a.rows, b.rows)


def test_divergence_flags_partial_log(tmp_path):
    sc = _trim_scenario(duration=1.0, divergence_bound=0.5,
                        disturbances=(Disturbance(0.0, 1.0, (30.0, 0.0, 0.0)),))
    log = harness.run(sc)
    assert log.diverged and "bound" in log.reason
    assert log.rows[-1, harness.COLUMNS.index("diverged")] == 1.0
    assert log.rows[-1, 0] < 1.0
    path = tmp_path / "div.csv"
    harness.write_log(path, log)
    assert harness.read_log(path).diverged


def test_log_round_trip_is_exact(tmp_path, trim_log):
    path = tmp_path / "run.csv"
    harness.write_log(path, trim_log)
    back = harness.read_log(path)
    assert back.columns == list(harness.COLUMNS)
    assert np.array_equal(back.rows, trim_log.rows)
    assert path.read_text().splitlines()[0].startswith("t,p_x,p_y,p_z,roll,pitch,yaw")


def test_read_log_rejects_empty(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(ValueError):
        harness.read_log(path)


def test_non_hurwitz_observer_is_refused():
    sc = _trim_scenario(duration=0.1, observer=ObserverSection(G_bound=1.0, bandwidth=-5.0))
    with pytest.raises(harness.ScenarioError):
        harness.run(sc)
