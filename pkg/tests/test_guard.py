import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerobat_guard import spatial
from aerobat_guard.guard import (GuardParams, GuardState, ThrustCommand, angular_momentum_world, body_to_world_force,
                                 guard_derivative, kinetic_energy, mix, mixer_matrix)
from aerobat_guard.harness import rk4_step

thrust6 = st.lists(st.floats(0, 1), min_size=6, max_size=6).map(np.array)


def test_mix_examples():
    p = GuardParams(arms=(0.3, 0.3, 0.3))
    f, m = mix(ThrustCommand(np.ones(6)), p)
    assert f == 6 and np.all(m == 0)
    f, m = mix(ThrustCommand([1, 0, 2, 0, 0, 0]), p)
    assert m[1] == pytest.approx(0.3)
    f, m = mix(ThrustCommand(np.zeros(6)), p)
    assert f == 0 and np.all(m == 0)


def test_mix_elastic_passthrough():
    f, m = mix(ThrustCommand(np.zeros(6), f_e=[1.0, 2.0, 0.5], m_e=[0.1, 0.2, 0.3]), GuardParams())
    assert f == 0.5
    np.testing.assert_array_equal(m, [0.1, 0.2, 0.3])


def test_thrust_command_validation():
    with pytest.raises(ValueError):
        ThrustCommand(np.zeros(5))
    with pytest.raises(ValueError):
        ThrustCommand(np.zeros(6), m_e=[np.inf, 0, 0])


@given(thrust6, thrust6, st.floats(-3, 3), st.floats(-3, 3))
def test_mix_linear(u, v, a, b):
    p = GuardParams()
    fu, mu = mix(ThrustCommand(u), p)
    fv, mv = mix(ThrustCommand(v), p)
    f, m = mix(ThrustCommand(a * u + b * v), p)
    assert f == pytest.approx(a * fu + b * fv, abs=1e-12)
    np.testing.assert_allclose(m, a * mu + b * mv, atol=1e-12)


@given(thrust6)
def test_mix_pair_symmetry(u):
    p = GuardParams()
    f, m = mix(ThrustCommand(u), p)
    for (i, j), axis in (((1, 3), 0), ((0, 2), 1), ((4, 5), 2)):
        w = u.copy()
        w[[i, j]] = w[[j, i]]
        fs, ms = mix(ThrustCommand(w), p)
        assert fs == pytest.approx(f, abs=1e-14)
        assert ms[axis] == pytest.approx(-m[axis], abs=1e-14)


def test_mixer_matrix_agrees_with_mix(rng):
    p = GuardParams()
    u = rng.random(6)
    f, m = mix(ThrustCommand(u), p)
    np.testing.assert_allclose(mixer_matrix(p.arms) @ u, [f, *m], atol=1e-15)


def test_body_to_world_force():
    np.testing.assert_array_equal(body_to_world_force(np.eye(3), 5.0), [0, 0, 5])
    R = spatial.euler_to_rotation((np.pi / 2, 0, 0))
    assert np.linalg.norm(body_to_world_force(R, 1.0)) == pytest.approx(1.0)
    R = spatial.euler_to_rotation((0.1, 0.2, 0.3))
    np.testing.assert_allclose(body_to_world_force(R, 2.0), 2 * R[:, 2])


def test_params_validation():
    with pytest.raises(ValueError):
        GuardParams(mass=0)
    with pytest.raises(ValueError):
        GuardParams(inertia=np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        GuardParams(arms=(0.1, 0.0, 0.1))


def test_free_fall_and_trim():
    p = GuardParams()
    d = guard_derivative(GuardState.at_rest(), np.zeros(3), np.zeros(3), p)
    np.testing.assert_array_equal(d.velocity, [0, 0, -9.8])
    d = guard_derivative(GuardState.at_rest(), body_to_world_force(np.eye(3), p.mass * 9.8), np.zeros(3), p)
    assert np.linalg.norm(d.velocity) < 1e-12


def test_euler_equation_example():
    J = np.diag([1.0, 2.0, 3.0])
    p = GuardParams(inertia=J)
    w = np.array([1.0, 1.0, 0.0])
    s = GuardState(np.zeros(3), np.zeros(3), np.eye(3), w)
    d = guard_derivative(s, np.zeros(3), np.zeros(3), p)
    np.testing.assert_allclose(d.omega, -np.linalg.solve(J, np.cross(w, J @ w)))
    np.testing.assert_allclose(d.rotation, spatial.hat(w))


def _torque_free(p, state, t_end=10.0, dt=1e-4):
    def f(t, x):
        s = GuardState.from_vector(x)
        return guard_derivative(s, np.full(3, 0.0) + [0, 0, p.mass * p.gravity], np.zeros(3), p).to_vector()
    x = state.to_vector()
    for k in range(int(round(t_end / dt))):
        x = rk4_step(f, x, dt, k * dt, rotation_slices=(slice(6, 15),))
    return GuardState.from_vector(x)


def test_torque_free_conservation():
    p = GuardParams(inertia=np.diag([2.2e-3, 3.1e-3, 4.0e-3]))
    s0 = GuardState(np.zeros(3), np.array([0.1, -0.2, 0.05]), spatial.euler_to_rotation((0.2, 0.1, -0.3)),
                    np.array([3.0, -1.0, 2.0]))
    s1 = _torque_free(p, s0, t_end=2.0)
    E0, E1 = kinetic_energy(s0, p), kinetic_energy(s1, p)
    L0, L1 = angular_momentum_world(s0, p), angular_momentum_world(s1, p)
    assert abs(E1 - E0) / E0 < 1e-6 * 2.0
    assert np.linalg.norm(L1 - L0) / np.linalg.norm(L0) < 1e-6 * 2.0
