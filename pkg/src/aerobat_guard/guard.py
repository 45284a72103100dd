"""Guard rigid body: thruster mixing and Newton-Euler rates."""
from dataclasses import dataclass, field

import numpy as np

from aerobat_guard._accel import kernel
from aerobat_guard._linalg import matmul, matvec
from aerobat_guard.spatial import cross3, hat3

GRAVITY = 9.8


def _default_inertia():
    return np.diag([2.2e-3, 2.2e-3, 4.0e-3])


@dataclass(frozen=True)
class GuardParams:
    """Guard mass properties and thruster layout.

    Mass, inertia and arm lengths are placeholders for a ~200 g cage; the
    thruster ceiling ``f_max`` is per motor.
    """

    mass: float = 0.20
    inertia: np.ndarray = field(default_factory=_default_inertia)
    arms: tuple = (0.15, 0.15, 0.15)
    gravity: float = GRAVITY
    f_max: float = 0.6

    def __post_init__(self):
        J = np.asarray(self.inertia, dtype=float)
        object.__setattr__(self, "inertia", J)
        if self.mass <= 0:
            raise ValueError("guard mass must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("guard inertia must be symmetric positive definite")
        if len(self.arms) != 3 or min(self.arms) <= 0:
            raise ValueError("thruster arms must be three positive lengths")
        if self.f_max <= 0:
            raise ValueError("f_max must be positive")


@dataclass
class GuardState:
    position: np.ndarray
    velocity: np.ndarray
    rotation: np.ndarray
    omega: np.ndarray

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0)):
        return cls(np.array(position, dtype=float), np.zeros(3), np.eye(3), np.zeros(3))

    def to_vector(self):
        return np.concatenate([self.position, self.velocity, np.ravel(self.rotation), self.omega])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:15].reshape(3, 3).copy(), x[15:18].copy())


@dataclass
class ThrustCommand:
    """Six thruster forces plus the elastic wrench passed through the mixer.

    ``f_e`` enters the body-z force sum through its z component; ``m_e`` is a
    body-frame moment.
    """

    thrusts: np.ndarray
    f_e: np.ndarray = field(default_factory=lambda: np.zeros(3))
    m_e: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.thrusts = np.asarray(self.thrusts, dtype=float)
        self.f_e = np.asarray(self.f_e, dtype=float)
        self.m_e = np.asarray(self.m_e, dtype=float)
        if self.thrusts.shape != (6,):
            raise ValueError("expected six thruster forces")
        if not (np.all(np.isfinite(self.f_e)) and np.all(np.isfinite(self.m_e))):
            raise ValueError("elastic wrench must be finite")


def mixer_matrix(arms):
    """Map thrusts ``f1..f6`` to ``(f, m_x, m_y, m_z)``."""
    lx, ly, lz = arms
    return np.array([
        [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        [0.0, -lx, 0.0, lx, 0.0, 0.0],
        [-ly, 0.0, ly, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -lz, lz],
    ])


@kernel
def mix_kernel(thrusts, arms, f_e_z, m_e):
    f = thrusts.sum() + f_e_z
    m = np.array([arms[0] * (thrusts[3] - thrusts[1]),
                  arms[1] * (thrusts[2] - thrusts[0]),
                  arms[2] * (thrusts[5] - thrusts[4])]) + m_e
    return f, m


def mix(cmd, params):
    """Collective body-z force and body moments for a thrust command."""
    f, m = mix_kernel(cmd.thrusts, np.asarray(params.arms, dtype=float), float(cmd.f_e[2]), cmd.m_e)
    return float(f), m


def body_to_world_force(R, f):
    """World-frame force of a body-z thrust ``f``: ``R @ [0, 0, f]``."""
    return np.asarray(R, dtype=float)[:, 2] * float(f)


@kernel
def guard_rates(v, R, omega, F, m, mass, J, J_inv, gravity):
    acc = F / mass
    acc[2] -= gravity
    Rdot = matmul(R, hat3(omega))
    omega_dot = matvec(J_inv, m - cross3(omega, matvec(J, omega)))
    return acc, Rdot, omega_dot


def guard_derivative(state, F, m, params):
    """Newton-Euler rates of the guard.

    Args:
        F: total external world-frame force (N), gravity excluded.
        m: body-frame moment (N m).

    Returns:
        :class:`GuardState` holding ``(p', v', R', omega')``.
    """
    J = params.inertia
    acc, Rdot, wdot = guard_rates(np.asarray(state.velocity, dtype=float),
                                  np.asarray(state.rotation, dtype=float),
                                  np.asarray(state.omega, dtype=float),
                                  np.asarray(F, dtype=float), np.asarray(m, dtype=float),
                                  float(params.mass), J, np.linalg.inv(J), float(params.gravity))
    return GuardState(np.array(state.velocity, dtype=float), acc, Rdot, wdot)


def kinetic_energy(state, params):
    w = state.omega
    return 0.5 * params.mass * state.velocity @ state.velocity + 0.5 * w @ params.inertia @ w


def angular_momentum_world(state, params):
    return state.rotation @ (params.inertia @ state.omega)
