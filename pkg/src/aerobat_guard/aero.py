"""Unsteady blade-element aerodynamics.

Each wing is cut into ``n`` spanwise strips. The bound circulation is a
truncated sine series in the station angle ``theta_i = arccos(s_i / l)``::

    Gamma_i = sum_k a_k sin(k theta_i)

and the force-coefficient response of strip ``i`` to its effective normal
flow ``y'_i`` is the Duhamel convolution with a two-term exponential
indicial kernel ``Phi(tau) = sum_k psi_k exp(-eps_k tau / c_i)``. Two memory
states per strip turn the convolution into an ODE::

    z_k' = -(eps_k / c_i) z_k + y'
    beta = Phi(0) y' + sum_k (psi_k eps_k / c_i) z_k

and the Kutta-Joukowski relation ``beta = Gamma / c + dGamma/dt`` closes the
system for the Fourier coefficients::

    A a' = -B a + C Z + Phi(0) y'
"""
from dataclasses import dataclass, field

import numpy as np

from aerobat_guard._accel import kernel

STANDARD = "standard"
TIME_VARYING = "time-varying"
FORMULATIONS = (STANDARD, TIME_VARYING)


@dataclass(frozen=True)
class WagnerCoefficients:
    """Two-term exponential indicial kernel (Jones values by default)."""

    psi1: float = 0.165
    psi2: float = 0.335
    eps1: float = 0.0455
    eps2: float = 0.3

    def __post_init__(self):
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("decay rates eps1, eps2 must be positive")
        if not self.psi1 + self.psi2 > 0:
            raise ValueError("psi1 + psi2 must be positive")

    @property
    def phi0(self):
        return self.psi1 + self.psi2

    @property
    def psi(self):
        return np.array([self.psi1, self.psi2])

    @property
    def eps(self):
        return np.array([self.eps1, self.eps2])


@dataclass(frozen=True)
class BladeGeometry:
    """Strip layout of one wing.

    ``stations`` are spanwise distances from the root (m); a station at the
    tip (``s == l``) would make ``sin(theta) = 0`` and is rejected.
    """

    stations: np.ndarray
    chords: np.ndarray
    semispan: float
    widths: np.ndarray = field(default=None)

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.stations, dtype=float))
        c = np.atleast_1d(np.asarray(self.chords, dtype=float))
        if s.shape != c.shape or s.ndim != 1 or s.size == 0:
            raise ValueError("stations and chords must be equal-length 1-D arrays")
        if self.semispan <= 0:
            raise ValueError("semispan must be positive")
        if np.any(s < 0) or np.any(s >= self.semispan):
            raise ValueError("stations must satisfy 0 <= s_i < semispan (tip strip has sin(theta) = 0)")
        if np.any(np.diff(s) <= 0):
            raise ValueError("stations must be strictly increasing")
        if np.any(c <= 0):
            raise ValueError("chords must be positive")
        w = self.widths
        if w is None:
            edges = np.concatenate([[0.0], 0.5 * (s[1:] + s[:-1]), [self.semispan]])
            w = np.diff(edges)
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if w.shape != s.shape or np.any(w <= 0):
            raise ValueError("widths must be positive, one per strip")
        object.__setattr__(self, "stations", s)
        object.__setattr__(self, "chords", c)
        object.__setattr__(self, "widths", w)

    @classmethod
    def uniform_theta(cls, n, semispan=0.15, root_chord=0.06, elliptic=True):
        """``n`` strips at the midpoints of a uniform grid in theta over (0, pi/2).

        With ``elliptic`` the chords follow ``root_chord * sin(theta)``.
        """
        theta = (np.arange(n, 0, -1) - 0.5) * np.pi / (2 * n)
        s = semispan * np.cos(theta)
        c = root_chord * np.sin(theta) if elliptic else np.full(n, root_chord)
        return cls(s, c, semispan)

    @classmethod
    def from_theta(cls, theta, chords, semispan=1.0):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        order = np.argsort(-theta)
        return cls(semispan * np.cos(theta[order]), np.atleast_1d(chords)[order], semispan)

    @property
    def n(self):
        return self.stations.size

    @property
    def theta(self):
        return np.arccos(self.stations / self.semispan)

    def circulation_matrix(self):
        """Rows ``[sin(theta_i), sin(2 theta_i), ..., sin(n theta_i)]``."""
        k = np.arange(1, self.n + 1)
        return np.sin(np.outer(self.theta, k))

    def induced_matrix(self):
        """Induced-kinematics matrix; its first column is identically one."""
        th = self.theta
        sin_th = np.sin(th)
        if np.any(sin_th <= 0):
            raise ValueError("strip at theta = 0 makes the induced kinematics singular")
        M = self.circulation_matrix() / sin_th[:, None]
        M[:, 0] = 1.0
        return M


@dataclass
class AeroState:
    """Fourier coefficients ``a`` (n,) and memory states ``Z`` (n, 2)."""

    a: np.ndarray
    Z: np.ndarray

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros((n, 2)))

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        n = x.size // 3
        return cls(x[:n].copy(), x[n:].reshape(n, 2).copy())

    def to_vector(self):
        return np.concatenate([self.a, np.ravel(self.Z)])


@dataclass(frozen=True)
class AeroSystem:
    """Pre-assembled matrices for one wing; built by :func:`assemble`."""

    A: np.ndarray
    A_inv: np.ndarray
    B: np.ndarray
    C: np.ndarray
    decay: np.ndarray
    M: np.ndarray
    phi0: float
    time_varying: bool


def assemble(geom, coeffs=WagnerCoefficients(), formulation=STANDARD, cond_limit=1e10):
    """Assemble the stacked state-space matrices for ``geom``.

    Raises:
        ValueError: unknown formulation, or an ill-conditioned circulation matrix.
    """
    if formulation not in FORMULATIONS:
        raise ValueError(f"formulation must be one of {FORMULATIONS}, got {formulation!r}")
    A = geom.circulation_matrix()
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ValueError(f"circulation matrix is singular for this station layout (condition number {cond:.3e})")
    c = geom.chords
    B = A / c[:, None]
    C = np.outer(1.0 / c, coeffs.psi * coeffs.eps)
    decay = np.outer(1.0 / c, coeffs.eps)
    return AeroSystem(A, np.linalg.inv(A), B, C, decay, geom.induced_matrix(), coeffs.phi0,
                      formulation == TIME_VARYING)


@kernel
def aero_rates(a, Z, y1, A_inv, B, C, decay, M, phi0, induced, time_varying, t):
    """Rates ``(a', Z')`` and the effective kinematics ``y'`` for one wing."""
    yp = y1.copy()
    if induced:
        yp += M @ a
    n = a.size
    rhs = -(B @ a) + phi0 * yp
    for i in range(n):
        rhs[i] += C[i, 0] * Z[i, 0] + C[i, 1] * Z[i, 1]
    adot = A_inv @ rhs
    Zdot = np.empty_like(Z)
    for i in range(n):
        for k in range(2):
            if time_varying:
                Zdot[i, k] = -2.0 * decay[i, k] * Z[i, k] + (2.0 - np.exp(decay[i, k] * t)) * yp[i]
            else:
                Zdot[i, k] = -decay[i, k] * Z[i, k] + yp[i]
    return adot, Zdot, yp


@kernel
def _march(a0, Z0, y1_samples, dt, A_inv, B, C, decay, M, phi0, induced, time_varying):
    nsteps = y1_samples.shape[0] - 1
    n = a0.size
    a_out = np.empty((nsteps + 1, n))
    Z_out = np.empty((nsteps + 1, n, 2))
    yp_out = np.empty((nsteps + 1, n))
    a = a0.copy()
    Z = Z0.copy()
    for j in range(nsteps + 1):
        t = j * dt
        y_now = y1_samples[j]
        a_out[j] = a
        Z_out[j] = Z
        yp = y_now.copy()
        if induced:
            yp += M @ a
        yp_out[j] = yp
        if j == nsteps:
            break
        y_mid = 0.5 * (y_now + y1_samples[j + 1])
        k1a, k1z, _ = aero_rates(a, Z, y_now, A_inv, B, C, decay, M, phi0, induced, time_varying, t)
        k2a, k2z, _ = aero_rates(a + 0.5 * dt * k1a, Z + 0.5 * dt * k1z, y_mid, A_inv, B, C, decay, M,
                                 phi0, induced, time_varying, t + 0.5 * dt)
        k3a, k3z, _ = aero_rates(a + 0.5 * dt * k2a, Z + 0.5 * dt * k2z, y_mid, A_inv, B, C, decay, M,
                                 phi0, induced, time_varying, t + 0.5 * dt)
        k4a, k4z, _ = aero_rates(a + dt * k3a, Z + dt * k3z, y1_samples[j + 1], A_inv, B, C, decay, M,
                                 phi0, induced, time_varying, t + dt)
        a = a + dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        Z = Z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return a_out, Z_out, yp_out


def circulation(a, theta):
    """``Gamma = sum_k a_k sin(k theta)``; ``theta`` may be an array."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    theta = np.asarray(theta, dtype=float)
    k = np.arange(1, a.size + 1)
    return np.sin(np.multiply.outer(theta, k)) @ a


def induced_kinematics(a, geom):
    """Circulation-induced normal flow at every strip."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    sin_th = np.sin(geom.theta)
    if np.any(sin_th <= 0):
        raise ValueError("strip at theta = 0 makes the induced kinematics singular")
    k = np.arange(1, a.size + 1)
    M = np.sin(np.outer(geom.theta, k)) / sin_th[:, None]
    M[:, 0] = 1.0
    return M @ a


def wagner(tau, chord=1.0, coeffs=WagnerCoefficients()):
    """Indicial kernel ``Phi(tau)``; decreases monotonically to zero."""
    if chord <= 0:
        raise ValueError("chord must be positive")
    tau = np.asarray(tau, dtype=float)
    return (coeffs.psi1 * np.exp(-coeffs.eps1 / chord * tau)
            + coeffs.psi2 * np.exp(-coeffs.eps2 / chord * tau))


def beta_from_states(yprime, Z_i, chord, coeffs=WagnerCoefficients()):
    """Force-coefficient response of one strip from its memory states."""
    z1, z2 = Z_i
    return (yprime * coeffs.phi0 + coeffs.psi1 * coeffs.eps1 / chord * z1
            + coeffs.psi2 * coeffs.eps2 / chord * z2)


def beta_all(yprime, Z, geom, coeffs=WagnerCoefficients()):
    Z = np.asarray(Z, dtype=float)
    gains = np.outer(1.0 / geom.chords, coeffs.psi * coeffs.eps)
    return coeffs.phi0 * np.asarray(yprime) + np.sum(gains * Z, axis=-1)


def aero_derivative(state, y1, geom, coeffs=WagnerCoefficients(), t=0.0, formulation=STANDARD,
                    induced=True, system=None):
    """Time derivative of the aerodynamic state of one wing.

    Args:
        state: :class:`AeroState` with ``n`` modes (``n == geom.n``).
        y1: raw normal-flow kinematics per strip; the circulation-induced part
            is added when ``induced`` is true.
        t: time since the start of the march (only used by ``time-varying``).
        system: optional pre-assembled :class:`AeroSystem`.

    Returns:
        ``(rate, yprime)`` where ``rate`` is an :class:`AeroState` of derivatives.
    """
    if state.a.size != geom.n:
        raise ValueError(f"state has {state.a.size} modes but geometry has {geom.n} strips")
    sys_ = system if system is not None else assemble(geom, coeffs, formulation)
    y1 = np.broadcast_to(np.asarray(y1, dtype=float), (geom.n,)).copy()
    adot, Zdot, yp = aero_rates(np.asarray(state.a, dtype=float), np.asarray(state.Z, dtype=float), y1,
                                sys_.A_inv, sys_.B, sys_.C, sys_.decay, sys_.M, sys_.phi0,
                                bool(induced), sys_.time_varying, float(t))
    return AeroState(adot, Zdot), yp


@dataclass
class AeroTrajectory:
    t: np.ndarray
    a: np.ndarray
    Z: np.ndarray
    yprime: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


def march(geom, y1, duration, dt, coeffs=WagnerCoefficients(), formulation=STANDARD, induced=True,
          initial=None):
    """RK4 march of one wing's aerodynamic state.

    ``y1`` is either a constant per-strip vector (step input applied at
    ``t = 0``) or a callable ``y1(t) -> (n,)``.
    """
    sys_ = assemble(geom, coeffs, formulation)
    nsteps = int(round(duration / dt))
    t = np.arange(nsteps + 1) * dt
    if callable(y1):
        samples = np.array([np.broadcast_to(y1(tk), (geom.n,)) for tk in t], dtype=float)
    else:
        samples = np.tile(np.broadcast_to(np.asarray(y1, dtype=float), (geom.n,)), (nsteps + 1, 1))
    x0 = initial if initial is not None else AeroState.zeros(geom.n)
    a, Z, yp = _march(np.asarray(x0.a, dtype=float), np.asarray(x0.Z, dtype=float), samples, float(dt),
                      sys_.A_inv, sys_.B, sys_.C, sys_.decay, sys_.M, sys_.phi0, bool(induced),
                      sys_.time_varying)
    beta = beta_all(yp, Z, geom, coeffs)
    gamma = a @ sys_.A.T
    return AeroTrajectory(t, a, Z, yp, beta, gamma)


def duhamel_oracle(times, yprime, chord, coeffs=WagnerCoefficients(), t=None):
    """Brute-force Duhamel response by trapezoidal quadrature.

    Evaluates ``beta(t) = y'(t) Phi(0) + int_0^t d/dtau[Phi(t - tau)] y'(tau) dtau``
    directly from sampled ``y'``. The kernel derivative is taken by central
    differences of :func:`wagner`, so no state-space coefficient enters.

    Args:
        times: increasing sample times starting at 0.
        yprime: samples of the effective kinematics at ``times``.
        t: query time(s); defaults to the last sample.
    """
    times = np.asarray(times, dtype=float)
    yprime = np.asarray(yprime, dtype=float)
    if times.size == 0 or yprime.size == 0:
        raise ValueError("empty kinematics history")
    if times.shape != yprime.shape:
        raise ValueError("times and yprime must have the same shape")
    queries = np.atleast_1d(times[-1] if t is None else np.asarray(t, dtype=float))
    h = 1e-6 * max(chord, 1e-3)
    out = np.empty(queries.size)
    for j, tq in enumerate(queries):
        if tq < times[0] or tq > times[-1] + 1e-12:
            raise ValueError(f"query time {tq} outside the sampled history")
        mask = times < tq - 1e-12
        tau = np.append(times[mask], tq)
        y_tau = np.append(yprime[mask], np.interp(tq, times, yprime))
        lag = tq - tau
        # d/dtau Phi(t - tau) = -Phi'(t - tau); the kernel formula extends smoothly to lag < 0
        dphi = -(wagner(lag + h, chord, coeffs) - wagner(lag - h, chord, coeffs)) / (2 * h)
        integral = np.trapezoid(dphi * y_tau, tau) if tau.size > 1 else 0.0
        out[j] = y_tau[-1] * wagner(0.0, chord, coeffs) + integral
    return out if np.ndim(t) else out[0]


def strip_force(gamma, u_rel, span_axis, width, rho=1.225, chord=0.0, drag_coeff=0.0):
    """Kutta-Joukowski strip force with optional profile drag.

    Lift is ``rho * width * gamma * (U_p x e)`` where ``U_p`` is the air
    velocity relative to the strip with its spanwise component removed and
    ``e`` the unit span axis; its magnitude is ``rho |U_p| gamma width`` and it
    is perpendicular to the flow. Drag acts along ``U_p``. Zero in-plane flow
    gives zero force.
    """
    u = np.asarray(u_rel, dtype=float)
    e = np.asarray(span_axis, dtype=float)
    e = e / np.linalg.norm(e)
    up = u - np.dot(u, e) * e
    speed = np.linalg.norm(up)
    if speed == 0.0:
        return np.zeros(3)
    force = rho * width * gamma * np.cross(up, e)
    if drag_coeff:
        force = force + 0.5 * rho * drag_coeff * chord * width * speed * up
    return force
