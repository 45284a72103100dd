"""Aerobat reduced-order dynamics relative to the guard.

Mass model: a body point mass hanging below the band attachment point plus
one lumped point mass per wing at mid-span. Coordinates are

* ``q_u = [p_A (3), alpha3, alpha4]`` -- attachment-point position (world)
  and body orientation ``R_A = Rx(alpha3) @ Ry(alpha4)``; unactuated.
* ``a = [a1, a2]`` -- prescribed wing joints (flap stroke, distal fold);
  shared by both wings by symmetry.

Bands are zero-rest-length linear springs from guard-frame corners ``c_i`` to
body-frame attachment points ``b_i`` around ``p_A``. With band vectors
``delta_i = p_G + R_G c_i - p_A - R_A b_i`` and stiffness shares ``k_i = K w_i``
the band energy is ``sum k_i/2 (|delta_i|^2 - |c_i - b_i|^2)``, which is
``K/2 |d|^2`` with ``d = p_G - p_A`` whenever both frames are level and the
weighted corners and attachments are centred. Spread attachments add the
rotational stiffness that keeps the body from tumbling under the wing
reaction loads. Optional band damping acts along the band velocities.

Partitioned equations use the sign convention

    [p_A'', q_A''] = -D_u^{-1} (D_ua a'' - H_u + J^T y)

with ``H_u = -(C(q, q') q' + G(q))_u`` and ``y`` the strip loads as reactions
(force of the wing on the air), i.e. ``y = -F_aero``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from aerobat_guard._accel import kernel
from aerobat_guard._linalg import add_gram, matmul, matvec, tmatvec
from aerobat_guard.guard import GRAVITY
from aerobat_guard.spatial import cross3, rot_x, rot_y

NQ = 5


def _default_corners():
    return np.array([[0.1, 0.1, 0.0], [-0.1, 0.1, 0.0], [-0.1, -0.1, 0.0], [0.1, -0.1, 0.0]])


def _default_attachments():
    return 0.2 * _default_corners()


@dataclass(frozen=True)
class ElasticParams:
    """Band stiffness ``K`` (N/m) and the Aerobat mass it carries (kg)."""

    stiffness: float = 20.0
    aerobat_mass: float = 0.040
    corners: np.ndarray = field(default_factory=_default_corners)
    weights: np.ndarray = field(default=None)
    gravity: float = GRAVITY
    attachments: np.ndarray = field(default=None)
    damping: float = 0.0

    def __post_init__(self):
        corners = np.atleast_2d(np.asarray(self.corners, dtype=float))
        att = np.zeros_like(corners) if self.attachments is None else np.atleast_2d(
            np.asarray(self.attachments, dtype=float))
        if att.shape != corners.shape:
            raise ValueError("need one body attachment point per band corner")
        object.__setattr__(self, "attachments", att)
        if corners.shape[1] != 3:
            raise ValueError("band corners must be 3-vectors")
        w = np.full(len(corners), 1.0 / len(corners)) if self.weights is None else np.asarray(self.weights, dtype=float)
        if w.shape != (len(corners),) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("band weights must be non-negative and sum to one")
        if self.stiffness <= 0 or self.aerobat_mass <= 0:
            raise ValueError("stiffness and Aerobat mass must be positive")
        if self.damping < 0:
            raise ValueError("band damping must be non-negative")
        object.__setattr__(self, "corners", corners)
        object.__setattr__(self, "weights", w)

    @property
    def anchor(self):
        """Stiffness-weighted centroid of the band corners in the guard frame."""
        return self.weights @ self.corners

    @property
    def band_stiffness(self):
        return self.stiffness * self.weights

    @property
    def band_damping(self):
        return self.damping * self.weights


@dataclass(frozen=True)
class AerobatParams:
    body_mass: float = 0.028
    body_offset: tuple = (0.0, 0.0, -0.02)
    wing_mass: float = 0.006
    wing_signs: tuple = (1.0, -1.0)
    shoulder: tuple = (-0.005, 0.01, 0.0)
    semispan: float = 0.15
    wing_point_span: float = 0.075
    fold: float = 0.03
    stiffness: float = 20.0
    corners: np.ndarray = field(default_factory=_default_corners)
    band_weights: np.ndarray = field(default=None)
    attachments: np.ndarray = field(default_factory=_default_attachments)
    band_damping: float = 0.0

    def __post_init__(self):
        if self.body_mass <= 0 or self.wing_mass < 0:
            raise ValueError("masses must be positive")
        if not 0 < self.wing_point_span <= self.semispan:
            raise ValueError("wing point must lie on the span")
        if any(abs(abs(s) - 1.0) > 0 for s in self.wing_signs):
            raise ValueError("wing signs must be +1 (left) or -1 (right)")

    @property
    def total_mass(self):
        return self.body_mass + self.wing_mass * len(self.wing_signs)

    def elastic(self, gravity=GRAVITY):
        return ElasticParams(self.stiffness, self.total_mass, self.corners, self.band_weights, gravity,
                             self.attachments, self.band_damping)


@dataclass(frozen=True)
class GaitParams:
    """Sinusoidal joint trajectories ``a_j = bias_j + amp_j sin(2 pi f t + phase_j)``."""

    frequency: float = 10.0
    amplitude: tuple = (0.0, 0.0)
    phase: float = 0.5 * np.pi
    bias: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("gait frequency must be positive")

    def as_array(self):
        return np.array([self.frequency, self.amplitude[0], self.amplitude[1], self.phase,
                         self.bias[0], self.bias[1]], dtype=float)


@dataclass
class AerobatState:
    q: np.ndarray
    qd: np.ndarray

    @property
    def position(self):
        return self.q[:3]

    @property
    def angles(self):
        return self.q[3:5]


@dataclass
class PartitionedDynamics:
    D_u: np.ndarray
    D_ua: np.ndarray
    H_u: np.ndarray


# -- kernels ---------------------------------------------------------------

@kernel
def gait_kernel(t, gait):
    f, phase = gait[0], gait[3]
    w = 2.0 * np.pi * f
    a = np.empty(2)
    ad = np.empty(2)
    add = np.empty(2)
    for j in range(2):
        ph = w * t + (phase if j == 1 else 0.0)
        amp = gait[1 + j]
        a[j] = gait[4 + j] + amp * np.sin(ph)
        ad[j] = amp * w * np.cos(ph)
        add[j] = -amp * w * w * np.sin(ph)
    return a, ad, add


@kernel
def wing_local(sign, span, a, shoulder, fold, semispan):
    """Body-frame position of a wing point at ``span`` and its joint derivatives."""
    ca, sa = np.cos(a[0]), np.sin(a[0])
    cf, sf = np.cos(a[1]), np.sin(a[1])
    shift = -fold * span / semispan
    r = np.array([shoulder[0] + shift * sf, sign * (shoulder[1] + span * ca), shoulder[2] + span * sa])
    dr = np.zeros((3, 2))
    dr[1, 0] = -sign * span * sa
    dr[2, 0] = span * ca
    dr[0, 1] = shift * cf
    ddr = np.zeros((3, 2))
    ddr[1, 0] = -sign * span * ca
    ddr[2, 0] = -span * sa
    ddr[0, 1] = -shift * sf
    return r, dr, ddr


@kernel
def body_rotation(a3, a4):
    """``Rx(a3) @ Ry(a4)``."""
    c3, s3 = np.cos(a3), np.sin(a3)
    c4, s4 = np.cos(a4), np.sin(a4)
    return np.array([[c4, 0.0, s4], [s3 * s4, c3, -s3 * c4], [-c3 * s4, s3, c3 * c4]])


@kernel
def point_kinematics(q, qd, r, dr, ddr, ad):
    """World position, velocity, Jacobian wrt ``(q_u, a)`` and bias acceleration.

    The bias term is the point acceleration with ``q_u'' = 0`` and ``a'' = 0``.
    """
    R = body_rotation(q[3], q[4])
    c3, s3 = np.cos(q[3]), np.sin(q[3])
    ax1 = np.array([1.0, 0.0, 0.0])
    ax2 = np.array([0.0, c3, s3])
    Rr = matvec(R, r)
    Rdr = matmul(R, dr)
    rdot = matvec(dr, ad)
    R_rdot = matvec(R, rdot)
    c3v = cross3(ax1, Rr)
    c4v = cross3(ax2, Rr)
    J = np.zeros((3, NQ + 2))
    for i in range(3):
        J[i, i] = 1.0
        J[i, 3] = c3v[i]
        J[i, 4] = c4v[i]
        J[i, 5] = Rdr[i, 0]
        J[i, 6] = Rdr[i, 1]
    omega = qd[3] * ax1 + qd[4] * ax2
    w_x_Rr = cross3(omega, Rr)
    x = np.empty(3)
    v = np.empty(3)
    for i in range(3):
        x[i] = q[i] + Rr[i]
        v[i] = qd[i] + w_x_Rr[i] + R_rdot[i]
    omega_dot0 = (qd[4] * qd[3]) * cross3(ax1, ax2)
    rddot0 = ddr[:, 0] * (ad[0] * ad[0]) + ddr[:, 1] * (ad[1] * ad[1])
    bias = (cross3(omega_dot0, Rr) + cross3(omega, w_x_Rr + R_rdot) + cross3(omega, R_rdot)
            + matvec(R, rddot0))
    return x, v, J, bias


@kernel
def mass_points(a, body_offset, wing_signs, shoulder, wing_span, fold, semispan):
    nw = wing_signs.size
    rs = np.zeros((nw + 1, 3))
    drs = np.zeros((nw + 1, 3, 2))
    ddrs = np.zeros((nw + 1, 3, 2))
    rs[0] = body_offset
    for w in range(nw):
        r, dr, ddr = wing_local(wing_signs[w], wing_span, a, shoulder, fold, semispan)
        rs[w + 1] = r
        drs[w + 1] = dr
        ddrs[w + 1] = ddr
    return rs, drs, ddrs


@kernel
def band_vectors(p_G, R_G, p_A, R_A, corners, attach):
    out = np.empty(corners.shape)
    for i in range(corners.shape[0]):
        out[i] = p_G + matvec(R_G, corners[i]) - p_A - matvec(R_A, attach[i])
    return out


@kernel
def rom_terms(q, qd, a, ad, masses, rs, drs, ddrs, gravity):
    """``D_u``, ``D_ua`` and the inertial/gravity part of ``H_u`` (no bands)."""
    D = np.zeros((NQ + 2, NQ + 2))
    h = np.zeros(NQ)
    for k in range(masses.size):
        _, _, J, bias = point_kinematics(q, qd, rs[k], drs[k], ddrs[k], ad)
        m = masses[k]
        add_gram(D, J, m)
        for j in range(NQ):
            h[j] += m * (J[0, j] * bias[0] + J[1, j] * bias[1] + J[2, j] * (bias[2] + gravity))
    return D[:NQ, :NQ].copy(), D[:NQ, NQ:].copy(), -h


@kernel
def band_loads(p_G, v_G, R_G, w_G, q, qd, kw, cw, corners, attach):
    """Spring-damper band loads.

    Returns:
        Force on the guard (world), moment on the guard (guard frame) and the
        generalized force on ``q_u``.
    """
    R_A = body_rotation(q[3], q[4])
    f = np.zeros(3)
    m_body = np.zeros(3)
    Q = np.zeros(NQ)
    zero = np.zeros((3, 2))
    ad = np.zeros(2)
    for i in range(kw.size):
        _, vb, Jb, _ = point_kinematics(q, qd, attach[i], zero, zero, ad)
        Rc = matvec(R_G, corners[i])
        delta = p_G + Rc - q[:3] - matvec(R_A, attach[i])
        load = kw[i] * delta
        if cw[i] != 0.0:
            load += cw[i] * (v_G + cross3(w_G, Rc) - vb)
        f -= load
        m_body -= cross3(corners[i], tmatvec(R_G, load))
        Q += tmatvec(Jb[:, :NQ], load)
    return f, m_body, Q


@kernel
def band_wrench(p_G, R_G, p_A, R_A, kw, corners, attach):
    """Band force on the guard (world) and moment about its CoM (body)."""
    dl = band_vectors(p_G, R_G, p_A, R_A, corners, attach)
    f = np.zeros(3)
    m_body = np.zeros(3)
    for i in range(kw.size):
        fi = -kw[i] * dl[i]
        f += fi
        m_body += cross3(corners[i], tmatvec(R_G, fi))
    return f, m_body


@kernel
def band_energy(p_G, R_G, p_A, R_A, kw, corners, attach):
    dl = band_vectors(p_G, R_G, p_A, R_A, corners, attach)
    E = 0.0
    for i in range(kw.size):
        rest = corners[i] - attach[i]
        E += 0.5 * kw[i] * (dl[i] @ dl[i] - rest @ rest)
    return E


# -- public operations -----------------------------------------------------

def wing_gait(t, freq, amplitude, phase=0.5 * np.pi, bias=(0.0, 0.0)):
    """Joint trajectories and their first two derivatives at time ``t``.

    ``amplitude`` is a scalar (both joints) or a pair; the distal joint lags
    the proximal one by ``phase``.
    """
    amp = np.broadcast_to(np.asarray(amplitude, dtype=float), (2,))
    g = GaitParams(freq, tuple(amp), phase, tuple(bias))
    return gait_kernel(float(t), g.as_array())


def _rot(R):
    return np.eye(3) if R is None else np.asarray(R, dtype=float)


def elastic_potential(p_G, p_A, R_G, params, R_A=None):
    """Band energy plus the lumped Aerobat gravity term ``m_A g z_A`` (J).

    Args:
        p_G: guard position (world).
        p_A: Aerobat attachment point (world).
        R_G: guard attitude (identity if None).
        params: :class:`ElasticParams`.
        R_A: Aerobat body attitude (identity if None); only matters when the
            body attachment points are spread.
    """
    p_A = np.asarray(p_A, dtype=float)
    band = band_energy(np.asarray(p_G, dtype=float), _rot(R_G), p_A, _rot(R_A), params.band_stiffness,
                       params.corners, params.attachments)
    return float(band + params.aerobat_mass * params.gravity * p_A[2])


def elastic_wrench(p_G, p_A, R_G, params, R_A=None):
    """Band force on the guard (world, N) and moment (guard body frame, N m).

    The force is ``-dV/dp_G``; the moment is the sum of the individual band
    moments about the guard centre of mass, ``-dV/dphi`` for a body-frame
    rotation increment ``phi``.
    """
    return band_wrench(np.asarray(p_G, dtype=float), _rot(R_G), np.asarray(p_A, dtype=float), _rot(R_A),
                       params.band_stiffness, params.corners, params.attachments)


def band_wrench_by_corners(p_G, p_A, R_G, params, R_A=None):
    """Per-band sum of forces and moments; reference for :func:`elastic_wrench`."""
    R_G, R_A = _rot(R_G), _rot(R_A)
    f_tot = np.zeros(3)
    m_world = np.zeros(3)
    for c, b, k in zip(params.corners, params.attachments, params.band_stiffness):
        arm = R_G @ c
        f = -k * (np.asarray(p_G) + arm - np.asarray(p_A) - R_A @ b)
        f_tot += f
        m_world += np.cross(arm, f)
    return f_tot, R_G.T @ m_world


def aerobat_kinematics(q_A):
    """Unit suspension direction ``Rx(alpha3) Ry(alpha4) [0, 0, 1]`` in the guard frame."""
    a3, a4 = (float(v) for v in q_A)
    return rot_x(a3) @ rot_y(a4) @ np.array([0.0, 0.0, 1.0])


def _points(params, a):
    return mass_points(np.asarray(a, dtype=float), np.asarray(params.body_offset, dtype=float),
                       np.asarray(params.wing_signs, dtype=float), np.asarray(params.shoulder, dtype=float),
                       float(params.wing_point_span), float(params.fold), float(params.semispan))


def point_masses(params):
    return np.array([params.body_mass] + [params.wing_mass] * len(params.wing_signs))


def partitioned_dynamics(state, a, ad, p_G, R_G, params, gravity=GRAVITY, v_G=None, w_G=None):
    """Partitioned blocks at one state; the guard velocity only enters through band damping."""
    rs, drs, ddrs = _points(params, a)
    el = params.elastic(gravity)
    q = np.asarray(state.q, dtype=float)
    qd = np.asarray(state.qd, dtype=float)
    D_u, D_ua, H_u = rom_terms(q, qd, np.asarray(a, dtype=float), np.asarray(ad, dtype=float),
                               point_masses(params), rs, drs, ddrs, float(gravity))
    v_G = np.zeros(3) if v_G is None else np.asarray(v_G, dtype=float)
    w_G = np.zeros(3) if w_G is None else np.asarray(w_G, dtype=float)
    _, _, Q = band_loads(np.asarray(p_G, dtype=float), v_G, np.asarray(R_G, dtype=float), w_G, q, qd,
                         el.band_stiffness, el.band_damping, el.corners, el.attachments)
    return PartitionedDynamics(D_u, D_ua, H_u + Q)


def aerobat_accel(dyn, add, y=None, J=None, cond_limit=1e12):
    """Unactuated accelerations ``-D_u^-1 (D_ua a'' - H_u + J^T y)``.

    Raises:
        np.linalg.LinAlgError: if ``D_u`` is numerically singular.
    """
    cond = np.linalg.cond(dyn.D_u)
    if not np.isfinite(cond) or cond > cond_limit:
        raise np.linalg.LinAlgError(f"D_u is ill-conditioned (condition number {cond:.3e})")
    rhs = dyn.D_ua @ np.asarray(add, dtype=float) - dyn.H_u
    if y is not None:
        rhs = rhs + np.asarray(J, dtype=float).T @ np.asarray(y, dtype=float)
    return -np.linalg.solve(dyn.D_u, rhs)


def kinetic_energy(state, a, ad, params):
    rs, drs, ddrs = _points(params, a)
    T = 0.0
    for m, r, dr, ddr in zip(point_masses(params), rs, drs, ddrs):
        _, v, _, _ = point_kinematics(state.q, state.qd, r, dr, ddr, np.asarray(ad, dtype=float))
        T += 0.5 * m * v @ v
    return T


def potential_energy(state, a, p_G, R_G, params, gravity=GRAVITY):
    """Per-point gravity plus band energy."""
    rs, drs, ddrs = _points(params, a)
    V = 0.0
    for m, r, dr, ddr in zip(point_masses(params), rs, drs, ddrs):
        x, _, _, _ = point_kinematics(state.q, state.qd, r, dr, ddr, np.zeros(2))
        V += m * gravity * x[2]
    el = params.elastic(gravity)
    q = np.asarray(state.q, dtype=float)
    return V + band_energy(np.asarray(p_G, float), np.asarray(R_G, float), q[:3].copy(), body_rotation(q[3], q[4]),
                           el.band_stiffness, el.corners, el.attachments)


def equilibrium(p_G, R_G, params, a=(0.0, 0.0), gravity=GRAVITY):
    """Static hanging configuration of Aerobat below the guard (wings frozen at ``a``)."""
    a = np.asarray(a, dtype=float)
    zero = np.zeros(NQ)
    sag = params.total_mass * gravity / params.stiffness
    guess = np.concatenate([np.asarray(p_G, float) + np.asarray(R_G, float) @ params.elastic().anchor
                            - np.array([0.0, 0.0, sag]), [0.0, 0.0]])

    def residual(q):
        return partitioned_dynamics(AerobatState(q, zero), a, np.zeros(2), p_G, R_G, params, gravity).H_u

    sol = optimize.root(residual, guess, tol=1e-13)
    if np.max(np.abs(residual(sol.x))) > 1e-10:
        raise RuntimeError(f"equilibrium solve failed: {sol.message}")
    return AerobatState(sol.x, zero.copy())
