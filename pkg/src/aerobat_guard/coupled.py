"""Coupled guard + Aerobat + aerodynamics right-hand side.

State vector layout (``n`` strips per wing, ``nw`` wings)::

    [0:3]   p_G        [3:6]   v_G        [6:15]  R_G (row-major)
    [15:18] omega_G    [18:23] q_u        [23:28] q_u'
    [28:]   per wing: a (n), Z (n x 2, row-major)

The elastic force reaches the guard as a world-frame vector; the scalar
``f_e`` slot of the mixer is left at zero so it is not counted twice.
"""
from collections import namedtuple

import numpy as np

from aerobat_guard import aero as aero_mod
from aerobat_guard._accel import kernel
from aerobat_guard.guard import GuardParams, guard_rates, mix_kernel
from aerobat_guard.rom import (AerobatParams, GaitParams, NQ, band_energy, band_loads, gait_kernel,
                               body_rotation, mass_points, point_kinematics, point_masses, rom_terms,
                               wing_local)
from aerobat_guard._linalg import cho_solve_spd, matvec, tmatvec
from aerobat_guard.spatial import cross3, newton_polar

GUARD_SIZE = 18
ROM_OFFSET = 18
AERO_OFFSET = 28

STATUS_OK = 0
STATUS_NONFINITE = 1

Pack = namedtuple("Pack", [
    "mass_G", "J", "J_inv", "arms", "gravity",
    "band_k", "band_c", "corners", "attach",
    "masses", "body_offset", "wing_signs", "shoulder", "wing_span", "fold", "semispan",
    "stations", "widths", "chords",
    "A", "A_inv", "B", "C", "decay", "M", "phi0", "time_varying", "induced", "aero_on",
    "rho", "drag_coeff",
])


def build_pack(guard, aerobat, geom, coeffs=aero_mod.WagnerCoefficients(), formulation=aero_mod.STANDARD,
               aero_on=True, induced=True, rho=1.225, drag_coeff=0.0):
    if abs(geom.semispan - aerobat.semispan) > 1e-12:
        raise ValueError("blade geometry semispan must match the Aerobat wing semispan")
    sys_ = aero_mod.assemble(geom, coeffs, formulation)
    el = aerobat.elastic(guard.gravity)
    f = float
    return Pack(
        f(guard.mass), guard.inertia.copy(), np.linalg.inv(guard.inertia), np.array(guard.arms, dtype=float),
        f(guard.gravity),
        el.band_stiffness.copy(), el.band_damping.copy(), el.corners.copy(), el.attachments.copy(),
        point_masses(aerobat), np.array(aerobat.body_offset, dtype=float),
        np.array(aerobat.wing_signs, dtype=float), np.array(aerobat.shoulder, dtype=float),
        f(aerobat.wing_point_span), f(aerobat.fold), f(aerobat.semispan),
        geom.stations.copy(), geom.widths.copy(), geom.chords.copy(),
        sys_.A.copy(), sys_.A_inv.copy(), sys_.B.copy(), sys_.C.copy(), sys_.decay.copy(), sys_.M.copy(),
        f(sys_.phi0), bool(sys_.time_varying), bool(induced), bool(aero_on),
        f(rho), f(drag_coeff),
    )


def state_size(pack):
    return AERO_OFFSET + 3 * pack.stations.size * pack.wing_signs.size


@kernel
def strip_loads(q, qd, a, ad, wind, x, P):
    """Generalized aero force on ``q_u``, aero state rates and the net aero force.

    ``x`` is the full state (only the aero block is read).
    """
    n = P.stations.size
    nw = P.wing_signs.size
    Q = np.zeros(NQ)
    F_total = np.zeros(3)
    rates = np.zeros(3 * n * nw)
    Rb = body_rotation(q[3], q[4])
    ca, sa = np.cos(a[0]), np.sin(a[0])
    e_c = Rb[:, 0].copy()
    for w in range(nw):
        sign = P.wing_signs[w]
        base = AERO_OFFSET + 3 * n * w
        coef = x[base:base + n].copy()
        Z = x[base + n:base + 3 * n].copy().reshape((n, 2))
        y1 = np.zeros(n)
        U_all = np.zeros((n, 3))
        span_all = np.zeros((n, 3))
        J_all = np.zeros((n, 3, NQ + 2))
        for i in range(n):
            r, dr, ddr = wing_local(sign, P.stations[i], a, P.shoulder, P.fold, P.semispan)
            _, v, J, _ = point_kinematics(q, qd, r, dr, ddr, ad)
            J_all[i] = J
            e_s = matvec(Rb, np.array([0.0, sign * ca, sa]))
            e_n = sign * cross3(e_c, e_s)
            U = wind - v
            U_all[i] = U
            span_all[i] = -sign * e_s
            y1[i] = U @ e_n
        adot, Zdot, _ = aero_mod.aero_rates(coef, Z, y1, P.A_inv, P.B, P.C, P.decay, P.M, P.phi0,
                                            P.induced, P.time_varying, 0.0)
        rates[3 * n * w:3 * n * w + n] = adot
        rates[3 * n * w + n:3 * n * (w + 1)] = Zdot.reshape(2 * n)
        gamma = matvec(P.A, coef)
        for i in range(n):
            e = span_all[i]
            U = U_all[i]
            up = U - (U @ e) * e
            speed = np.sqrt(up @ up)
            if speed == 0.0:
                continue
            F = P.rho * P.widths[i] * gamma[i] * cross3(up, e)
            if P.drag_coeff != 0.0:
                F += 0.5 * P.rho * P.drag_coeff * P.chords[i] * P.widths[i] * speed * up
            F_total += F
            Q += tmatvec(J_all[i][:, :NQ], F)
    return Q, rates, F_total


@kernel
def coupled_rates(t, x, thrusts, f_dist, wind, gait, P):
    dx = np.zeros(x.size)
    p_G = x[0:3].copy()
    v_G = x[3:6].copy()
    R_G = x[6:15].copy().reshape((3, 3))
    w_G = x[15:18].copy()
    q = x[18:23].copy()
    qd = x[23:28].copy()
    a, ad, add = gait_kernel(t, gait)

    f_e, m_e, Q_e = band_loads(p_G, v_G, R_G, w_G, q, qd, P.band_k, P.band_c, P.corners, P.attach)
    f_coll, m = mix_kernel(thrusts, P.arms, 0.0, m_e)
    F = R_G[:, 2] * f_coll + f_e + f_dist
    acc, Rdot, wdot = guard_rates(v_G, R_G, w_G, F, m, P.mass_G, P.J, P.J_inv, P.gravity)
    dx[0:3] = v_G
    dx[3:6] = acc
    dx[6:15] = Rdot.reshape(9)
    dx[15:18] = wdot

    rs, drs, ddrs = mass_points(a, P.body_offset, P.wing_signs, P.shoulder, P.wing_span, P.fold, P.semispan)
    D_u, D_ua, H_u = rom_terms(q, qd, a, ad, P.masses, rs, drs, ddrs, P.gravity)
    rhs = matvec(D_ua, add) - H_u - Q_e
    if P.aero_on:
        Q, rates, _ = strip_loads(q, qd, a, ad, wind, x, P)
        # y = -F_aero, so J^T y = -Q
        rhs -= Q
        dx[AERO_OFFSET:] = rates
    qdd = -cho_solve_spd(D_u, rhs)
    dx[18:23] = qd
    dx[23:28] = qdd
    return dx


@kernel
def advance(x0, t0, dt, nsteps, thrusts, f_dist, wind, gait, P):
    """``nsteps`` RK4 steps with the guard rotation reprojected after each step."""
    x = x0.copy()
    for k in range(nsteps):
        t = t0 + k * dt
        k1 = coupled_rates(t, x, thrusts, f_dist, wind, gait, P)
        k2 = coupled_rates(t + 0.5 * dt, x + 0.5 * dt * k1, thrusts, f_dist, wind, gait, P)
        k3 = coupled_rates(t + 0.5 * dt, x + 0.5 * dt * k2, thrusts, f_dist, wind, gait, P)
        k4 = coupled_rates(t + dt, x + dt * k3, thrusts, f_dist, wind, gait, P)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        R = newton_polar(x[6:15].copy().reshape((3, 3)), 2)
        x[6:15] = R.reshape(9)
        if not np.all(np.isfinite(x)):
            return x, k + 1, STATUS_NONFINITE
    return x, nsteps, STATUS_OK


@kernel
def total_energy(t, x, gait, P):
    """Mechanical energy of guard + Aerobat (thrust and aero excluded)."""
    p_G = x[0:3].copy()
    v_G = x[3:6].copy()
    R_G = x[6:15].copy().reshape((3, 3))
    w_G = x[15:18].copy()
    q = x[18:23].copy()
    qd = x[23:28].copy()
    a, ad, _ = gait_kernel(t, gait)
    E = 0.5 * P.mass_G * (v_G @ v_G) + 0.5 * (w_G @ matvec(P.J, w_G)) + P.mass_G * P.gravity * p_G[2]
    rs, drs, ddrs = mass_points(a, P.body_offset, P.wing_signs, P.shoulder, P.wing_span, P.fold, P.semispan)
    for k in range(P.masses.size):
        xk, vk, _, _ = point_kinematics(q, qd, rs[k], drs[k], ddrs[k], ad)
        E += 0.5 * P.masses[k] * (vk @ vk) + P.masses[k] * P.gravity * xk[2]
    E += band_energy(p_G, R_G, q[:3].copy(), body_rotation(q[3], q[4]), P.band_k, P.corners, P.attach)
    return E


def initial_state(pack, p_G=(0.0, 0.0, 0.0), R_G=None, aerobat_q=None):
    x = np.zeros(state_size(pack))
    x[0:3] = p_G
    x[6:15] = (np.eye(3) if R_G is None else np.asarray(R_G, float)).ravel()
    if aerobat_q is not None:
        x[18:23] = aerobat_q
    return x


def net_aero_force(t, x, wind, gait, pack):
    q = x[18:23].copy()
    qd = x[23:28].copy()
    a, ad, _ = gait_kernel(float(t), gait)
    _, _, F = strip_loads(q, qd, a, ad, np.asarray(wind, dtype=float), x, pack)
    return F


__all__ = ["Pack", "build_pack", "state_size", "coupled_rates", "advance", "total_energy", "initial_state",
           "strip_loads", "net_aero_force", "GuardParams", "AerobatParams", "GaitParams"]
