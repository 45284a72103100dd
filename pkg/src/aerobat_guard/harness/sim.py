"""Multirate closed-loop run: physics, mocap link, observer + controller, command link, PWM."""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from aerobat_guard import aero, control, coupled, rom, telemetry
from aerobat_guard.guard import GuardParams, mixer_matrix
from aerobat_guard.harness.integrate import SimClock
from aerobat_guard.spatial import (euler_to_rotation, orthonormality_error, quat_to_rotation, rotation_to_euler,
                                   rotation_to_quat)

_AX = ("x", "y", "z")
COLUMNS = (
    ["t"] + [f"p_{a}" for a in _AX] + ["roll", "pitch", "yaw"] + [f"v_{a}" for a in _AX]
    + [f"sp_{a}" for a in _AX]
    + [f"xh{k}_{i}" for k in (1, 2, 3) for i in range(6)]
    + [f"f{i}" for i in range(1, 7)] + ["cmd_roll", "cmd_pitch", "cmd_yaw", "saturated"]
    + [f"gen_inertial_{i}" for i in range(6)] + [f"gen_aero_{i}" for i in range(6)]
    + [f"pa_{a}" for a in _AX] + ["alpha3", "alpha4", "diverged"]
)


class DivergenceError(RuntimeError):
    pass


@dataclass
class RunLog:
    columns: list
    rows: np.ndarray
    diverged: bool = False
    reason: str = ""
    counts: dict = field(default_factory=dict)
    max_orthonormality_error: float = 0.0

    def column(self, name):
        return self.rows[:, self.columns.index(name)]

    def positions(self):
        return self.rows[:, [self.columns.index(f"p_{a}") for a in _AX]]

    def setpoints(self):
        return self.rows[:, [self.columns.index(f"sp_{a}") for a in _AX]]


def build_models(sc):
    """Physical parameter objects, the coupled-model pack and the gait vector."""
    g = sc.guard
    gp = GuardParams(g.mass, np.diag(g.inertia), tuple(g.arms), g.gravity, g.f_max)
    a = sc.aerobat
    ap = rom.AerobatParams(body_mass=a.body_mass, wing_mass=a.wing_mass, stiffness=a.stiffness,
                           semispan=sc.aero.semispan, wing_point_span=a.wing_point_span, fold=a.fold,
                           band_damping=a.band_damping, shoulder=tuple(a.shoulder))
    geom = aero.BladeGeometry.uniform_theta(sc.aero.strips, semispan=sc.aero.semispan,
                                            root_chord=sc.aero.root_chord)
    pack = coupled.build_pack(gp, ap, geom, formulation=sc.aero.formulation, aero_on=sc.aero.enabled,
                              induced=sc.aero.induced, rho=sc.aero.rho, drag_coeff=sc.aero.drag_coeff)
    gait = rom.GaitParams(sc.gait.frequency, tuple(sc.gait.amplitude), sc.gait.phase, tuple(sc.gait.bias))
    return gp, ap, pack, gait.as_array()


def initial_state(sc, gp, ap, pack, gait):
    R0 = euler_to_rotation(sc.initial_attitude)
    p0 = np.array(sc.initial_position, dtype=float)
    a0, _, _ = rom.gait_kernel(0.0, gait)
    eq = rom.equilibrium(p0, R0, ap, a=a0, gravity=gp.gravity)
    return coupled.initial_state(pack, p0, R0, eq.q)


def disturbance_force(sc, t):
    F = np.zeros(3)
    for d in sc.disturbances:
        if d.start <= t < d.stop:
            s = math.sin(2.0 * math.pi * d.frequency * (t - d.start)) if d.frequency > 0 else 1.0
            F += s * np.asarray(d.force, dtype=float)
    return F


def _position_gains(sc):
    c = sc.controller
    if c.position_gains is not None:
        return tuple(control.PidGains(*row, max_i=c.max_i) for row in c.position_gains)
    return control.preset_gains(c.preset, max_i=c.max_i)


class _Controller:
    """Flight-computer side: observer, position/attitude loops and allocation."""

    def __init__(self, sc, gp, ap):
        self.sc = sc
        self.gp = gp
        c = sc.controller
        ff = c.observer_feedforward
        self.params = control.CascadeParams(
            position=_position_gains(sc), position_scale=c.position_scale, max_tilt=c.max_tilt,
            mass=gp.mass if ff else gp.mass + ap.total_mass, gravity=gp.gravity, arms=tuple(gp.arms),
            f_max=gp.f_max)
        self.state = control.CascadeState.fresh(self.params)
        _, g2, g3 = control.guard_model_terms(gp)
        self.gains = control.ObserverGains.from_bandwidth(sc.observer.bandwidth, np.diag(g3))
        _, absc = control.observer_error_matrix(self.gains, g3)
        if absc >= 0:
            raise DivergenceError(f"observer gains are not Hurwitz (abscissa {absc:.3g})")
        self.dt = 1.0 / sc.rates.control
        self.est = None
        self.prev_pos = None
        self.command = control.hover_trim(gp.mass + ap.total_mass, gp.gravity)
        self.att_ref = np.array([0.0, 0.0, sc.yaw_ref])
        self.saturated = False
        self.gen_inertial = np.zeros(6)
        self.gen_aero = np.zeros(6)

    def _generalized_input(self, R, thrusts):
        w = mixer_matrix(self.gp.arms) @ thrusts
        return np.concatenate([R[:, 2] * w[0], w[1:]])

    def step(self, pose, gyro):
        pos = np.array(pose[:3])
        R = quat_to_rotation(pose[3:])
        euler = rotation_to_euler(R)
        x1 = np.concatenate([pos, euler])
        g1, g2, g3 = control.guard_model_terms(self.gp, gyro)
        if self.est is None:
            self.est = control.ExtendedState(x1, np.zeros(6), np.zeros(6))
        u = self._generalized_input(R, self.command)
        self.est = control.observer_step(self.est, x1, u, g1, g2, g3, self.gains, self.dt)
        g2_inv = np.linalg.inv(g2)
        self.gen_inertial = g2_inv @ g1
        self.gen_aero = g2_inv @ (g3 @ self.est.x3)

        c = self.sc.controller
        if c.velocity_source == "observer":
            vel = self.est.x2[:3]
        else:
            vel = np.zeros(3) if self.prev_pos is None else (pos - self.prev_pos) / self.dt
        self.prev_pos = pos
        if c.mode == "cascade":
            offset = self.est.x3[:3] if c.observer_feedforward else None
            out = control.cascade(self.state, self.params, pos, vel, euler, gyro, self.sc.setpoint,
                                  self.sc.yaw_ref, self.dt, force_offset=offset)
            thrusts, self.att_ref, self.saturated = out.thrusts, out.attitude_ref, out.saturated
        else:
            thrusts = self._cancelling(pos, euler, g1, g2, g3)
        self.command = thrusts
        return telemetry.CommandPacket(*self.att_ref, tuple(thrusts))

    def _cancelling(self, pos, euler, g1, g2, g3):
        c = self.sc.controller
        Kp = np.asarray(c.cancel_position_gain)
        Kv = np.asarray(c.cancel_velocity_gain)
        t, r = slice(0, 3), slice(3, 6)
        x2 = self.est.x2.copy()
        F = control.control_law(x2[t], self.est.x3[t], g1[t], g2[t, t], g3[t, t], Kv[t],
                                x1=pos, x1_ref=self.sc.setpoint, K_p=Kp[t])
        self.att_ref = control.tilt_from_force(F, euler[2], self.sc.yaw_ref, c.max_tilt)
        ang_err_ref = euler + control.wrap_angle(self.att_ref - euler)
        m = control.control_law(x2[r], self.est.x3[r], g1[r], g2[r, r], g3[r, r], Kv[r],
                                x1=euler, x1_ref=ang_err_ref, K_p=Kp[r])
        collective = float(F @ euler_to_rotation(euler)[:, 2])
        thrusts, self.saturated = control.allocate(collective, m, self.gp.arms, self.gp.f_max)
        return thrusts


def run(sc):
    """Simulate a scenario; never raises on divergence (the log is flagged instead).

    Raises:
        DivergenceError: only for configurations that are unstable by
            construction (non-Hurwitz observer gains).
    """
    sc.validate()
    gp, ap, pack, gait = build_models(sc)
    x = initial_state(sc, gp, ap, pack, gait)
    periods = sc.periods()
    periods["log"] = sc.decimation()
    clock = SimClock(sc.dt, periods)
    total = sc.total_ticks()

    seeds = np.random.SeedSequence(sc.seed).spawn(3)
    noise_rng = np.random.default_rng(seeds[0])
    mocap = telemetry.Link(sc.links.mocap.model(), seeds[1])
    cmd_link = telemetry.Link(sc.links.command.model(), seeds[2])
    ctrl = _Controller(sc, gp, ap)

    applied = telemetry.quantize_pwm(ctrl.command, gp.f_max)
    pending = applied.copy()
    latest_pose = None
    gyro = np.zeros(3)
    wind = np.asarray(sc.wind, dtype=float)
    rows = []
    max_orth = 0.0
    diverged, reason = False, ""
    counts = {"mocap_sent": 0, "mocap_delivered": 0, "control": 0, "pwm": 0, "commands_delivered": 0}

    def log_row(flag):
        R = x[6:15].reshape(3, 3)
        est = ctrl.est if ctrl.est is not None else control.ExtendedState.zeros()
        rows.append(np.concatenate([
            [clock.t], x[0:3], rotation_to_euler(R), x[3:6], sc.setpoint, est.x1, est.x2, est.x3,
            applied, ctrl.att_ref, [float(ctrl.saturated)], ctrl.gen_inertial, ctrl.gen_aero,
            x[18:23], [float(flag)]]))

    while True:
        t = clock.t
        if clock.fire("mocap"):
            R = x[6:15].reshape(3, 3)
            pos = x[0:3] + sc.noise.position * noise_rng.standard_normal(3)
            Rn = R @ euler_to_rotation(sc.noise.attitude * noise_rng.standard_normal(3))
            pkt = telemetry.PosePacket(*pos, *rotation_to_quat(Rn))
            mocap.send(telemetry.encode_pose(pkt), t)
            counts["mocap_sent"] += 1
        for d in mocap.receive(t):
            p = telemetry.decode_pose(d.payload)
            latest_pose = p.as_tuple()
            counts["mocap_delivered"] += 1
        if clock.fire("imu"):
            gyro = x[15:18] + sc.noise.gyro * noise_rng.standard_normal(3)
        if clock.fire("control"):
            if latest_pose is not None:
                cmd = ctrl.step(latest_pose, gyro)
                cmd_link.send(telemetry.encode_command(cmd), t)
            counts["control"] += 1
        for d in cmd_link.receive(t):
            pending = np.array(telemetry.decode_command(d.payload).thrusts)
            counts["commands_delivered"] += 1
        if clock.fire("pwm"):
            applied = telemetry.quantize_pwm(pending, gp.f_max)
            counts["pwm"] += 1
        if clock.fire("log"):
            max_orth = max(max_orth, orthonormality_error(x[6:15].reshape(3, 3)))
            log_row(False)
        if clock.tick >= total:
            break

        nxt = min([clock.next_tick(k) for k in periods] + [total])
        for link in (mocap, cmd_link):
            if link.queue:
                nxt = min(nxt, max(clock.tick + 1, math.ceil(link.queue[0].deliver_time / sc.dt - 1e-9)))
        x_new, _, status = coupled.advance(x, t, sc.dt, nxt - clock.tick, applied, disturbance_force(sc, t),
                                           wind, gait, pack)
        clock.advance_to(nxt)
        if status != coupled.STATUS_OK:
            diverged, reason = True, f"non-finite state at t={clock.t:.6f}"
        elif np.linalg.norm(x_new[0:3]) > sc.divergence_bound or np.linalg.norm(x_new[18:21]) > sc.divergence_bound:
            diverged, reason = True, f"state left the {sc.divergence_bound} m bound at t={clock.t:.6f}"
        if diverged:
            x = np.where(np.isfinite(x_new), x_new, x)
            log_row(True)
            break
        x = x_new

    counts.update({f"ticks_{k}": v for k, v in clock.counts.items()})
    return RunLog(list(COLUMNS), np.array(rows), diverged, reason, counts, max_orth)


# -- CSV ---------------------------------------------------------------------

def format_log(log):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(log.columns)
    for row in log.rows:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_log(path, log):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_log(log))


def read_log(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty log") from None
        rows = [[float(v) for v in r] for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: log has no samples")
    data = np.array(rows)
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    diverged = "diverged" in header and bool(data[-1, header.index("diverged")])
    return RunLog(header, data, diverged)
