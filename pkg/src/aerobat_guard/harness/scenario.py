"""Scenario configuration: typed sections, YAML load/save, schema errors with key path and line.

Every section is a dataclass; a field without a default is a required key.
Lists in YAML become tuples, and fixed-length tuple defaults fix the length.
"""
import dataclasses
import math
import typing
from dataclasses import dataclass, field

import yaml

from aerobat_guard import control
from aerobat_guard.telemetry import LinkModel

DEFAULT_DT = 1.0 / 12000.0


class ScenarioError(ValueError):
    """Schema or value error in a scenario, located by key path and source line."""

    def __init__(self, path, message, line=None, source=None):
        self.path = path
        self.line = line
        self.reason = message
        where = f"{source or '<scenario>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {path or '<root>'}: {message}")


@dataclass(frozen=True)
class GuardSection:
    mass: float = 0.20
    inertia: tuple = (2.2e-3, 2.2e-3, 4.0e-3)
    arms: tuple = (0.15, 0.15, 0.15)
    f_max: float = 0.6
    gravity: float = 9.8


@dataclass(frozen=True)
class AerobatSection:
    body_mass: float = 0.028
    wing_mass: float = 0.006
    stiffness: float = 20.0
    wing_point_span: float = 0.075
    fold: float = 0.03
    shoulder: tuple = (-0.005, 0.01, 0.0)
    band_damping: float = 0.5


@dataclass(frozen=True)
class AeroSection:
    enabled: bool = True
    strips: int = 4
    formulation: str = "standard"
    induced: bool = True
    rho: float = 1.225
    drag_coeff: float = 0.0
    semispan: float = 0.15
    root_chord: float = 0.06


@dataclass(frozen=True)
class GaitSection:
    frequency: float = 10.0
    amplitude: tuple = (0.0, 0.0)
    phase: float = 0.5 * math.pi
    bias: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class ControllerSection:
    mode: str = "cascade"
    preset: str = "test1"
    position_gains: typing.Optional[tuple] = None
    max_i: float = 5.0
    position_scale: float = 0.1
    max_tilt: float = 0.35
    velocity_source: str = "observer"
    observer_feedforward: bool = False
    cancel_position_gain: tuple = (-9.0, -9.0, -9.0, -225.0, -225.0, -100.0)
    cancel_velocity_gain: tuple = (-6.0, -6.0, -6.0, -24.0, -24.0, -16.0)


@dataclass(frozen=True)
class ObserverSection:
    G_bound: float
    bandwidth: float = 20.0


@dataclass(frozen=True)
class LinkSection:
    rate: float
    latency: float = 0.0
    jitter: float = 0.0
    drop: float = 0.0

    def model(self):
        return LinkModel(self.rate, self.latency, self.jitter, self.drop)


def _mocap_link():
    return LinkSection(rate=240.0, latency=2.8e-3)


def _command_link():
    return LinkSection(rate=200.0, latency=2.0e-3)


@dataclass(frozen=True)
class LinksSection:
    mocap: LinkSection = field(default_factory=_mocap_link)
    command: LinkSection = field(default_factory=_command_link)


@dataclass(frozen=True)
class RatesSection:
    control: float = 200.0
    imu: float = 200.0
    pwm: float = 50.0


@dataclass(frozen=True)
class NoiseSection:
    position: float = 0.0
    attitude: float = 0.0
    gyro: float = 0.0


@dataclass(frozen=True)
class Disturbance:
    """World force on the guard over ``[start, stop)``; sinusoidal if ``frequency > 0``."""

    start: float
    stop: float
    force: tuple = (0.0, 0.0, 0.0)
    frequency: float = 0.0


@dataclass(frozen=True)
class Scenario:
    duration: float
    observer: ObserverSection
    name: str = "scenario"
    dt: float = DEFAULT_DT
    seed: int = 0
    setpoint: tuple = (0.0, 0.0, 0.2)
    yaw_ref: float = 0.0
    initial_position: tuple = (0.0, 0.0, 0.2)
    initial_attitude: tuple = (0.0, 0.0, 0.0)
    wind: tuple = (0.0, 0.0, 0.0)
    log_decimation: int = 0
    divergence_bound: float = 50.0
    guard: GuardSection = field(default_factory=GuardSection)
    aerobat: AerobatSection = field(default_factory=AerobatSection)
    aero: AeroSection = field(default_factory=AeroSection)
    gait: GaitSection = field(default_factory=GaitSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    links: LinksSection = field(default_factory=LinksSection)
    rates: RatesSection = field(default_factory=RatesSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    disturbances: tuple = ()

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return _to_plain(self)

    def periods(self):
        """Loop periods in base ticks: ``{mocap, control, imu, pwm}``."""
        return {k: _ticks(self.dt, 1.0 / r, k) for k, r in
                (("mocap", self.links.mocap.rate), ("control", self.rates.control),
                 ("imu", self.rates.imu), ("pwm", self.rates.pwm))}

    def total_ticks(self):
        return _ticks(self.dt, self.duration, "duration")

    def decimation(self):
        return self.log_decimation or self.periods()["control"]

    def validate(self):
        if not self.dt > 0:
            raise ScenarioError("dt", "must be positive")
        if not self.duration > 0:
            raise ScenarioError("duration", "must be positive")
        self.periods()
        self.total_ticks()
        if self.log_decimation < 0:
            raise ScenarioError("log_decimation", "must be non-negative")
        c = self.controller
        if c.mode not in ("cascade", "cancelling"):
            raise ScenarioError("controller.mode", f"unknown mode {c.mode!r}")
        if c.velocity_source not in ("observer", "mocap"):
            raise ScenarioError("controller.velocity_source", f"unknown source {c.velocity_source!r}")
        if c.position_gains is None and c.preset not in control.GAIN_PRESETS:
            raise ScenarioError("controller.preset", f"unknown preset {c.preset!r}")
        if c.position_gains is not None and (len(c.position_gains) != 3
                                             or any(len(r) != 3 for r in c.position_gains)):
            raise ScenarioError("controller.position_gains", "expected three [kp, ki, kd] rows")
        if self.aero.formulation not in ("standard", "time-varying"):
            raise ScenarioError("aero.formulation", f"unknown formulation {self.aero.formulation!r}")
        if self.aero.strips < 1:
            raise ScenarioError("aero.strips", "need at least one strip")
        if not self.observer.G_bound >= 0:
            raise ScenarioError("observer.G_bound", "must be non-negative")
        if not self.observer.bandwidth > 0:
            raise ScenarioError("observer.bandwidth", "must be positive")
        for i, d in enumerate(self.disturbances):
            if not d.stop >= d.start:
                raise ScenarioError(f"disturbances[{i}]", "stop precedes start")
        for name in ("mocap", "command"):
            try:
                getattr(self.links, name).model()
            except ValueError as e:
                raise ScenarioError(f"links.{name}", str(e)) from None
        return self


def _ticks(dt, period, name, tol=1e-9):
    n = period / dt
    k = int(round(n))
    if k < 1 or abs(n - k) > tol * max(1.0, n):
        raise ScenarioError("dt", f"dt={dt!r} does not divide the {name} period {period!r}")
    return k


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


# -- YAML -> dataclasses -----------------------------------------------------

def _line_map(node, path="", out=None):
    """Source line (1-based) for every key path in a composed YAML tree."""
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            sub = f"{path}.{k.value}" if path else str(k.value)
            out[sub] = k.start_mark.line + 1
            _line_map(v, sub, out)
            out[sub] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, f"{path}[{i}]", out)
    return out


def _coerce(value, hint, default, path, lines, source):
    def fail(msg):
        raise ScenarioError(path, msg, lines.get(path), source)

    origin = typing.get_origin(hint)
    if origin is typing.Union:
        if value is None:
            return None
        hint = [a for a in typing.get_args(hint) if a is not type(None)][0]
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            fail(f"expected a mapping for {hint.__name__}")
        return _build(hint, value, path, lines, source)
    if hint is bool:
        if not isinstance(value, bool):
            fail(f"expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            fail(f"expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(f"expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            fail(f"expected a string, got {value!r}")
        return value
    if hint is tuple:
        if not isinstance(value, (list, tuple)):
            fail(f"expected a list, got {value!r}")
        if isinstance(default, tuple) and default and len(value) != len(default):
            fail(f"expected {len(default)} entries, got {len(value)}")
        out = []
        for i, v in enumerate(value):
            sub = f"{path}[{i}]"
            if path.endswith("disturbances"):
                if not isinstance(v, dict):
                    raise ScenarioError(sub, "expected a mapping", lines.get(sub), source)
                out.append(_build(Disturbance, v, sub, lines, source))
            elif isinstance(v, (list, tuple)):
                out.append(tuple(_coerce(w, float, None, f"{sub}[{j}]", lines, source) for j, w in enumerate(v)))
            else:
                out.append(_coerce(v, float, None, sub, lines, source))
        return tuple(out)
    return value


def _build(cls, mapping, path, lines, source):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    hints = typing.get_type_hints(cls)
    for key in mapping:
        if key not in fields:
            sub = f"{path}.{key}" if path else str(key)
            raise ScenarioError(sub, f"unknown key (allowed: {', '.join(fields)})", lines.get(sub), source)
    kwargs = {}
    for name, f in fields.items():
        sub = f"{path}.{name}" if path else name
        has_default = f.default is not dataclasses.MISSING or f.default_factory is not dataclasses.MISSING
        if name not in mapping:
            if not has_default:
                raise ScenarioError(sub, "missing required key", lines.get(path), source)
            continue
        default = f.default if f.default is not dataclasses.MISSING else None
        kwargs[name] = _coerce(mapping[name], hints[name], default, sub, lines, source)
    return cls(**kwargs)


def scenario_from_dict(data, lines=None, source=None):
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario must be a mapping", 1, source)
    sc = _build(Scenario, data, "", lines or {}, source)
    try:
        return sc.validate()
    except ScenarioError as e:
        raise ScenarioError(e.path, e.reason, (lines or {}).get(e.path), source) from None


def loads_scenario(text, source=None):
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ScenarioError("", f"invalid YAML: {e}", mark.line + 1 if mark else None, source) from None
    lines = _line_map(node) if node is not None else {}
    return scenario_from_dict(data if data is not None else {}, lines, source)


def load_scenario(path):
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read(), source=str(path))


def dumps_scenario(scenario):
    return yaml.safe_dump(scenario.to_dict(), sort_keys=False, default_flow_style=None)


def save_scenario(path, scenario):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_scenario(scenario))


def preset_scenario(preset="test1", duration=10.0, seed=0, dt=1.0 / 2400.0):
    """Shared-disturbance scenario used to compare the tuning presets."""
    return Scenario(
        duration=duration,
        observer=ObserverSection(G_bound=2.0, bandwidth=20.0),
        name=f"preset-{preset}",
        dt=dt,
        seed=seed,
        controller=ControllerSection(preset=preset),
        gait=GaitSection(frequency=10.0, amplitude=(0.3, 0.2)),
        noise=NoiseSection(position=5e-4, attitude=2e-3, gyro=5e-3),
        disturbances=(
            Disturbance(1.0, 3.0, (0.04, 0.0, 0.0)),
            Disturbance(4.0, 6.0, (0.0, -0.04, 0.0)),
            Disturbance(6.5, 9.5, (0.03, 0.03, 0.0), frequency=0.5),
        ),
    ).validate()
