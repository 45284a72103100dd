"""Pose / command wire codecs, a seeded link model and PWM quantization.

Packet layouts (little-endian, IEEE-754 float32)::

    pose     b"AGP1" x y z qw qx qy qz                 32 bytes
    command  b"AGC1" roll pitch yaw f1 f2 f3 f4 f5 f6  40 bytes
"""
import collections
import queue
import socket
import struct
import threading
from dataclasses import dataclass

import numpy as np

POSE_MAGIC = b"AGP1"
COMMAND_MAGIC = b"AGC1"
POSE_FORMAT = struct.Struct("<4s7f")
COMMAND_FORMAT = struct.Struct("<4s9f")
POSE_SIZE = POSE_FORMAT.size
COMMAND_SIZE = COMMAND_FORMAT.size
DEFAULT_POSE_PORT = 3883
PWM_LEVELS = 65535


class CodecError(ValueError):
    """Malformed packet buffer."""


@dataclass(frozen=True)
class PosePacket:
    x: float
    y: float
    z: float
    qw: float = 1.0
    qx: float = 0.0
    qy: float = 0.0
    qz: float = 0.0

    def validate(self, tol=1e-6):
        vals = self.as_tuple()
        if not all(np.isfinite(vals)):
            raise CodecError("pose fields must be finite")
        if abs(np.linalg.norm(vals[3:]) - 1.0) > tol:
            raise CodecError("pose quaternion must have unit norm")
        return self

    def as_tuple(self):
        return (self.x, self.y, self.z, self.qw, self.qx, self.qy, self.qz)


@dataclass(frozen=True)
class CommandPacket:
    roll: float
    pitch: float
    yaw: float
    thrusts: tuple = (0.0,) * 6

    def __post_init__(self):
        t = tuple(float(v) for v in self.thrusts)
        if len(t) != 6:
            raise CodecError("command carries exactly six thrusts")
        object.__setattr__(self, "thrusts", t)

    def validate(self, f_max):
        if any(not 0.0 <= f <= f_max for f in self.thrusts):
            raise CodecError(f"thrusts must lie in [0, {f_max}]")
        return self

    def as_tuple(self):
        return (self.roll, self.pitch, self.yaw) + self.thrusts


def encode_pose(p):
    return POSE_FORMAT.pack(POSE_MAGIC, *p.as_tuple())


def decode_pose(buf):
    if len(buf) != POSE_SIZE:
        raise CodecError(f"pose packet must be {POSE_SIZE} bytes, got {len(buf)}")
    magic, *vals = POSE_FORMAT.unpack(bytes(buf))
    if magic != POSE_MAGIC:
        raise CodecError(f"bad pose magic {magic!r}")
    return PosePacket(*vals)


def encode_command(c):
    return COMMAND_FORMAT.pack(COMMAND_MAGIC, *c.as_tuple())


def decode_command(buf):
    if len(buf) != COMMAND_SIZE:
        raise CodecError(f"command packet must be {COMMAND_SIZE} bytes, got {len(buf)}")
    magic, *vals = COMMAND_FORMAT.unpack(bytes(buf))
    if magic != COMMAND_MAGIC:
        raise CodecError(f"bad command magic {magic!r}")
    return CommandPacket(vals[0], vals[1], vals[2], tuple(vals[3:]))


def quantize_pwm(thrusts, f_max, levels=PWM_LEVELS):
    """Snap thrusts to the 16-bit PWM grid over ``[0, f_max]``."""
    f = np.clip(np.asarray(thrusts, dtype=float), 0.0, f_max)
    return np.round(f / f_max * levels) * f_max / levels


# -- link model --------------------------------------------------------------

@dataclass(frozen=True)
class LinkModel:
    """Stream rate, one-way latency, uniform jitter half-width and drop probability."""

    rate: float
    latency: float = 0.0
    jitter: float = 0.0
    drop: float = 0.0

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("link rate must be positive")
        if self.latency < 0 or self.jitter < 0:
            raise ValueError("latency and jitter must be non-negative")
        if not 0.0 <= self.drop < 1.0:
            raise ValueError("drop probability must lie in [0, 1)")


MOCAP_LINK = LinkModel(rate=240.0, latency=2.8e-3)
COMMAND_LINK = LinkModel(rate=200.0, latency=2.0e-3)

Delivery = collections.namedtuple("Delivery", "send_time deliver_time seq payload")


class Link:
    """In-process link: FIFO queue with seeded latency jitter and drops.

    Delivery times are made monotone so survivors keep their send order.
    """

    def __init__(self, model, seed=0):
        self.model = model
        self.rng = np.random.default_rng(seed)
        self.queue = collections.deque()
        self.trace = []
        self._last = -np.inf
        self._seq = 0

    def send(self, payload, now):
        # both draws happen for every packet so the stream stays aligned
        u_drop, u_jit = self.rng.random(2)
        seq = self._seq
        self._seq += 1
        if u_drop < self.model.drop:
            self.trace.append((seq, now, None))
            return None
        t = now + self.model.latency + self.model.jitter * (2.0 * u_jit - 1.0)
        t = max(t, now, self._last)
        self._last = t
        d = Delivery(now, t, seq, payload)
        self.queue.append(d)
        self.trace.append((seq, now, t))
        return d

    def receive(self, now):
        out = []
        while self.queue and self.queue[0].deliver_time <= now:
            out.append(self.queue.popleft())
        return out

    def pending(self):
        return len(self.queue)


def link_step(link, packet, now):
    """Send ``packet`` (if not None) at ``now`` and return everything due by ``now``."""
    if packet is not None:
        link.send(packet, now)
    return link.receive(now)


# -- UDP loopback ------------------------------------------------------------

class UdpReceiver:
    """Background receiver feeding datagrams into a thread-safe queue."""

    def __init__(self, host="127.0.0.1", port=0, bufsize=1024):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind((host, port))
        self.sock.settimeout(0.05)
        self.address = self.sock.getsockname()
        self.inbox = queue.Queue()
        self._bufsize = bufsize
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self):
        while not self._stop.is_set():
            try:
                data, _ = self.sock.recvfrom(self._bufsize)
            except socket.timeout:
                continue
            except OSError:
                break
            self.inbox.put(data)

    def get(self, timeout=1.0):
        return self.inbox.get(timeout=timeout)

    def close(self):
        self._stop.set()
        self._thread.join(timeout=1.0)
        self.sock.close()


class UdpSender:
    def __init__(self, address):
        self.address = tuple(address)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, data):
        self.sock.sendto(data, self.address)

    def close(self):
        self.sock.close()
