import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aerobat_guard import telemetry
from aerobat_guard.telemetry import CodecError, CommandPacket, Link, LinkModel, PosePacket

f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


def test_pose_identity_round_trip():
    p = PosePacket(0, 0, 0, 1, 0, 0, 0)
    buf = telemetry.encode_pose(p)
    assert len(buf) == 32 and buf[:4] == b"AGP1"
    assert telemetry.decode_pose(buf) == p


@given(st.tuples(*[f32] * 7))
def test_pose_round_trip_bit_exact(vals):
    buf = telemetry.encode_pose(PosePacket(*vals))
    assert telemetry.encode_pose(telemetry.decode_pose(buf)) == buf


@given(st.tuples(*[f32] * 9))
def test_command_round_trip_bit_exact(vals):
    buf = telemetry.encode_command(CommandPacket(*vals[:3], vals[3:]))
    assert len(buf) == 40
    assert telemetry.encode_command(telemetry.decode_command(buf)) == buf


def test_command_examples():
    zero = CommandPacket(0, 0, 0)
    assert telemetry.decode_command(telemetry.encode_command(zero)) == zero
    sat = CommandPacket(0.1, -0.1, 0.0, (0.6,) * 6)
    out = telemetry.decode_command(telemetry.encode_command(sat))
    assert out.thrusts == tuple(np.float32(0.6).item() for _ in range(6))
    with pytest.raises(CodecError):
        CommandPacket(0, 0, 0, (0.1,) * 5)
    with pytest.raises(CodecError):
        CommandPacket(0, 0, 0, (0.7,) * 6).validate(0.6)


def test_decode_errors():
    buf = telemetry.encode_pose(PosePacket(1, 2, 3))
    with pytest.raises(CodecError, match="32 bytes"):
        telemetry.decode_pose(buf[:-1])
    with pytest.raises(CodecError, match="magic"):
        telemetry.decode_pose(b"XXXX" + buf[4:])
    cmd = telemetry.encode_command(CommandPacket(0, 0, 0))
    with pytest.raises(CodecError, match="magic"):
        telemetry.decode_command(b"AGP1" + cmd[4:])


def test_pose_validation():
    PosePacket(0, 0, 0, 1, 0, 0, 0).validate()
    with pytest.raises(CodecError):
        PosePacket(0, 0, 0, 1, 1, 0, 0).validate()


def test_layout_is_little_endian_float32():
    buf = telemetry.encode_pose(PosePacket(1.5, 0, 0))
    assert struct.unpack_from("<f", buf, 4)[0] == 1.5


def test_quantize_pwm():
    q = telemetry.quantize_pwm([0.0, 0.3, 0.6, 0.9, -0.1], 0.6)
    assert q[0] == 0 and q[2] == 0.6 and q[3] == 0.6 and q[4] == 0
    assert abs(q[1] - 0.3) <= 0.6 / 65535 / 2 * (1 + 1e-9)
    x = np.linspace(0, 0.6, 1001)
    np.testing.assert_array_equal(telemetry.quantize_pwm(telemetry.quantize_pwm(x, 0.6), 0.6),
                                  telemetry.quantize_pwm(x, 0.6))


def test_link_model_validation():
    with pytest.raises(ValueError):
        LinkModel(rate=0)
    with pytest.raises(ValueError):
        LinkModel(rate=1, latency=-1)
    with pytest.raises(ValueError):
        LinkModel(rate=1, drop=1.0)


def test_zero_latency_immediate_in_order():
    link = Link(LinkModel(240.0))
    got = []
    for k in range(10):
        got += telemetry.link_step(link, k, k / 240)
    assert [d.payload for d in got] == list(range(10))
    assert all(d.deliver_time == d.send_time for d in got)


def test_mocap_delivered_by_next_control_tick():
    link = Link(telemetry.MOCAP_LINK)
    ctrl = 1 / 200
    for k in range(2400):
        d = link.send(k, k / 240)
        next_tick = np.ceil(d.send_time / ctrl - 1e-12) * ctrl
        assert d.deliver_time <= next_tick + ctrl


def test_delivery_respects_latency_and_order():
    model = LinkModel(240.0, latency=2.8e-3, jitter=1e-3, drop=0.2)
    link = Link(model, seed=3)
    out = []
    for k in range(5000):
        out += telemetry.link_step(link, k, k / 240)
    out += link.receive(1e9)
    assert all(d.deliver_time >= d.send_time + model.latency - model.jitter for d in out)
    seqs = [d.seq for d in out]
    assert seqs == sorted(seqs)


def test_drop_fraction():
    link = Link(LinkModel(240.0, drop=0.99), seed=11)
    n = 100000
    for k in range(n):
        link.send(k, k / 240)
    frac = sum(t is not None for _, _, t in link.trace) / n
    assert frac == pytest.approx(0.01, abs=0.002)


def test_same_seed_same_trace():
    def trace(seed):
        link = Link(LinkModel(240.0, latency=2.8e-3, jitter=1e-3, drop=0.1), seed=seed)
        for k in range(2000):
            link.send(k, k / 240)
        return link.trace
    assert trace(5) == trace(5)
    assert trace(5) != trace(6)


def test_udp_loopback():
    rx = telemetry.UdpReceiver()
    tx = telemetry.UdpSender(rx.address)
    try:
        pkt = PosePacket(0.1, 0.2, 0.3)
        tx.send(telemetry.encode_pose(pkt))
        assert telemetry.decode_pose(rx.get(timeout=2.0)) == telemetry.decode_pose(telemetry.encode_pose(pkt))
    finally:
        tx.close()
        rx.close()
