"""Tests for the simulated datagram fabric."""

import random

import pytest

from syncbot.netsim import (
    Datagram,
    Fabric,
    LinkModel,
    decode_record,
    encode_record,
    freshness_gate,
)
from syncbot.sensing import OrientationSample


def _dg(src="sensor", dst="robot", kind="orientation", t=0.0, record=None):
    payload = encode_record(record if record is not None else {"t": t})
    return Datagram(src, dst, kind, payload, t)


class TestWireFormat:
    def test_roundtrip(self):
        record = {"t": 1.25, "heading": -0.5, "note": "drei Geräte"}
        assert decode_record(encode_record(record)) == record

    def test_truncated_payload_rejected(self):
        payload = encode_record({"t": 0.0})
        with pytest.raises(ValueError):
            decode_record(payload[:-1])

    def test_trailing_bytes_rejected(self):
        payload = encode_record({"t": 0.0}) + b"junk"
        with pytest.raises(ValueError):
            decode_record(payload)

    def test_non_object_rejected(self):
        import json
        import struct

        body = json.dumps([1, 2, 3]).encode()
        with pytest.raises(ValueError):
            decode_record(struct.pack(">I", len(body)) + body)


class TestPostAndTick:
    def test_lossless_fifo(self):
        fabric = Fabric({"sensor", "robot"}, LinkModel(latency=0.1))
        for k in range(3):
            fabric.post(_dg(t=k * 0.02, record={"seq": k}))
        delivered = fabric.tick(1.0)["robot"]
        assert [d.record()["seq"] for d in delivered] == [0, 1, 2]

    def test_total_loss(self):
        fabric = Fabric({"sensor", "robot"}, LinkModel(drop_probability=1.0))
        for k in range(10):
            fabric.post(_dg(t=k * 0.02))
        assert fabric.tick(100.0) == {}
        assert fabric.dropped == 10

    def test_seeded_determinism(self):
        def run():
            fabric = Fabric({"sensor", "robot"}, LinkModel(drop_probability=0.2, jitter=0.05, seed=3))
            for k in range(200):
                fabric.post(_dg(t=k * 0.02, record={"seq": k}))
            return [d.record()["seq"] for d in fabric.tick(100.0).get("robot", [])]

        assert run() == run()

    def test_partial_delivery_by_schedule(self):
        fabric = Fabric({"sensor", "robot"})
        fabric.post(_dg(t=1.00, record={"seq": 0}))
        fabric.post(_dg(t=1.01, record={"seq": 1}))
        first = fabric.tick(1.005)["robot"]
        assert [d.record()["seq"] for d in first] == [0]
        second = fabric.tick(1.02)["robot"]
        assert [d.record()["seq"] for d in second] == [1]

    def test_empty_fabric_tick(self):
        fabric = Fabric({"sensor", "robot"})
        assert fabric.tick(5.0) == {}

    def test_conservation_under_random_schedule(self):
        rng = random.Random(11)
        fabric = Fabric(
            {"sensor", "robot", "recorder"},
            LinkModel(drop_probability=0.3, latency=0.05, jitter=0.2, seed=8),
        )
        devices = ["sensor", "robot", "recorder"]
        n = 500
        t = 0.0
        delivered = 0
        for _ in range(n):
            t += rng.uniform(0.0, 0.05)
            src, dst = rng.sample(devices, 2)
            fabric.post(_dg(src=src, dst=dst, t=t))
            if rng.random() < 0.3:
                delivered += sum(len(v) for v in fabric.tick(t).values())
        delivered += sum(len(v) for v in fabric.tick(1e9).values())
        assert delivered + fabric.dropped == n
        assert fabric.in_flight == 0

    def test_delivery_order_is_stable(self):
        # equal delivery times fall back to post order
        fabric = Fabric({"sensor", "robot"}, LinkModel(latency=0.5))
        for k in range(5):
            fabric.post(_dg(t=2.0, record={"seq": k}))
        seqs = [d.record()["seq"] for d in fabric.tick(10.0)["robot"]]
        assert seqs == sorted(seqs)

    def test_time_regression_rejected(self):
        fabric = Fabric({"sensor", "robot"})
        fabric.tick(2.0)
        with pytest.raises(ValueError, match="backwards"):
            fabric.tick(1.5)

    def test_unknown_device_rejected(self):
        fabric = Fabric({"sensor", "robot"})
        with pytest.raises(ValueError, match="unknown"):
            fabric.post(_dg(src="ghost"))
        with pytest.raises(ValueError, match="unknown"):
            fabric.post(_dg(dst="ghost"))

    def test_per_link_override(self):
        fabric = Fabric(
            {"sensor", "robot", "recorder"},
            LinkModel(drop_probability=0.0),
            links={("sensor", "recorder"): LinkModel(drop_probability=1.0)},
        )
        fabric.post(_dg(dst="robot"))
        fabric.post(_dg(dst="recorder"))
        out = fabric.tick(1.0)
        assert "robot" in out and "recorder" not in out


class TestValidation:
    def test_bad_kind(self):
        with pytest.raises(ValueError):
            Datagram("a", "b", "gossip", b"", 0.0)

    def test_bad_link_model(self):
        with pytest.raises(ValueError):
            LinkModel(drop_probability=1.5)
        with pytest.raises(ValueError):
            LinkModel(latency=-0.1)


class TestFreshnessGate:
    def test_fresh_sample_usable(self):
        sample = OrientationSample(0.0, 0.0, 0.0, timestamp=1.0)
        assert freshness_gate(sample, now=1.1)

    def test_stale_sample_holds(self):
        sample = OrientationSample(0.0, 0.0, 0.0, timestamp=1.0)
        assert not freshness_gate(sample, now=1.6)

    def test_nothing_received_yet(self):
        assert not freshness_gate(None, now=0.0)

    def test_reconnect_is_instant(self):
        # a 2 s silence closes the gate; the next delivery reopens it on the
        # same tick, with no handshake state in between
        fabric = Fabric({"sensor", "robot"})
        fabric.post(_dg(t=0.0, record={"t": 0.0, "heading": 0.0, "pitch": 0.0, "roll": 0.0}))
        latest = None
        gate_log = []
        for k in range(301):
            now = k * 0.01
            if now == 2.5:
                fabric.post(_dg(t=now, record={"t": now, "heading": 0.0, "pitch": 0.0, "roll": 0.0}))
            for dg in fabric.tick(now).get("robot", []):
                rec = dg.record()
                latest = OrientationSample(rec["heading"], rec["pitch"], rec["roll"], timestamp=rec["t"])
            gate_log.append(freshness_gate(latest, now))
        assert gate_log[50]          # 0.5 s after the first sample: still fresh
        assert not gate_log[100]     # 1.0 s: stale
        assert not gate_log[249]     # still silent
        assert gate_log[250]         # reopens exactly when the new sample lands

    def test_bad_timeout(self):
        with pytest.raises(ValueError):
            freshness_gate(None, 0.0, staleness_timeout=0.0)

    def test_gate_open_fraction_under_loss(self):
        # 20 % drop, 50 Hz sensor, 0.5 s timeout: the gate must stay open at
        # least 99 % of robot ticks over a minute
        fabric = Fabric({"sensor", "robot"}, LinkModel(drop_probability=0.2, latency=0.02, seed=0))
        latest = None
        open_ticks = 0
        total = 6000
        for k in range(total):
            now = k * 0.01
            if k % 2 == 0:
                fabric.post(_dg(t=now, record={"t": now, "heading": 0.0, "pitch": 0.0, "roll": 0.0}))
            for dg in fabric.tick(now).get("robot", []):
                rec = dg.record()
                latest = OrientationSample(rec["heading"], rec["pitch"], rec["roll"], timestamp=rec["t"])
            if freshness_gate(latest, now):
                open_ticks += 1
        assert open_ticks / total >= 0.99
