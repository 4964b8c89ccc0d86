"""Simulated datagram fabric between the sensor, robot, and recorder.

Connectionless semantics: no handshake, no retransmission, no ordering
guarantee once jitter is nonzero.  Receivers cope with loss through the
freshness gate -- a stale stream simply freezes the robot until the next
datagram lands, so "reconnection" is instant by construction.

Wire format: each datagram carries one UTF-8 JSON record prefixed with a
4-byte big-endian length.
"""

from __future__ import annotations

import json
import random
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .sensing import OrientationSample

DATAGRAM_KINDS = ("orientation", "telemetry", "stage", "coin", "log")

DEFAULT_STALENESS_TIMEOUT = 0.5

_LENGTH = struct.Struct(">I")


def encode_record(record: dict) -> bytes:
    """Serialize one record to the length-prefixed JSON wire format."""
    body = json.dumps(record, separators=(",", ":")).encode("utf-8")
    return _LENGTH.pack(len(body)) + body


def decode_record(payload: bytes) -> dict:
    if len(payload) < _LENGTH.size:
        raise ValueError("payload shorter than its length prefix")
    (length,) = _LENGTH.unpack_from(payload)
    body = payload[_LENGTH.size:]
    if len(body) != length:
        raise ValueError(f"payload length {len(body)} != declared {length}")
    record = json.loads(body.decode("utf-8"))
    if not isinstance(record, dict):
        raise ValueError("payload must hold a single JSON object")
    return record


@dataclass(frozen=True)
class Datagram:
    src: str
    dst: str
    kind: str
    payload: bytes
    send_time: float

    def __post_init__(self):
        if self.kind not in DATAGRAM_KINDS:
            raise ValueError(f"unknown datagram kind {self.kind!r}")

    def record(self) -> dict:
        return decode_record(self.payload)


@dataclass(frozen=True)
class LinkModel:
    drop_probability: float = 0.0
    latency: float = 0.0
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")
        if self.latency < 0 or self.jitter < 0:
            raise ValueError("latency and jitter must be >= 0")


@dataclass
class _Flight:
    delivery_time: float
    order: int
    datagram: Datagram


class Fabric:
    """Carries datagrams between known devices under a per-link loss model."""

    def __init__(self, devices, default_link: Optional[LinkModel] = None,
                 links: Optional[Dict[Tuple[str, str], LinkModel]] = None):
        self.devices = frozenset(devices)
        if not self.devices:
            raise ValueError("fabric needs at least one device")
        self.default_link = default_link or LinkModel()
        self.links = dict(links or {})
        self._rngs: Dict[Tuple[str, str], random.Random] = {}
        self._in_flight: List[_Flight] = []
        self._order = 0
        self._now = 0.0
        self.posted = 0
        self.dropped = 0
        self.delivered = 0

    def _link(self, src: str, dst: str) -> LinkModel:
        return self.links.get((src, dst), self.default_link)

    def _rng(self, src: str, dst: str, link: LinkModel) -> random.Random:
        key = (src, dst)
        if key not in self._rngs:
            self._rngs[key] = random.Random(f"{link.seed}:{src}->{dst}")
        return self._rngs[key]

    def post(self, datagram: Datagram) -> None:
        if datagram.src not in self.devices:
            raise ValueError(f"unknown source device {datagram.src!r}")
        if datagram.dst not in self.devices:
            raise ValueError(f"unknown destination device {datagram.dst!r}")
        self.posted += 1
        link = self._link(datagram.src, datagram.dst)
        rng = self._rng(datagram.src, datagram.dst, link)
        if rng.random() < link.drop_probability:
            self.dropped += 1
            return
        delay = link.latency
        if link.jitter > 0.0:
            delay += rng.random() * link.jitter
        self._in_flight.append(
            _Flight(datagram.send_time + delay, self._order, datagram)
        )
        self._order += 1

    def tick(self, now: float) -> Dict[str, List[Datagram]]:
        """Deliver everything due by ``now``, grouped by destination."""
        if now < self._now:
            raise ValueError(f"time went backwards: {now} < {self._now}")
        self._now = now
        due = [f for f in self._in_flight if f.delivery_time <= now]
        if not due:
            return {}
        self._in_flight = [f for f in self._in_flight if f.delivery_time > now]
        due.sort(key=lambda f: (f.delivery_time, f.order))
        out: Dict[str, List[Datagram]] = {}
        for flight in due:
            out.setdefault(flight.datagram.dst, []).append(flight.datagram)
            self.delivered += 1
        return out

    @property
    def in_flight(self) -> int:
        return len(self._in_flight)


def freshness_gate(latest_delivered: Optional[OrientationSample], now: float,
                   staleness_timeout: float = DEFAULT_STALENESS_TIMEOUT) -> bool:
    """Whether the most recent sample is still usable for motion control.

    A closed gate means position hold: the robot keeps its last commanded
    target until a fresh sample arrives.  There is no handshake state; the
    first datagram after any gap reopens the gate on the same tick.
    """
    if staleness_timeout <= 0.0:
        raise ValueError("staleness_timeout must be positive")
    if latest_delivered is None:
        return False
    return now - latest_delivered.timestamp <= staleness_timeout
