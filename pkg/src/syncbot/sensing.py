"""Body-worn orientation samples and their mapping to robot bend targets.

The (virtual) sensor streams heading/pitch/roll.  Heading sets the bend
direction; the body tilt angle -- how far the wearer's vertical axis leans
from upright, arccos(cos(pitch)*cos(roll)) -- sets the bend angle, scaled by a
gain and clamped to the robot's bend limit.

Angles are radians internally.  The trace file format is CSV with header
``t,heading,pitch,roll``, time in seconds and angles in degrees.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

from .kinematics import BendState, wrap_angle


@dataclass(frozen=True)
class OrientationSample:
    heading: float
    pitch: float
    roll: float
    timestamp: float = 0.0

    def __post_init__(self):
        for name in ("heading", "pitch", "roll", "timestamp"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if abs(self.heading) > math.pi + 1e-9:
            raise ValueError(f"heading out of [-pi, pi]: {self.heading}")
        if abs(self.pitch) > math.pi / 2 + 1e-9:
            raise ValueError(f"pitch out of [-pi/2, pi/2]: {self.pitch}")
        if abs(self.roll) > math.pi + 1e-9:
            raise ValueError(f"roll out of [-pi, pi]: {self.roll}")


@dataclass(frozen=True)
class MappingConfig:
    """Sensor-to-robot transform parameters.

    ``rotation_offset`` is the bend-direction rotation applied in the
    synchronized condition (default 10 degrees).  ``theta_source`` picks
    whether the bend direction follows the compass heading or the direction
    the body leans toward.
    """

    rotation_offset: float = math.radians(10.0)
    gain: float = 1.0
    phi_max: float = math.radians(20.0)
    theta_source: str = "heading"  # "heading" | "tilt_direction"

    def __post_init__(self):
        if self.gain <= 0.0:
            raise ValueError("gain must be positive")
        if not (0.0 < self.phi_max <= math.pi / 2):
            raise ValueError("phi_max must lie in (0, pi/2]")
        if self.theta_source not in ("heading", "tilt_direction"):
            raise ValueError(f"unknown theta_source {self.theta_source!r}")


def body_tilt(pitch: float, roll: float) -> float:
    """Angle between the wearer's vertical axis and upright."""
    # z-component of the doubly rotated unit z-axis; clamp for acos safety
    c = max(-1.0, min(1.0, math.cos(pitch) * math.cos(roll)))
    return math.acos(c)


def tilt_direction(pitch: float, roll: float) -> float:
    """Azimuth the body leans toward, in the sensor's horizontal plane."""
    return math.atan2(-math.sin(roll), math.sin(pitch) * math.cos(roll))


def map_orientation(sample: OrientationSample, cfg: MappingConfig) -> BendState:
    """Map one orientation sample to a target bend state."""
    tilt = body_tilt(sample.pitch, sample.roll)
    phi = min(cfg.gain * tilt, cfg.phi_max)
    if cfg.theta_source == "tilt_direction":
        base = tilt_direction(sample.pitch, sample.roll) if tilt > 1e-12 else 0.0
    else:
        base = sample.heading
    return BendState(theta=wrap_angle(base + cfg.rotation_offset), phi=phi)


@dataclass(frozen=True)
class ZeroReference:
    """Per-axis offsets that level a mounted sensor at session start."""

    heading: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def apply(self, sample: OrientationSample) -> OrientationSample:
        return OrientationSample(
            heading=wrap_angle(sample.heading - self.heading),
            pitch=wrap_angle(sample.pitch - self.pitch),
            roll=wrap_angle(sample.roll - self.roll),
            timestamp=sample.timestamp,
        )


def _circular_mean(values) -> float:
    values = list(values)
    s = sum(math.sin(v) for v in values)
    c = sum(math.cos(v) for v in values)
    return math.atan2(s, c)


def zero_reference(samples) -> ZeroReference:
    """Offsets equal to the circular mean of the given samples.

    Applying the result maps the mean posture to zero tilt (phi = 0).
    """
    samples = list(samples)
    if not samples:
        raise ValueError("zero_reference needs at least one sample")
    return ZeroReference(
        heading=_circular_mean(s.heading for s in samples),
        pitch=_circular_mean(s.pitch for s in samples),
        roll=_circular_mean(s.roll for s in samples),
    )


class Trace:
    """A recorded orientation stream, replayable with linear interpolation."""

    def __init__(self, samples):
        samples = sorted(samples, key=lambda s: s.timestamp)
        if not samples:
            raise ValueError("trace must contain at least one sample")
        self.samples = samples

    @property
    def duration(self) -> float:
        return self.samples[-1].timestamp

    def sample_at(self, t: float) -> tuple[OrientationSample, bool]:
        """Interpolated sample at time ``t``; second element flags end-of-trace."""
        samples = self.samples
        if t <= samples[0].timestamp:
            first = samples[0]
            return replace(first, timestamp=t), False
        if t >= samples[-1].timestamp:
            # hold the last posture past the end
            return replace(samples[-1], timestamp=t), t > samples[-1].timestamp
        lo, hi = 0, len(samples) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if samples[mid].timestamp <= t:
                lo = mid
            else:
                hi = mid
        a, b = samples[lo], samples[hi]
        f = (t - a.timestamp) / (b.timestamp - a.timestamp)
        return (
            OrientationSample(
                heading=a.heading + f * (b.heading - a.heading),
                pitch=a.pitch + f * (b.pitch - a.pitch),
                roll=a.roll + f * (b.roll - a.roll),
                timestamp=t,
            ),
            False,
        )

    @staticmethod
    def from_csv(text: str) -> "Trace":
        reader = csv.DictReader(io.StringIO(text))
        required = {"t", "heading", "pitch", "roll"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"trace CSV must carry columns {sorted(required)}")
        samples = [
            OrientationSample(
                heading=math.radians(float(row["heading"])),
                pitch=math.radians(float(row["pitch"])),
                roll=math.radians(float(row["roll"])),
                timestamp=float(row["t"]),
            )
            for row in reader
        ]
        return Trace(samples)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["t", "heading", "pitch", "roll"])
        for s in self.samples:
            writer.writerow(
                [
                    f"{s.timestamp:.6f}",
                    f"{math.degrees(s.heading):.6f}",
                    f"{math.degrees(s.pitch):.6f}",
                    f"{math.degrees(s.roll):.6f}",
                ]
            )
        return out.getvalue()

    @staticmethod
    def load(path) -> "Trace":
        with open(path, "r", encoding="utf-8") as fh:
            return Trace.from_csv(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
