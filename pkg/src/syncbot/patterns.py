"""Target-motion generators for the experimental conditions.

Four kinds of bend-target stream:

* ``synchronized`` -- mirror the latest orientation sample (the limiter
  downstream supplies the mimicry delay).
* ``simple`` -- sinusoidal waving sideways in one plane.
* ``random`` -- a mean-reverting random walk on the tilt disc, reflected at
  the bend limit.  Pure Brownian motion would leave any bounded amplitude, so
  mean reversion keeps the amplitude comparable to mimicry.
* ``replay`` -- play back a recorded trace (motion of another person).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .kinematics import BendState, wrap_angle
from .sensing import MappingConfig, OrientationSample, Trace, map_orientation

PATTERN_KINDS = ("synchronized", "random", "simple", "replay")


@dataclass(frozen=True)
class PatternConfig:
    kind: str = "synchronized"
    seed: int = 0
    simple_amplitude: float = math.radians(15.0)
    simple_frequency: float = 0.25
    simple_direction: float = 0.0
    ou_theta: float = 0.8
    ou_sigma: float = 0.15
    replay_trace: Optional[Trace] = None

    def __post_init__(self):
        if self.kind not in PATTERN_KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if self.simple_amplitude < 0:
            raise ValueError("simple_amplitude must be >= 0")
        if self.simple_frequency <= 0:
            raise ValueError("simple_frequency must be positive")
        if self.ou_theta <= 0 or self.ou_sigma <= 0:
            raise ValueError("ou parameters must be positive")


class PatternGenerator:
    """Single-owner state machine emitting bend targets; one per session."""

    end_of_trace = False

    def next_target(self, t: float, dt: float, latest: Optional[OrientationSample] = None) -> BendState:
        raise NotImplementedError


class SynchronizedPattern(PatternGenerator):
    def __init__(self, cfg: PatternConfig, mapping: MappingConfig):
        self.mapping = mapping

    def next_target(self, t, dt, latest=None):
        if latest is None:
            raise ValueError("synchronized pattern needs the latest orientation sample")
        return map_orientation(latest, self.mapping)


class SimplePattern(PatternGenerator):
    """Planar waving: phi = |A sin(2 pi f t)|, direction flipping each half cycle."""

    def __init__(self, cfg: PatternConfig, mapping: MappingConfig):
        if cfg.simple_amplitude > mapping.phi_max + 1e-12:
            raise ValueError("simple_amplitude exceeds the bend limit")
        self.amplitude = cfg.simple_amplitude
        self.frequency = cfg.simple_frequency
        self.direction = cfg.simple_direction

    def next_target(self, t, dt, latest=None):
        x = self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)
        theta = self.direction if x >= 0.0 else wrap_angle(self.direction + math.pi)
        return BendState(theta=theta, phi=abs(x))


class RandomPattern(PatternGenerator):
    """Reflected two-dimensional mean-reverting walk on the tilt disc."""

    def __init__(self, cfg: PatternConfig, mapping: MappingConfig):
        self.ou_theta = cfg.ou_theta
        self.ou_sigma = cfg.ou_sigma
        self.radius = mapping.phi_max
        self.rng = np.random.default_rng(cfg.seed)
        self.x = 0.0
        self.y = 0.0

    def next_target(self, t, dt, latest=None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        scale = self.ou_sigma * math.sqrt(dt)
        self.x += -self.ou_theta * self.x * dt + scale * self.rng.standard_normal()
        self.y += -self.ou_theta * self.y * dt + scale * self.rng.standard_normal()
        rho = math.hypot(self.x, self.y)
        if rho > self.radius:
            # fold the radial excursion back inside the disc
            folded = rho
            while folded > self.radius:
                folded = 2.0 * self.radius - folded
                if folded < 0.0:
                    folded = -folded
            self.x *= folded / rho
            self.y *= folded / rho
        return BendState.from_tilt(self.x, self.y)


class ReplayPattern(PatternGenerator):
    def __init__(self, cfg: PatternConfig, mapping: MappingConfig):
        if cfg.replay_trace is None:
            raise ValueError("replay pattern needs replay_trace")
        self.trace = cfg.replay_trace
        self.mapping = mapping
        self.end_of_trace = False

    def next_target(self, t, dt, latest=None):
        sample, ended = self.trace.sample_at(t)
        self.end_of_trace = ended
        return map_orientation(sample, self.mapping)


_PATTERN_CLASSES = {
    "synchronized": SynchronizedPattern,
    "simple": SimplePattern,
    "random": RandomPattern,
    "replay": ReplayPattern,
}


def make_generator(cfg: PatternConfig, mapping: MappingConfig) -> PatternGenerator:
    return _PATTERN_CLASSES[cfg.kind](cfg, mapping)


def _tilt_x(states) -> np.ndarray:
    return np.array([s.phi * math.cos(s.theta) for s in states])


def _zero_crossing_rate(x: np.ndarray, rate_hz: float) -> float:
    signs = np.sign(x)
    signs = signs[signs != 0]
    if len(signs) < 2:
        return 0.0
    crossings = int(np.sum(signs[1:] != signs[:-1]))
    return crossings * rate_hz / len(x)


def motion_stats(states, rate_hz: float) -> tuple[float, float]:
    """(RMS of phi, zero crossings per second of the tilt x-component)."""
    phis = np.array([s.phi for s in states])
    rms = float(np.sqrt(np.mean(phis**2)))
    return rms, _zero_crossing_rate(_tilt_x(states), rate_hz)


def _simulate_stats(ou_theta: float, ou_sigma: float, mapping: MappingConfig,
                    rate_hz: float, duration: float, seed: int) -> tuple[float, float]:
    cfg = PatternConfig(kind="random", seed=seed, ou_theta=ou_theta, ou_sigma=ou_sigma)
    gen = RandomPattern(cfg, mapping)
    dt = 1.0 / rate_hz
    states = [gen.next_target(k * dt, dt) for k in range(int(duration * rate_hz))]
    return motion_stats(states, rate_hz)


def calibrate_random(reference, cfg: PatternConfig, *, mapping: Optional[MappingConfig] = None,
                     rate_hz: float = 50.0, duration: float = 300.0,
                     tolerance: float = 0.1) -> PatternConfig:
    """Tune the random-walk parameters to a mimicry-condition recording.

    Matches two statistics of the reference bend stream -- RMS bend angle and
    the zero-crossing rate of the tilt x-component -- by coordinate search
    over (ou_theta, ou_sigma), evaluating each candidate on a seeded run.
    """
    mapping = mapping or MappingConfig()
    reference = list(reference)
    if len(reference) / rate_hz < 30.0:
        raise ValueError("reference recording shorter than 30 s; not enough data")
    rms_ref, zcr_ref = motion_stats(reference, rate_hz)
    if rms_ref < 1e-9 or zcr_ref <= 0.0:
        raise ValueError("reference shows no motion; random walk cannot be matched")

    # closed-form initialization from the lag-1 autocorrelation of a
    # mean-reverting walk: sign-change probability per step = arccos(rho)/pi
    rho = math.cos(math.pi * min(zcr_ref / rate_hz, 0.999))
    theta0 = max(-rate_hz * math.log(max(rho, 1e-6)), 1e-3)
    sigma0 = max(rms_ref * math.sqrt(theta0), 1e-6)

    def objective(th, sg):
        rms, zcr = _simulate_stats(th, sg, mapping, rate_hz, duration, cfg.seed + 1)
        return max(abs(rms / rms_ref - 1.0), abs(zcr / zcr_ref - 1.0))

    best = (theta0, sigma0)
    best_err = objective(*best)
    factors = (0.75, 0.9, 1.1, 1.3)
    for _ in range(12):
        if best_err <= tolerance:
            break
        improved = False
        for axis in (0, 1):
            for f in factors:
                cand = list(best)
                cand[axis] *= f
                err = objective(*cand)
                if err < best_err:
                    best, best_err = (cand[0], cand[1]), err
                    improved = True
        if not improved:
            break
    return replace(cfg, kind="random", ou_theta=best[0], ou_sigma=best[1])
