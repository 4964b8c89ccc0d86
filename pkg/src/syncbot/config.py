"""Session configuration files.

Flat INI-style sections mapping onto the dataclass configs; every key is
optional and falls back to the dataclass default.  Angles are written in
degrees in the file (suffix ``_deg``) and converted here.  The environment
variable ``SYNCBOT_SEED`` overrides the configured seed.

Sections and keys::

    [session]   condition, duration, questionnaire_duration, game_duration,
                seed, trace, coin_schedule, sensor_rate, staleness_timeout,
                steps_per_meter
    [link]      drop_probability, latency, jitter, seed
    [mapping]   rotation_offset_deg, gain, phi_max_deg, theta_source
    [limits]    v_max, a_max, loop_rate
    [geometry]  l0, r, phi_max_deg, cable_count, spacer_count
    [pattern]   kind, seed, simple_amplitude_deg, simple_frequency,
                simple_direction_deg, ou_theta, ou_sigma, replay_trace
    [scene]     free-form annotations (no simulation effect)
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Optional

from .actuation import MotionLimits
from .kinematics import RobotGeometry
from .netsim import LinkModel
from .patterns import PatternConfig
from .sensing import MappingConfig, Trace
from .session import SessionConfig

SEED_ENV_VAR = "SYNCBOT_SEED"


def _get(parser, section, key, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ValueError(f"bad value for [{section}] {key}: {raw!r}") from exc
    return default


def _radians(raw: str) -> float:
    return math.radians(float(raw))


def _schedule(raw: str):
    parts = [p.strip() for p in raw.split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def load_session_config(path, env: Optional[Mapping[str, str]] = None) -> SessionConfig:
    """Parse a config file into a SessionConfig, applying the env seed override."""
    env = os.environ if env is None else env
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")

    defaults = SessionConfig(condition="simple")

    limits = MotionLimits(
        v_max=_get(parser, "limits", "v_max", float, MotionLimits.v_max),
        a_max=_get(parser, "limits", "a_max", float, MotionLimits.a_max),
        loop_rate=_get(parser, "limits", "loop_rate", float, MotionLimits.loop_rate),
    )
    geometry_defaults = RobotGeometry()
    geometry = RobotGeometry(
        l0=_get(parser, "geometry", "l0", float, geometry_defaults.l0),
        r=_get(parser, "geometry", "r", float, geometry_defaults.r),
        phi_max=_get(parser, "geometry", "phi_max_deg", _radians, geometry_defaults.phi_max),
        cable_count=_get(parser, "geometry", "cable_count", int, geometry_defaults.cable_count),
        spacer_count=_get(parser, "geometry", "spacer_count", int, geometry_defaults.spacer_count),
    )
    mapping_defaults = MappingConfig()
    mapping = MappingConfig(
        rotation_offset=_get(parser, "mapping", "rotation_offset_deg", _radians,
                             mapping_defaults.rotation_offset),
        gain=_get(parser, "mapping", "gain", float, mapping_defaults.gain),
        phi_max=_get(parser, "mapping", "phi_max_deg", _radians, mapping_defaults.phi_max),
        theta_source=_get(parser, "mapping", "theta_source", str, mapping_defaults.theta_source),
    )
    link = LinkModel(
        drop_probability=_get(parser, "link", "drop_probability", float, 0.0),
        latency=_get(parser, "link", "latency", float, 0.0),
        jitter=_get(parser, "link", "jitter", float, 0.0),
        seed=_get(parser, "link", "seed", int, 0),
    )

    condition = _get(parser, "session", "condition", str, defaults.condition)
    seed = _get(parser, "session", "seed", int, defaults.seed)
    if env.get(SEED_ENV_VAR):
        try:
            seed = int(env[SEED_ENV_VAR])
        except ValueError as exc:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer") from exc

    trace = None
    trace_path = _get(parser, "session", "trace", str, None)
    if trace_path:
        trace = Trace.load(Path(path).parent / trace_path
                           if not Path(trace_path).is_absolute() else trace_path)

    pattern = None
    if parser.has_section("pattern"):
        pattern_defaults = PatternConfig(kind=condition)
        replay_trace = None
        replay_path = _get(parser, "pattern", "replay_trace", str, None)
        if replay_path:
            replay_trace = Trace.load(Path(path).parent / replay_path
                                      if not Path(replay_path).is_absolute() else replay_path)
        pattern = PatternConfig(
            kind=_get(parser, "pattern", "kind", str, condition),
            seed=_get(parser, "pattern", "seed", int, seed),
            simple_amplitude=_get(parser, "pattern", "simple_amplitude_deg", _radians,
                                  pattern_defaults.simple_amplitude),
            simple_frequency=_get(parser, "pattern", "simple_frequency", float,
                                  pattern_defaults.simple_frequency),
            simple_direction=_get(parser, "pattern", "simple_direction_deg", _radians,
                                  pattern_defaults.simple_direction),
            ou_theta=_get(parser, "pattern", "ou_theta", float, pattern_defaults.ou_theta),
            ou_sigma=_get(parser, "pattern", "ou_sigma", float, pattern_defaults.ou_sigma),
            replay_trace=replay_trace if replay_trace is not None else
            (trace if condition == "replay" else None),
        )

    scene = ()
    if parser.has_section("scene"):
        scene = tuple(sorted(parser.items("scene")))

    return SessionConfig(
        condition=condition,
        duration=_get(parser, "session", "duration", float, defaults.duration),
        questionnaire_duration=_get(parser, "session", "questionnaire_duration", float,
                                    defaults.questionnaire_duration),
        game_duration=_get(parser, "session", "game_duration", float, None),
        seed=seed,
        trace=trace,
        coin_schedule=_get(parser, "session", "coin_schedule", _schedule, None),
        link=link,
        geometry=geometry,
        limits=limits,
        mapping=mapping,
        pattern=pattern,
        payout=defaults.payout,
        sensor_rate=_get(parser, "session", "sensor_rate", float, defaults.sensor_rate),
        staleness_timeout=_get(parser, "session", "staleness_timeout", float,
                               defaults.staleness_timeout),
        steps_per_meter=_get(parser, "session", "steps_per_meter", float,
                             defaults.steps_per_meter),
        scene=scene,
    )
