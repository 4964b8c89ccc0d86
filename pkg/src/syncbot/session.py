"""Single-session simulation engine.

One engine owns one logical clock and advances every state machine of a
session in lockstep: the sensor stream (recorded trace or live injection),
the datagram fabric, the motion pattern, the cable controller, the coin
game, and the recorder.  A session walks through three stages --
exploration, questionnaire, game -- and is bit-for-bit deterministic given
its configuration and seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .actuation import CableController, MotionLimits
from .kinematics import BendState, RobotGeometry, cable_deltas, project_bend
from .netsim import (
    DEFAULT_STALENESS_TIMEOUT,
    Datagram,
    Fabric,
    LinkModel,
    encode_record,
    freshness_gate,
)
from .patterns import PatternConfig, make_generator
from .sensing import MappingConfig, OrientationSample, Trace
from .trustgame import DECISION_IDLE_SECONDS, GameState, PayoutPolicy, begin, insert_coin, tick as game_tick

STAGES = ("explore", "questionnaire", "game")

DEVICES = ("sensor", "robot", "recorder")


@dataclass(frozen=True)
class SessionConfig:
    condition: str = "synchronized"
    duration: float = 180.0
    questionnaire_duration: float = 10.0
    game_duration: Optional[float] = None  # derived from the coin schedule
    seed: int = 0
    trace: Optional[Trace] = None
    coin_schedule: Optional[Tuple[float, ...]] = None  # offsets into the game stage
    link: LinkModel = field(default_factory=LinkModel)
    geometry: RobotGeometry = field(default_factory=RobotGeometry)
    limits: MotionLimits = field(default_factory=MotionLimits)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    pattern: Optional[PatternConfig] = None
    payout: PayoutPolicy = field(default_factory=PayoutPolicy)
    sensor_rate: float = 50.0
    staleness_timeout: float = DEFAULT_STALENESS_TIMEOUT
    steps_per_meter: float = 40_000.0
    scene: Tuple[Tuple[str, str], ...] = ()  # UI annotations only, no sim effect

    def __post_init__(self):
        if self.condition not in ("synchronized", "random", "simple", "replay"):
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.duration <= 0 or self.questionnaire_duration < 0:
            raise ValueError("durations must be positive")
        if self.game_duration is not None and self.game_duration < 0:
            raise ValueError("game_duration must be >= 0")
        if self.sensor_rate <= 0 or self.limits.loop_rate < self.sensor_rate:
            raise ValueError("sensor_rate must be positive and <= loop rate")
        ratio = self.limits.loop_rate / self.sensor_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("loop rate must be an integer multiple of sensor_rate")
        if self.pattern is not None and self.pattern.kind != self.condition:
            raise ValueError(
                f"pattern kind {self.pattern.kind!r} inconsistent with condition {self.condition!r}"
            )
        if self.coin_schedule is not None and any(t < 0 for t in self.coin_schedule):
            raise ValueError("coin_schedule offsets must be >= 0")

    def pattern_config(self) -> PatternConfig:
        if self.pattern is not None:
            return self.pattern
        return PatternConfig(
            kind=self.condition,
            seed=self.seed,
            replay_trace=self.trace if self.condition == "replay" else None,
        )


@dataclass(frozen=True)
class RecorderRecord:
    """One recorder row; angles in degrees, cable deltas in millimeters."""

    t: float
    heading: float
    pitch: float
    roll: float
    theta: float
    phi: float
    dl1: float
    dl2: float
    dl3: float
    condition: str
    stage: str
    coins_inserted: int
    coins_returned: int


@dataclass(frozen=True)
class SessionResult:
    config: SessionConfig
    records: Tuple[RecorderRecord, ...]
    game: GameState
    payouts: Tuple[int, ...]
    gate_open_ticks: int
    total_ticks: int


def _default_coin_schedule(seed: int) -> Tuple[float, ...]:
    """Scripted deposits for batch runs: 0..5 coins early in the game stage."""
    rng = random.Random(f"{seed}:coins")
    count = rng.randint(0, 5)
    return tuple(sorted(round(rng.uniform(1.0, 8.0), 2) for _ in range(count)))


class SessionEngine:
    """Advances one session tick by tick; shared by batch runs and the
    live gateway (``live=True`` replaces the scripted sensor with
    ``inject_orientation`` / ``insert_coin`` calls)."""

    def __init__(self, cfg: SessionConfig, live: bool = False):
        if not live and cfg.condition in ("synchronized", "replay") and cfg.trace is None:
            pattern_cfg = cfg.pattern_config()
            if cfg.condition == "synchronized" or pattern_cfg.replay_trace is None:
                raise ValueError(f"condition {cfg.condition!r} needs a motion trace")
        self.cfg = cfg
        self.live = live
        self.dt = cfg.limits.dt
        self._sensor_every = int(round(cfg.limits.loop_rate / cfg.sensor_rate))
        self.fabric = Fabric(DEVICES, cfg.link)
        self.pattern = make_generator(cfg.pattern_config(), cfg.mapping)
        self.controller = CableController(
            limits=cfg.limits,
            steps_per_meter=cfg.steps_per_meter,
            bend_stop=(cfg.geometry.r, cfg.geometry.phi_max),
        )
        self.game = GameState()
        schedule = cfg.coin_schedule
        if schedule is None and not live:
            schedule = _default_coin_schedule(cfg.seed)
        self._coin_schedule = list(schedule or ())
        game_duration = cfg.game_duration
        if game_duration is None:
            last = max(self._coin_schedule, default=0.0)
            game_duration = last + DECISION_IDLE_SECONDS + 2.0
        self.explore_end = cfg.duration
        self.questionnaire_end = cfg.duration + cfg.questionnaire_duration
        self.session_end = self.questionnaire_end + game_duration
        self._game_begun = False
        self._stage_override: Optional[str] = None
        self._pending_coins = list(self._coin_schedule)
        self.k = 0
        self.robot_latest: Optional[OrientationSample] = None
        self.last_target = BendState(0.0, 0.0)
        self.bend = BendState(0.0, 0.0)
        self.cable_state = self.controller.state
        self._rec_orientation = OrientationSample(0.0, 0.0, 0.0, timestamp=0.0)
        self._rec_telemetry: Optional[dict] = None
        self._rec_coins = (0, 0)
        self.records: List[RecorderRecord] = []
        self.payouts: List[int] = []
        self.gate_open_ticks = 0
        self.total_ticks = 0

    # --- clock & stages ----------------------------------------------------

    @property
    def now(self) -> float:
        return self.k * self.dt

    def stage(self, now: Optional[float] = None) -> str:
        if self._stage_override is not None:
            return self._stage_override
        now = self.now if now is None else now
        if now < self.explore_end:
            return "explore"
        if now < self.questionnaire_end:
            return "questionnaire"
        return "game"

    def set_stage(self, stage: str) -> None:
        """Pin the session stage, overriding the timed schedule (gateway mode).

        Entering the game stage arms the coin acceptor right away so a client
        may deposit without waiting for the next control tick.
        """
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        self._stage_override = stage
        if stage == "game" and not self._game_begun and self.game.phase == "idle":
            self.game = begin(self.game, self.now)
            self._game_begun = True
            self._post_coins()

    @property
    def done(self) -> bool:
        return self.now >= self.session_end

    # --- live inputs ---------------------------------------------------------

    def inject_orientation(self, sample: OrientationSample) -> None:
        """Feed one live orientation sample into the fabric (gateway mode)."""
        self._post_orientation(sample)

    def insert_coin(self) -> bool:
        """Attempt a live coin insert at the current simulation time.

        The acceptor is armed only while the game stage is running; outside
        it the coin bounces straight back without touching the game state.
        """
        if not self._game_begun or self.stage() != "game":
            return False
        self.game, accepted = insert_coin(self.game, self.now)
        self._post_coins()
        return accepted

    # --- internals -----------------------------------------------------------

    def _post_orientation(self, sample: OrientationSample) -> None:
        record = {
            "t": sample.timestamp,
            "heading": sample.heading,
            "pitch": sample.pitch,
            "roll": sample.roll,
        }
        payload = encode_record(record)
        for dst in ("robot", "recorder"):
            self.fabric.post(Datagram("sensor", dst, "orientation", payload, sample.timestamp))

    def _post_telemetry(self, now: float, steps) -> None:
        dl1, dl2, dl3 = self.cable_state.length_delta
        record = {
            "t": now,
            "dl1": dl1,
            "dl2": dl2,
            "dl3": dl3,
            "theta": self.bend.theta,
            "phi": self.bend.phi,
            "steps1": steps[0],
            "steps2": steps[1],
            "steps3": steps[2],
        }
        self.fabric.post(Datagram("robot", "recorder", "telemetry", encode_record(record), now))

    def _post_coins(self) -> None:
        record = {
            "t": self.now,
            "inserted": self.game.inserted,
            "returned": self.game.coins_returned,
        }
        self.fabric.post(Datagram("robot", "recorder", "coin", encode_record(record), self.now))

    def _deliver(self, now: float) -> None:
        for dst, datagrams in self.fabric.tick(now).items():
            for dg in datagrams:
                record = dg.record()
                if dg.kind == "orientation":
                    sample = OrientationSample(
                        record["heading"], record["pitch"], record["roll"],
                        timestamp=record["t"],
                    )
                    if dst == "robot":
                        if (self.robot_latest is None
                                or sample.timestamp >= self.robot_latest.timestamp):
                            self.robot_latest = sample
                    else:
                        if sample.timestamp >= self._rec_orientation.timestamp:
                            self._rec_orientation = sample
                elif dg.kind == "telemetry":
                    if (self._rec_telemetry is None
                            or record["t"] >= self._rec_telemetry["t"]):
                        self._rec_telemetry = record
                elif dg.kind == "coin":
                    self._rec_coins = (record["inserted"], record["returned"])

    def _sensor_sample(self, now: float) -> OrientationSample:
        if self.cfg.trace is not None:
            sample, _ = self.cfg.trace.sample_at(now)
            return sample
        return OrientationSample(0.0, 0.0, 0.0, timestamp=now)

    def tick(self) -> RecorderRecord:
        now = self.now
        stage = self.stage(now)

        # sensor emission (scripted mode only; gateway injects directly)
        if not self.live and self.k % self._sensor_every == 0:
            self._post_orientation(self._sensor_sample(now))

        # inbound deliveries for this tick
        self._deliver(now)

        # motion control: synchronized mirrors the latest fresh sample and
        # holds the last commanded target when the stream goes stale
        if self.cfg.condition == "synchronized":
            if freshness_gate(self.robot_latest, now, self.cfg.staleness_timeout):
                self.gate_open_ticks += 1
                self.last_target = self.pattern.next_target(now, self.dt, self.robot_latest)
        else:
            self.gate_open_ticks += 1
            self.last_target = self.pattern.next_target(now, self.dt, self.robot_latest)
        target_deltas = cable_deltas(self.last_target, self.cfg.geometry)
        self.cable_state, step_cmd = self.controller.tick(target_deltas, self.dt)
        self.bend = project_bend(self.cable_state.as_deltas(), self.cfg.geometry)
        self._post_telemetry(now, step_cmd.steps)

        # coin game: armed at the start of the game stage; scripted deposits
        # fire at their offsets into the stage
        if stage == "game" and not self._game_begun and self.game.phase == "idle":
            self.game = begin(self.game, now)
            self._game_begun = True
            self._post_coins()
        if self._game_begun and self._pending_coins:
            while self._pending_coins and self.questionnaire_end + self._pending_coins[0] <= now:
                self._pending_coins.pop(0)
                self.game, _ = insert_coin(self.game, now)
                self._post_coins()
        self.game, event = game_tick(self.game, now, self.cfg.payout)
        if event is not None:
            self.payouts.append(event.coins)
            self._post_coins()

        # a second fabric pass so zero-latency telemetry lands on this row
        self._deliver(now)

        telem = self._rec_telemetry or {"theta": 0.0, "phi": 0.0, "dl1": 0.0, "dl2": 0.0, "dl3": 0.0}
        row = RecorderRecord(
            t=now,
            heading=math.degrees(self._rec_orientation.heading),
            pitch=math.degrees(self._rec_orientation.pitch),
            roll=math.degrees(self._rec_orientation.roll),
            theta=math.degrees(telem["theta"]),
            phi=math.degrees(telem["phi"]),
            dl1=telem["dl1"] * 1000.0,
            dl2=telem["dl2"] * 1000.0,
            dl3=telem["dl3"] * 1000.0,
            condition=self.cfg.condition,
            stage=stage,
            coins_inserted=self._rec_coins[0],
            coins_returned=self._rec_coins[1],
        )
        self.records.append(row)
        self.k += 1
        self.total_ticks += 1
        return row

    def run(self) -> SessionResult:
        ticks = int(round(self.session_end * self.cfg.limits.loop_rate))
        while self.k < ticks:
            self.tick()
        return SessionResult(
            config=self.cfg,
            records=tuple(self.records),
            game=self.game,
            payouts=tuple(self.payouts),
            gate_open_ticks=self.gate_open_ticks,
            total_ticks=self.total_ticks,
        )


def run_session(cfg: SessionConfig) -> SessionResult:
    """Run one scripted session to completion."""
    return SessionEngine(cfg).run()
