"""HTTP and WebSocket service exposing the simulator to interactive clients.

REST endpoints wrap the batch tools (simulate, analyze, assign,
calibrate-random); the ``/ws`` endpoint runs one live session per client,
clocked against the host monotonic clock quantized to the control loop rate.

Wire protocol (one JSON object per WebSocket text frame, all messages carry
``v: 1``):

Client -> server
    ``{"v":1,"type":"orientation","heading":deg,"pitch":deg,"roll":deg}``
    ``{"v":1,"type":"coin"}``
    ``{"v":1,"type":"set_condition","condition":"simple|random|synchronized|replay"}``
    ``{"v":1,"type":"set_stage","stage":"explore|questionnaire|game"}``
    ``{"v":1,"type":"reset"}``

Server -> client
    ``config``  session parameters (sent on connect and after condition changes)
    ``state``   t, theta, phi [deg], 16-point backbone polyline [m], cable
                deltas [mm], stage, game phase, coin counts, freshness flag;
                emitted at the broadcast rate with strictly increasing t
    ``payout``  coins returned when the trust game decides
    ``error``   problem description; the session itself is unaffected

Unknown message types, malformed JSON, and rejected coins produce ``error``
replies and leave the connection open.
"""

from __future__ import annotations

import asyncio
import csv
import io
import json
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel, Field

from .analysis import LikertResponse, format_report, report_csv_rows, report_table
from .harness import Participant, assign_conditions, write_recorder_csv
from .kinematics import RobotGeometry, backbone_points
from .netsim import LinkModel, freshness_gate
from .patterns import PATTERN_KINDS, PatternConfig, calibrate_random, motion_stats
from .sensing import MappingConfig, OrientationSample, Trace, map_orientation
from .session import STAGES, RecorderRecord, SessionConfig, SessionEngine, run_session
from .trustgame import DECISION_IDLE_SECONDS, MAX_COINS

PROTOCOL_VERSION = 1
DEFAULT_BROADCAST_RATE = 30.0


# --- REST models -----------------------------------------------------------


class LinkSpec(BaseModel):
    drop_probability: float = 0.0
    latency: float = 0.0
    jitter: float = 0.0
    seed: int = 0


class LimitsSpec(BaseModel):
    v_max: float = 0.2512
    a_max: float = 0.628
    loop_rate: float = 100.0


class MappingSpec(BaseModel):
    rotation_offset_deg: float = math.degrees(MappingConfig.rotation_offset)
    gain: float = MappingConfig.gain
    phi_max_deg: float = math.degrees(MappingConfig.phi_max)
    theta_source: str = MappingConfig.theta_source


class GeometrySpec(BaseModel):
    l0: float = RobotGeometry.l0
    r: float = RobotGeometry.r
    phi_max_deg: float = math.degrees(RobotGeometry.phi_max)


class PatternSpec(BaseModel):
    kind: Optional[str] = None
    seed: Optional[int] = None
    simple_amplitude_deg: float = 15.0
    simple_frequency: float = 0.25
    simple_direction_deg: float = 0.0
    ou_theta: float = PatternConfig.ou_theta
    ou_sigma: float = PatternConfig.ou_sigma


class SimulateRequest(BaseModel):
    condition: Literal["simple", "random", "synchronized", "replay"]
    duration: float = 180.0
    questionnaire_duration: float = 10.0
    game_duration: Optional[float] = None
    seed: int = 0
    coin_schedule: Optional[List[float]] = None
    trace_csv: Optional[str] = None
    sensor_rate: float = 50.0
    staleness_timeout: float = 0.5
    steps_per_meter: float = 40000.0
    link: LinkSpec = Field(default_factory=LinkSpec)
    limits: LimitsSpec = Field(default_factory=LimitsSpec)
    mapping: MappingSpec = Field(default_factory=MappingSpec)
    geometry: GeometrySpec = Field(default_factory=GeometrySpec)
    pattern: Optional[PatternSpec] = None


class RecorderRow(BaseModel):
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


class SimulateResponse(BaseModel):
    records: List[RecorderRow]
    game_phase: str
    coins_inserted: int
    coins_returned: int
    payouts: List[int]
    gate_open_fraction: float


class ResponseRow(BaseModel):
    participant: str
    condition: str
    items: List[int] = Field(min_length=12, max_length=12)
    coins: Optional[int] = None


class AnalyzeRequest(BaseModel):
    responses: List[ResponseRow]


class ReportRowModel(BaseModel):
    label: str
    medians: Dict[str, float]
    iqrs: Dict[str, float]
    h: float
    p_value: float
    eta: float
    stars: Dict[str, str]
    degenerate: bool


class AnalyzeResponse(BaseModel):
    rows: List[ReportRowModel]
    conditions: List[str]
    text: str
    csv: str
    degenerate: bool


class ParticipantRow(BaseModel):
    participant: str
    age: int
    gender: str


class AssignRequest(BaseModel):
    participants: List[ParticipantRow]
    k: int = 3
    conditions: Optional[List[str]] = None


class AssignResponse(BaseModel):
    groups: Dict[str, List[str]]


class CalibrateRequest(BaseModel):
    reference_csv: str
    rate_hz: float = 50.0
    duration: float = 300.0
    tolerance: float = 0.1
    seed: int = 0


class CalibrateResponse(BaseModel):
    ou_theta: float
    ou_sigma: float
    reference_rms_deg: float
    reference_zero_crossing_rate: float


# --- conversions -------------------------------------------------------------


def session_config_from_request(req: SimulateRequest) -> SessionConfig:
    """Build a core session config from its wire representation."""
    from .actuation import MotionLimits

    trace = Trace.from_csv(req.trace_csv) if req.trace_csv else None
    pattern = None
    if req.pattern is not None:
        pattern = PatternConfig(
            kind=req.pattern.kind or req.condition,
            seed=req.seed if req.pattern.seed is None else req.pattern.seed,
            simple_amplitude=math.radians(req.pattern.simple_amplitude_deg),
            simple_frequency=req.pattern.simple_frequency,
            simple_direction=math.radians(req.pattern.simple_direction_deg),
            ou_theta=req.pattern.ou_theta,
            ou_sigma=req.pattern.ou_sigma,
            replay_trace=trace if (req.pattern.kind or req.condition) == "replay" else None,
        )
    return SessionConfig(
        condition=req.condition,
        duration=req.duration,
        questionnaire_duration=req.questionnaire_duration,
        game_duration=req.game_duration,
        seed=req.seed,
        trace=trace,
        coin_schedule=None if req.coin_schedule is None else tuple(req.coin_schedule),
        link=LinkModel(
            drop_probability=req.link.drop_probability,
            latency=req.link.latency,
            jitter=req.link.jitter,
            seed=req.link.seed,
        ),
        geometry=RobotGeometry(
            l0=req.geometry.l0,
            r=req.geometry.r,
            phi_max=math.radians(req.geometry.phi_max_deg),
        ),
        limits=MotionLimits(
            v_max=req.limits.v_max,
            a_max=req.limits.a_max,
            loop_rate=req.limits.loop_rate,
        ),
        mapping=MappingConfig(
            rotation_offset=math.radians(req.mapping.rotation_offset_deg),
            gain=req.mapping.gain,
            phi_max=math.radians(req.mapping.phi_max_deg),
            theta_source=req.mapping.theta_source,
        ),
        pattern=pattern,
        sensor_rate=req.sensor_rate,
        staleness_timeout=req.staleness_timeout,
        steps_per_meter=req.steps_per_meter,
    )


def simulate_request_from_config(cfg: SessionConfig) -> SimulateRequest:
    """Wire representation of a session config (inverse of the above)."""
    pattern = cfg.pattern_config()
    return SimulateRequest(
        condition=cfg.condition,
        duration=cfg.duration,
        questionnaire_duration=cfg.questionnaire_duration,
        game_duration=cfg.game_duration,
        seed=cfg.seed,
        coin_schedule=None if cfg.coin_schedule is None else list(cfg.coin_schedule),
        trace_csv=cfg.trace.to_csv() if cfg.trace is not None else None,
        sensor_rate=cfg.sensor_rate,
        staleness_timeout=cfg.staleness_timeout,
        steps_per_meter=cfg.steps_per_meter,
        link=LinkSpec(
            drop_probability=cfg.link.drop_probability,
            latency=cfg.link.latency,
            jitter=cfg.link.jitter,
            seed=cfg.link.seed,
        ),
        limits=LimitsSpec(
            v_max=cfg.limits.v_max,
            a_max=cfg.limits.a_max,
            loop_rate=cfg.limits.loop_rate,
        ),
        mapping=MappingSpec(
            rotation_offset_deg=math.degrees(cfg.mapping.rotation_offset),
            gain=cfg.mapping.gain,
            phi_max_deg=math.degrees(cfg.mapping.phi_max),
            theta_source=cfg.mapping.theta_source,
        ),
        geometry=GeometrySpec(
            l0=cfg.geometry.l0,
            r=cfg.geometry.r,
            phi_max_deg=math.degrees(cfg.geometry.phi_max),
        ),
        pattern=PatternSpec(
            kind=pattern.kind,
            seed=pattern.seed,
            simple_amplitude_deg=math.degrees(pattern.simple_amplitude),
            simple_frequency=pattern.simple_frequency,
            simple_direction_deg=math.degrees(pattern.simple_direction),
            ou_theta=pattern.ou_theta,
            ou_sigma=pattern.ou_sigma,
        ),
    )


def _row_model(row: RecorderRecord) -> RecorderRow:
    return RecorderRow(**row.__dict__)


# --- live sessions -----------------------------------------------------------


class _LiveSession:
    """One client's real-time session: engine, clock mapping, and recording."""

    def __init__(self, defaults: SessionConfig, *, broadcast_rate: float,
                 record_dir: Optional[Path], ident: int):
        self.defaults = defaults
        self.record_dir = record_dir
        self.ident = ident
        self.segment = 0
        self.broadcast_every = max(1, int(round(defaults.limits.loop_rate / broadcast_rate)))
        self.engine = self._build(defaults.condition)
        self._sent_payouts = 0

    def _build(self, condition: str) -> SessionEngine:
        pattern = self.defaults.pattern
        if pattern is not None and pattern.kind != condition:
            pattern = None
        cfg = replace(self.defaults, condition=condition, pattern=pattern,
                      coin_schedule=())
        return SessionEngine(cfg, live=True)

    def switch(self, condition: str) -> None:
        engine = self._build(condition)  # may raise; old session stays intact
        self.flush_recording()
        self.engine = engine
        self._sent_payouts = 0

    def flush_recording(self) -> None:
        if self.record_dir is not None and self.engine.records:
            self.record_dir.mkdir(parents=True, exist_ok=True)
            path = self.record_dir / f"session-{self.ident:03d}-{self.segment:02d}.csv"
            write_recorder_csv(path, self.engine.records)
            self.segment += 1

    def config_message(self) -> dict:
        cfg = self.engine.cfg
        return {
            "v": PROTOCOL_VERSION,
            "type": "config",
            "condition": cfg.condition,
            "conditions": list(PATTERN_KINDS),
            "stages": list(STAGES),
            "stage": self.engine.stage(),
            "loop_rate": cfg.limits.loop_rate,
            "broadcast_rate": cfg.limits.loop_rate / self.broadcast_every,
            "phi_max_deg": math.degrees(cfg.mapping.phi_max),
            "l0": cfg.geometry.l0,
            "coin_limit": MAX_COINS,
            "decision_idle_seconds": DECISION_IDLE_SECONDS,
        }

    def state_message(self, row: RecorderRecord) -> dict:
        engine = self.engine
        backbone = backbone_points(engine.bend, engine.cfg.geometry, 16)
        fresh = freshness_gate(engine.robot_latest, engine.now,
                               engine.cfg.staleness_timeout)
        return {
            "v": PROTOCOL_VERSION,
            "type": "state",
            "t": row.t,
            "theta": row.theta,
            "phi": row.phi,
            "backbone": [[round(c, 6) for c in p] for p in backbone.tolist()],
            "dl": [row.dl1, row.dl2, row.dl3],
            "condition": row.condition,
            "stage": row.stage,
            "game_phase": engine.game.phase,
            "coins_inserted": engine.game.inserted,
            "coins_returned": engine.game.coins_returned,
            "fresh": fresh,
        }

    def drain_payouts(self) -> List[dict]:
        out = []
        while self._sent_payouts < len(self.engine.payouts):
            coins = self.engine.payouts[self._sent_payouts]
            self._sent_payouts += 1
            out.append({
                "v": PROTOCOL_VERSION,
                "type": "payout",
                "coins": coins,
                "inserted": self.engine.game.inserted,
            })
        return out

    def apply(self, message: dict) -> Tuple[List[dict], bool]:
        """Apply one client message; returns (replies, clock_reset)."""
        kind = message.get("type")
        version = message.get("v", PROTOCOL_VERSION)
        if version != PROTOCOL_VERSION:
            return [_error(f"unsupported protocol version {version!r}")], False
        if kind == "orientation":
            try:
                sample = OrientationSample(
                    heading=math.radians(float(message["heading"])),
                    pitch=math.radians(float(message["pitch"])),
                    roll=math.radians(float(message["roll"])),
                    timestamp=self.engine.now,
                )
            except (KeyError, TypeError, ValueError) as exc:
                return [_error(f"bad orientation message: {exc}")], False
            self.engine.inject_orientation(sample)
            return [], False
        if kind == "coin":
            accepted = self.engine.insert_coin()
            if not accepted:
                return [_error("coin rejected")], False
            return [], False
        if kind == "set_stage":
            try:
                self.engine.set_stage(str(message.get("stage")))
            except ValueError as exc:
                return [_error(str(exc))], False
            return [], False
        if kind == "set_condition":
            condition = message.get("condition")
            try:
                self.switch(str(condition))
            except (ValueError, TypeError) as exc:
                return [_error(f"cannot switch condition: {exc}")], False
            return [self.config_message()], True
        if kind == "reset":
            self.switch(self.engine.cfg.condition)
            return [self.config_message()], True
        return [_error(f"unknown message type {kind!r}")], False


def _error(text: str) -> dict:
    return {"v": PROTOCOL_VERSION, "type": "error", "error": text}


# --- application factory -----------------------------------------------------


def create_app(defaults: Optional[SessionConfig] = None, *,
               broadcast_rate: float = DEFAULT_BROADCAST_RATE,
               record_dir: Optional[Path] = None,
               clock=None, sleep=None) -> FastAPI:
    """Build the service; ``clock`` and ``sleep`` are injectable for tests."""
    if defaults is None:
        defaults = SessionConfig(condition="synchronized")
    clock = time.monotonic if clock is None else clock
    sleep = asyncio.sleep if sleep is None else sleep
    record_dir = Path(record_dir) if record_dir is not None else None

    app = FastAPI(title="syncbot gateway")
    app.state.session_counter = 0

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/defaults")
    def get_defaults():
        return simulate_request_from_config(defaults).model_dump()

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        try:
            cfg = session_config_from_request(req)
            result = run_session(cfg)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return SimulateResponse(
            records=[_row_model(r) for r in result.records],
            game_phase=result.game.phase,
            coins_inserted=result.game.inserted,
            coins_returned=result.game.coins_returned,
            payouts=list(result.payouts),
            gate_open_fraction=result.gate_open_ticks / max(1, result.total_ticks),
        )

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest):
        responses = [
            LikertResponse(participant=r.participant, condition=r.condition,
                           items=tuple(r.items), coins=r.coins)
            for r in req.responses
        ]
        try:
            report = report_table(responses)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        rows = [
            ReportRowModel(
                label=row.label,
                medians=dict(row.medians),
                iqrs=dict(row.iqrs),
                h=row.h,
                p_value=row.p_value,
                eta=row.eta,
                stars={f"{a}|{b}": s for (a, b), s in row.stars.items()},
                degenerate=row.degenerate,
            )
            for row in report.rows
        ]
        buffer = io.StringIO()
        csv.writer(buffer, lineterminator="\n").writerows(report_csv_rows(report))
        return AnalyzeResponse(rows=rows, conditions=list(report.conditions),
                               text=format_report(report),
                               csv=buffer.getvalue(),
                               degenerate=report.degenerate)

    @app.post("/assign", response_model=AssignResponse)
    def assign(req: AssignRequest):
        people = [Participant(r.participant, r.age, r.gender) for r in req.participants]
        try:
            groups = assign_conditions(people, k=req.k, conditions=req.conditions)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return AssignResponse(
            groups={c: [p.ident for p in g] for c, g in groups.items()})

    @app.post("/calibrate-random", response_model=CalibrateResponse)
    def calibrate(req: CalibrateRequest):
        try:
            reference = Trace.from_csv(req.reference_csv)
            samples = [reference.sample_at(k / req.rate_hz)[0]
                       for k in range(int(reference.duration * req.rate_hz))]
            mapped = [map_orientation(s, MappingConfig()) for s in samples]
            base = PatternConfig(kind="random", seed=req.seed)
            calibrated = calibrate_random(mapped, base, rate_hz=req.rate_hz,
                                          duration=req.duration,
                                          tolerance=req.tolerance)
            rms, zcr = motion_stats(mapped, req.rate_hz)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return CalibrateResponse(
            ou_theta=calibrated.ou_theta,
            ou_sigma=calibrated.ou_sigma,
            reference_rms_deg=math.degrees(rms),
            reference_zero_crossing_rate=zcr,
        )

    @app.websocket("/ws")
    async def live(ws: WebSocket):
        await ws.accept()
        app.state.session_counter += 1
        session = _LiveSession(defaults, broadcast_rate=broadcast_rate,
                               record_dir=record_dir,
                               ident=app.state.session_counter)
        queue: asyncio.Queue = asyncio.Queue()

        async def reader():
            try:
                while True:
                    await queue.put(await ws.receive_text())
            except WebSocketDisconnect:
                await queue.put(None)

        reader_task = asyncio.create_task(reader())
        origin = clock()
        tick_interval = session.engine.dt
        try:
            await ws.send_json(session.config_message())
            alive = True
            while alive:
                # Read the tick target before draining: any frame already on
                # the wire when the clock reached `target` is then applied
                # before the ticks that cover it.  The drain window uses real
                # time, so it stays effective under an injected test clock.
                target = int((clock() - origin) * session.engine.cfg.limits.loop_rate + 1e-9)
                for _ in range(200):
                    try:
                        text = await asyncio.wait_for(queue.get(), timeout=0.0005)
                    except asyncio.TimeoutError:
                        break
                    if text is None:
                        alive = False
                        break
                    try:
                        message = _parse(text)
                    except ValueError as exc:
                        await ws.send_json(_error(str(exc)))
                        continue
                    replies, clock_reset = session.apply(message)
                    if clock_reset:
                        origin = clock()
                        target = 0
                    for reply in replies:
                        await ws.send_json(reply)
                if not alive:
                    break
                ticked = session.engine.k < target
                while session.engine.k < target:
                    row = session.engine.tick()
                    for payout in session.drain_payouts():
                        await ws.send_json(payout)
                    if session.engine.k % session.broadcast_every == 0:
                        await ws.send_json(session.state_message(row))
                if not ticked:
                    await sleep(tick_interval / 2)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()
            session.flush_recording()

    return app


def _parse(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON: {exc.msg}")
    if not isinstance(obj, dict):
        raise ValueError("message must be a JSON object")
    return obj
