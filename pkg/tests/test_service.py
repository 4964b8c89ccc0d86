"""Tests for the HTTP/WebSocket service: REST wrappers and live sessions."""

import asyncio
import dataclasses
import math

import pytest
from fastapi.testclient import TestClient

from syncbot.harness import Participant, read_recorder_csv, synthetic_response
from syncbot.kinematics import wrap_angle
from syncbot.sensing import OrientationSample, Trace
from syncbot.service import create_app
from syncbot.session import SessionConfig, run_session


class FakeClock:
    """Manually advanced monotonic clock for driving live sessions."""

    def __init__(self):
        self.t = 0.0

    def __call__(self):
        return self.t

    def advance(self, dt):
        self.t += dt


def make_app(record_dir=None, **overrides):
    overrides.setdefault("condition", "synchronized")
    overrides.setdefault("duration", 60.0)
    overrides.setdefault("questionnaire_duration", 5.0)
    clock = FakeClock()
    app = create_app(SessionConfig(**overrides), clock=clock,
                     sleep=lambda _: asyncio.sleep(0), record_dir=record_dir)
    return app, clock


def orientation(heading, pitch, roll=0.0):
    return {"v": 1, "type": "orientation", "heading": heading,
            "pitch": pitch, "roll": roll}


def read_states(ws, until_t, cap=5000):
    """Collect state messages until one reaches ``until_t``."""
    states = []
    for _ in range(cap):
        message = ws.receive_json()
        if message["type"] == "state":
            states.append(message)
            if message["t"] >= until_t:
                return states
    raise AssertionError(f"no state reached t={until_t}")


@pytest.fixture(scope="module")
def client():
    app, _ = make_app()
    return TestClient(app)


class TestRest:

    def test_healthz(self, client):
        assert client.get("/healthz").json() == {"status": "ok"}

    def test_defaults_reports_session_template(self, client):
        body = client.get("/defaults").json()
        assert body["condition"] == "synchronized"
        assert body["limits"]["loop_rate"] == 100.0
        assert body["mapping"]["phi_max_deg"] == 20.0

    def test_simulate_matches_local_run(self, client):
        request = {"condition": "simple", "duration": 2.0,
                   "questionnaire_duration": 0.5, "coin_schedule": [0.2],
                   "seed": 1}
        body = client.post("/simulate", json=request).json()
        local = run_session(SessionConfig(condition="simple", duration=2.0,
                                          questionnaire_duration=0.5,
                                          coin_schedule=(0.2,), seed=1))
        assert len(body["records"]) == len(local.records)
        assert body["game_phase"] == local.game.phase
        assert body["payouts"] == list(local.payouts)
        got = body["records"][-1]
        want = local.records[-1]
        assert got["phi"] == pytest.approx(want.phi, abs=1e-12)
        assert got["coins_returned"] == want.coins_returned

    def test_simulate_rejects_missing_trace(self, client):
        response = client.post("/simulate", json={"condition": "synchronized",
                                                  "duration": 2.0})
        assert response.status_code == 422
        assert "trace" in response.json()["detail"]

    def test_analyze_reports_rows_and_stars(self, client):
        responses = [
            synthetic_response(Participant(f"p{i}{c[0]}", 30, "f"), c, seed=4)
            for c in ("simple", "random", "synchronized")
            for i in range(6)
        ]
        payload = {"responses": [
            {"participant": r.participant, "condition": r.condition,
             "items": list(r.items), "coins": r.coins}
            for r in responses
        ]}
        body = client.post("/analyze", json=payload).json()
        assert len(body["rows"]) == 13
        assert body["rows"][-1]["label"] == "TPA"
        assert body["rows"][-1]["stars"]["simple|synchronized"] != ""
        assert "TPA" in body["text"]
        assert body["degenerate"] is False

    def test_analyze_rejects_single_group(self, client):
        payload = {"responses": [
            {"participant": "a", "condition": "simple", "items": [4] * 12},
            {"participant": "b", "condition": "simple", "items": [5] * 12},
        ]}
        assert client.post("/analyze", json=payload).status_code == 422

    def test_assign_balances_groups(self, client):
        people = [{"participant": f"a{i:02d}", "age": 20 + i,
                   "gender": "mf"[i % 2]} for i in range(51)]
        body = client.post("/assign", json={"participants": people, "k": 3}).json()
        sizes = sorted(len(v) for v in body["groups"].values())
        assert sizes == [17, 17, 17]

    def test_calibrate_random_endpoint(self, client):
        trace = Trace([
            OrientationSample(wrap_angle(2 * math.pi * 0.2 * (k * 0.02)),
                              0.15, 0.0, timestamp=k * 0.02)
            for k in range(50 * 40)
        ])
        body = client.post("/calibrate-random", json={
            "reference_csv": trace.to_csv(), "duration": 60.0, "seed": 3,
        })
        assert body.status_code == 200
        result = body.json()
        assert result["ou_theta"] > 0.0
        assert result["ou_sigma"] > 0.0
        assert result["reference_rms_deg"] == pytest.approx(math.degrees(0.15), abs=0.01)
        assert result["reference_zero_crossing_rate"] == pytest.approx(0.4, abs=0.01)

    def test_calibrate_rejects_still_reference(self, client):
        trace = Trace([OrientationSample(0.0, 0.0, 0.0, timestamp=k * 0.02)
                       for k in range(50 * 40)])
        response = client.post("/calibrate-random",
                               json={"reference_csv": trace.to_csv()})
        assert response.status_code == 422
        assert "no motion" in response.json()["detail"]


class TestLiveSession:
    def test_config_message_first(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            first = ws.receive_json()
            assert first["type"] == "config"
            assert first["v"] == 1
            assert first["condition"] == "synchronized"
            assert first["stage"] == "explore"
            assert first["coin_limit"] == 5

    def test_orientation_stream_converges_to_mapped_pose(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json(orientation(20.0, 10.0))
            clock.advance(1.0)
            states = read_states(ws, 0.95)
            assert states[-1]["phi"] == pytest.approx(10.0, abs=1e-9)
            assert states[-1]["theta"] == pytest.approx(30.0, abs=1e-9)
            assert states[0]["fresh"] is True
            assert states[-1]["fresh"] is False  # single sample went stale

    def test_state_t_monotone_at_broadcast_rate(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            clock.advance(1.0)
            states = read_states(ws, 0.95)
            ts = [s["t"] for s in states]
            assert ts == sorted(ts)
            gaps = {round(b - a, 9) for a, b in zip(ts, ts[1:])}
            assert gaps == {0.03}  # 100 Hz loop broadcast every 3rd tick

    def test_level_orientation_keeps_robot_straight(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            for _ in range(20):
                ws.send_json(orientation(0.0, 0.0))
                clock.advance(0.05)
            states = read_states(ws, 0.95)
            assert all(s["phi"] == 0.0 for s in states)
            tip = states[-1]["backbone"][-1]
            assert tip == pytest.approx([0.0, 0.0, 1.0], abs=1e-6)

    def test_unknown_type_and_malformed_json_keep_session(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "warp"})
            clock.advance(0.03)
            reply = ws.receive_json()
            assert reply["type"] == "error"
            assert "warp" in reply["error"]
            ws.send_text("{not json")
            clock.advance(0.03)
            for _ in range(10):
                reply = ws.receive_json()
                if reply["type"] == "error":
                    break
            assert "JSON" in reply["error"]
            # the session is still alive and ticking
            ws.send_json(orientation(10.0, 5.0))
            clock.advance(1.0)
            states = read_states(ws, 1.0)
            assert states[-1]["phi"] == pytest.approx(5.0, abs=1e-9)

    def test_wrong_protocol_version_rejected(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 2, "type": "coin"})
            clock.advance(0.03)
            reply = ws.receive_json()
            assert reply["type"] == "error"
            assert "version" in reply["error"]

    def test_two_coins_idle_ten_seconds_pays_three(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "set_stage", "stage": "game"})
            clock.advance(0.05)
            ws.send_json({"v": 1, "type": "coin"})
            clock.advance(0.05)
            ws.send_json({"v": 1, "type": "coin"})
            clock.advance(10.2)
            payout = None
            for _ in range(2000):
                message = ws.receive_json()
                if message["type"] == "payout":
                    payout = message
                    break
            assert payout == {"v": 1, "type": "payout", "coins": 3, "inserted": 2}

    def test_coin_outside_game_stage_rejected(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "coin"})  # explore stage: no acceptor
            clock.advance(0.03)
            reply = ws.receive_json()
            assert reply["type"] == "error"
            assert "coin" in reply["error"]

    def test_client_silence_holds_pose(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            for _ in range(100):
                ws.send_json(orientation(25.0, 12.0))
                clock.advance(0.02)
            clock.advance(2.0)
            states = read_states(ws, 3.9)
            frozen = [s["phi"] for s in states if s["t"] >= 2.6]
            assert len(frozen) > 30
            assert max(frozen) - min(frozen) == 0.0
            assert frozen[-1] == pytest.approx(12.0, abs=1e-9)
            assert states[-1]["fresh"] is False

    def test_sessions_isolated(self):
        app, clock = make_app()
        client = TestClient(app)
        with client.websocket_connect("/ws") as a, \
                client.websocket_connect("/ws") as b:
            a.receive_json()
            b.receive_json()
            for _ in range(50):
                a.send_json(orientation(-40.0, 15.0))
                clock.advance(0.02)
            state_a = read_states(a, 0.9)[-1]
            state_b = read_states(b, 0.9)[-1]
            assert state_a["phi"] == pytest.approx(15.0, abs=1e-9)
            assert state_a["theta"] == pytest.approx(-30.0, abs=1e-9)
            assert state_b["phi"] == 0.0
            assert state_b["coins_inserted"] == 0

    def test_set_condition_restarts_session(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            clock.advance(0.5)
            read_states(ws, 0.4)
            ws.send_json({"v": 1, "type": "set_condition", "condition": "simple"})
            clock.advance(0.03)
            for _ in range(100):
                message = ws.receive_json()
                if message["type"] == "config":
                    break
            assert message["condition"] == "simple"
            clock.advance(0.5)
            states = read_states(ws, 0.4)
            assert states[0]["t"] < 0.4  # clock restarted
            assert states[-1]["condition"] == "simple"
            assert states[-1]["phi"] > 0.0  # pattern drives without a client

    def test_set_condition_failure_keeps_session(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json(orientation(20.0, 10.0))
            clock.advance(0.2)
            read_states(ws, 0.15)
            ws.send_json({"v": 1, "type": "set_condition", "condition": "replay"})
            clock.advance(0.03)
            reply = ws.receive_json()
            while reply["type"] == "state":
                reply = ws.receive_json()
            assert reply["type"] == "error"
            clock.advance(0.2)
            states = read_states(ws, 0.35)
            assert states[-1]["condition"] == "synchronized"
            assert states[-1]["t"] > 0.3  # same session, same clock

    def test_reset_clears_game_and_clock(self):
        app, clock = make_app()
        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_json({"v": 1, "type": "set_stage", "stage": "game"})
            clock.advance(0.05)
            ws.send_json({"v": 1, "type": "coin"})
            clock.advance(0.5)
            states = read_states(ws, 0.45)
            assert states[-1]["coins_inserted"] == 1
            ws.send_json({"v": 1, "type": "reset"})
            clock.advance(0.03)
            for _ in range(100):
                message = ws.receive_json()
                if message["type"] == "config":
                    break
            assert message["stage"] == "explore"
            clock.advance(0.1)
            states = read_states(ws, 0.05)
            assert states[-1]["coins_inserted"] == 0
            assert states[-1]["t"] < 0.2


class TestRecordReplayEquivalence:
    def test_live_recording_replays_through_batch_harness(self, tmp_path):
        app, clock = make_app(record_dir=tmp_path)
        steps = 300  # 6 s at 50 Hz

        def sway(k):
            t = k * 0.02
            return (math.degrees(0.5 * math.sin(0.7 * t)),
                    math.degrees(0.22 * math.sin(1.3 * t + 0.5)),
                    math.degrees(0.1 * math.sin(2.1 * t)))

        with TestClient(app).websocket_connect("/ws") as ws:
            ws.receive_json()
            for k in range(steps):
                heading, pitch, roll = sway(k)
                ws.send_json(orientation(heading, pitch, roll))
                clock.advance(0.02)
            read_states(ws, steps * 0.02 - 0.1)

        recorded = read_recorder_csv(sorted(tmp_path.glob("*.csv"))[0])
        assert len(recorded) == steps * 2  # 100 Hz rows

        trace = Trace([
            OrientationSample(math.radians(r.heading), math.radians(r.pitch),
                              math.radians(r.roll), timestamp=r.t)
            for r in recorded
        ])
        cfg = dataclasses.replace(
            SessionConfig(condition="synchronized",
                          duration=recorded[-1].t + 0.01,
                          questionnaire_duration=0.0, game_duration=0.0),
            trace=trace)
        batch = run_session(cfg)
        n = min(len(recorded), len(batch.records))
        assert n > steps
        for i in range(n):
            assert abs(recorded[i].phi - batch.records[i].phi) < 1e-6
            if batch.records[i].phi > 0.5:
                assert abs(recorded[i].theta - batch.records[i].theta) < 1e-6
