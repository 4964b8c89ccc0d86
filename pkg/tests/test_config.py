"""Tests for config-file parsing and the seed environment override."""

import math

import pytest

from syncbot.config import SEED_ENV_VAR, load_session_config
from syncbot.sensing import OrientationSample, Trace
from syncbot.session import SessionConfig, run_session

FULL = """\
[session]
condition = synchronized
duration = 12.5
questionnaire_duration = 4
game_duration = 30
seed = 42
trace = sway.csv
coin_schedule = 1.0, 2.5, 4.0
sensor_rate = 25
staleness_timeout = 0.4
steps_per_meter = 20000

[link]
drop_probability = 0.1
latency = 0.02
jitter = 0.005
seed = 7

[mapping]
rotation_offset_deg = 12
gain = 1.5
phi_max_deg = 18
theta_source = heading

[limits]
v_max = 0.3
a_max = 0.7
loop_rate = 100

[geometry]
l0 = 0.5
r = 0.04

[scene]
table = wood
lighting = dim
"""


def _write_trace(directory, name="sway.csv", n=100):
    trace = Trace([
        OrientationSample(0.1 * math.sin(0.5 * k * 0.02), 0.05, 0.0,
                          timestamp=k * 0.02)
        for k in range(n)
    ])
    trace.save(directory / name)
    return trace


class TestLoadSessionConfig:
    def test_full_file(self, tmp_path):
        _write_trace(tmp_path)
        path = tmp_path / "session.ini"
        path.write_text(FULL)
        cfg = load_session_config(path, env={})
        assert cfg.condition == "synchronized"
        assert cfg.duration == 12.5
        assert cfg.questionnaire_duration == 4.0
        assert cfg.game_duration == 30.0
        assert cfg.seed == 42
        assert cfg.coin_schedule == (1.0, 2.5, 4.0)
        assert cfg.sensor_rate == 25.0
        assert cfg.staleness_timeout == 0.4
        assert cfg.steps_per_meter == 20000
        assert cfg.link.drop_probability == 0.1
        assert cfg.link.latency == 0.02
        assert cfg.mapping.rotation_offset == pytest.approx(math.radians(12))
        assert cfg.mapping.phi_max == pytest.approx(math.radians(18))
        assert cfg.limits.v_max == 0.3
        assert cfg.geometry.l0 == 0.5
        assert cfg.trace is not None and len(cfg.trace.samples) == 100
        assert cfg.scene == (("lighting", "dim"), ("table", "wood"))

    def test_minimal_file_uses_defaults(self, tmp_path):
        path = tmp_path / "min.ini"
        path.write_text("[session]\ncondition = simple\n")
        cfg = load_session_config(path, env={})
        ref = SessionConfig(condition="simple")
        assert cfg.duration == ref.duration
        assert cfg.seed == ref.seed
        assert cfg.limits == ref.limits
        assert cfg.mapping == ref.mapping
        assert cfg.geometry == ref.geometry
        assert cfg.pattern_config() == ref.pattern_config()

    def test_loaded_config_runs(self, tmp_path):
        _write_trace(tmp_path, n=1200)
        path = tmp_path / "session.ini"
        path.write_text(
            "[session]\ncondition = synchronized\nduration = 2\n"
            "questionnaire_duration = 0\ngame_duration = 0\ntrace = sway.csv\n"
        )
        cfg = load_session_config(path, env={})
        result = run_session(cfg)
        assert result.records[-1].phi > 0.0

    def test_env_seed_override(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[session]\ncondition = random\nseed = 3\n")
        assert load_session_config(path, env={}).seed == 3
        assert load_session_config(path, env={SEED_ENV_VAR: "99"}).seed == 99
        with pytest.raises(ValueError, match=SEED_ENV_VAR):
            load_session_config(path, env={SEED_ENV_VAR: "not-a-number"})

    def test_bad_value_reports_section_and_key(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[session]\ncondition = simple\nduration = fast\n")
        with pytest.raises(ValueError, match=r"\[session\] duration"):
            load_session_config(path, env={})

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_session_config(tmp_path / "nope.ini", env={})

    def test_trace_path_relative_to_config(self, tmp_path):
        sub = tmp_path / "configs"
        sub.mkdir()
        _write_trace(sub, name="local.csv")
        path = sub / "s.ini"
        path.write_text(
            "[session]\ncondition = replay\ntrace = local.csv\n")
        cfg = load_session_config(path, env={})
        assert cfg.trace is not None
        assert cfg.pattern_config().replay_trace is cfg.trace

    def test_pattern_section_overrides(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text(
            "[session]\ncondition = simple\nseed = 5\n"
            "[pattern]\nsimple_amplitude_deg = 10\nsimple_frequency = 0.5\n"
        )
        cfg = load_session_config(path, env={})
        pattern = cfg.pattern_config()
        assert pattern.kind == "simple"
        assert pattern.seed == 5
        assert pattern.simple_amplitude == pytest.approx(math.radians(10))
        assert pattern.simple_frequency == 0.5

    def test_inline_comments_ignored(self, tmp_path):
        path = tmp_path / "s.ini"
        path.write_text("[session]\ncondition = simple\nduration = 9  # short\n")
        cfg = load_session_config(path, env={})
        assert cfg.duration == 9.0
