"""Smoke tests for the plotting helpers (file emission only)."""

from syncbot.analysis import report_table
from syncbot.harness import Participant, synthetic_response
from syncbot.plots import plot_bend_angle, plot_cable_velocities, plot_report
from syncbot.session import SessionConfig, run_session


def test_plots_emit_png_files(tmp_path):
    cfg = SessionConfig(condition="simple", duration=2.0,
                        questionnaire_duration=0.5, coin_schedule=(0.2,), seed=1)
    result = run_session(cfg)
    bend = tmp_path / "bend.png"
    vel = tmp_path / "vel.png"
    plot_bend_angle(result.records, bend)
    plot_cable_velocities(result.records, vel)
    assert bend.stat().st_size > 1000
    assert vel.stat().st_size > 1000


def test_report_plot(tmp_path):
    responses = [
        synthetic_response(Participant(f"p{i}{c[0]}", 30, "f"), c, seed=4)
        for c in ("simple", "random", "synchronized")
        for i in range(6)
    ]
    report = report_table(responses)
    out = tmp_path / "report.png"
    plot_report(report, out)
    assert out.stat().st_size > 1000
