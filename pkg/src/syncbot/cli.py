"""Command-line front end for the simulator service.

Every data command is a thin HTTP client: by default it mounts the service
in-process (no socket), and ``--server <url>`` points it at a running
gateway instead, so the CLI always exercises the same wire contract a
remote client sees. ``serve`` hosts the gateway itself.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx
import uvicorn

from .analysis import Report, ReportRow, read_responses
from .config import load_session_config
from .harness import read_participants_csv, write_recorder_csv
from .plots import plot_bend_angle, plot_cable_velocities, plot_report
from .session import RecorderRecord


def _post(server: Optional[str], path: str, payload: dict) -> httpx.Response:
    """POST to a running gateway, or to an in-process app when none is given."""
    if server is not None:
        try:
            with httpx.Client(base_url=server, timeout=600.0) as client:
                return client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise click.ClickException(f"server request failed: {exc}")

    from .service import create_app

    async def _call() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://service.internal") as client:
            return await client.post(path, json=payload)

    return asyncio.run(_call())


def _payload(response: httpx.Response) -> dict:
    """Decode a service reply, turning error statuses into CLI errors."""
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(str(detail))
    return response.json()


def _report_from_wire(data: dict) -> Report:
    """Rebuild a report object from its wire form (for chart rendering)."""
    rows = tuple(
        ReportRow(
            label=r["label"],
            medians=r["medians"],
            iqrs=r["iqrs"],
            h=r["h"],
            p_value=r["p_value"],
            eta=r["eta"],
            stars={tuple(key.split("|", 1)): s for key, s in r["stars"].items()},
            degenerate=r["degenerate"],
        )
        for r in data["rows"]
    )
    return Report(conditions=tuple(data["conditions"]), rows=rows)


@click.group()
def main() -> None:
    """Motion-synchronization study toolkit."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Session config file (see README for keys).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for recorder CSV, plots, and summary.")
@click.option("--server", default=None, help="Gateway URL (default: in-process).")
def simulate(config_path: str, out_dir: str, server: Optional[str]) -> None:
    """Run one scripted session and write its artifacts."""
    from .service import simulate_request_from_config

    cfg = load_session_config(config_path)
    request = simulate_request_from_config(cfg)
    data = _payload(_post(server, "/simulate", request.model_dump(mode="json")))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [RecorderRecord(**row) for row in data["records"]]
    write_recorder_csv(out / "recorder.csv", records)
    plot_bend_angle(records, out / "bend.png")
    plot_cable_velocities(records, out / "velocities.png")
    summary = {key: data[key] for key in ("game_phase", "coins_inserted",
                                          "coins_returned", "payouts",
                                          "gate_open_fraction")}
    summary["condition"] = cfg.condition
    summary["rows"] = len(records)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    click.echo(f"condition={cfg.condition} rows={len(records)} "
               f"payouts={data['payouts']} "
               f"gate_open={data['gate_open_fraction']:.3f}")
    click.echo(f"artifacts written to {out}")


@main.command()
@click.option("--responses", "responses_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Responses CSV (participant,condition,i1..i12,coins).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for the report as text, CSV, and chart.")
@click.option("--strict", is_flag=True,
              help="Exit nonzero when any report row is degenerate.")
@click.option("--server", default=None, help="Gateway URL (default: in-process).")
def analyze(responses_path: str, out_dir: str, strict: bool,
            server: Optional[str]) -> None:
    """Score a responses CSV and emit the condition-comparison report."""
    rows = [
        {"participant": r.participant, "condition": r.condition,
         "items": list(r.items), "coins": r.coins}
        for r in read_responses(responses_path)
    ]
    data = _payload(_post(server, "/analyze", {"responses": rows}))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(data["text"])
    (out / "report.csv").write_text(data["csv"])
    plot_report(_report_from_wire(data), out / "report.png")

    click.echo(data["text"].rstrip("\n"))
    click.echo(f"artifacts written to {out}")
    if data["degenerate"]:
        click.echo("warning: degenerate data in at least one row", err=True)
        if strict:
            sys.exit(2)


@main.command()
@click.option("--participants", "participants_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Participants CSV (participant,age,gender).")
@click.option("-k", "k", default=3, show_default=True, help="Number of groups.")
@click.option("--server", default=None, help="Gateway URL (default: in-process).")
def assign(participants_path: str, k: int, server: Optional[str]) -> None:
    """Split participants into balanced condition groups."""
    people = read_participants_csv(participants_path)
    payload = {
        "participants": [{"participant": p.ident, "age": p.age, "gender": p.gender}
                         for p in people],
        "k": k,
    }
    data = _payload(_post(server, "/assign", payload))
    for condition, members in data["groups"].items():
        click.echo(f"{condition}: {' '.join(members)}")


@main.command("calibrate-random")
@click.option("--reference", "reference_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Reference trace CSV (t,heading,pitch,roll in degrees).")
@click.option("--rate-hz", default=50.0, show_default=True,
              help="Resampling rate for the reference.")
@click.option("--duration", default=300.0, show_default=True,
              help="Synthesis horizon the fit must match over (s).")
@click.option("--tolerance", default=0.1, show_default=True,
              help="Relative RMS matching tolerance.")
@click.option("--seed", default=0, show_default=True, help="Synthesis seed.")
@click.option("--server", default=None, help="Gateway URL (default: in-process).")
def calibrate_random(reference_path: str, rate_hz: float, duration: float,
                     tolerance: float, seed: int, server: Optional[str]) -> None:
    """Fit sway-process parameters so random motion matches a reference."""
    payload = {
        "reference_csv": Path(reference_path).read_text(),
        "rate_hz": rate_hz,
        "duration": duration,
        "tolerance": tolerance,
        "seed": seed,
    }
    data = _payload(_post(server, "/calibrate-random", payload))
    click.echo(f"ou_theta={data['ou_theta']:.6f}")
    click.echo(f"ou_sigma={data['ou_sigma']:.6f}")
    click.echo(f"reference_rms_deg={data['reference_rms_deg']:.3f}")
    click.echo(f"reference_zero_crossing_rate={data['reference_zero_crossing_rate']:.3f}")


@main.command()
@click.option("--port", default=8000, show_default=True, help="TCP port to bind.")
@click.option("--host", default="127.0.0.1", show_default=True, help="Bind address.")
@click.option("--record", "record_dir", default=None, type=click.Path(file_okay=False),
              help="Persist each live session as recorder CSV in this directory.")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Session defaults for live sessions.")
def serve(port: int, host: str, record_dir: Optional[str],
          config_path: Optional[str]) -> None:
    """Host the HTTP/WebSocket gateway."""
    from .service import create_app

    defaults = load_session_config(config_path) if config_path else None
    app = create_app(defaults,
                     record_dir=Path(record_dir) if record_dir else None)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
