"""Batch experiment runner: recorder files, condition assignment, studies.

A "study" here is the full simulated protocol: assign participants to
conditions balanced by gender and age, run one session per participant,
join the injected questionnaire answers and coin counts, and emit the
responses CSV plus the statistics report.  Questionnaire answers are
synthetic by design -- humans cannot be simulated, so the generator makes
its ground truth explicit instead of pretending otherwise.
"""

from __future__ import annotations

import csv
import itertools
import math
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .analysis import (
    CONDITIONS,
    LikertResponse,
    Report,
    format_report,
    report_csv_rows,
    report_table,
    write_responses,
)
from .session import RecorderRecord, SessionConfig, SessionResult, run_session

RECORDER_FIELDS = [
    "t", "heading", "pitch", "roll", "theta", "phi",
    "dl1", "dl2", "dl3", "condition", "stage",
    "coins_inserted", "coins_returned",
]

_STAGE_ORDER = {"explore": 0, "questionnaire": 1, "game": 2}


def write_recorder_csv(path, records: Sequence[RecorderRecord]) -> None:
    last_t = -math.inf
    last_stage = 0
    for r in records:
        if r.t < last_t:
            raise ValueError("recorder rows must be time-ordered")
        if _STAGE_ORDER[r.stage] < last_stage:
            raise ValueError("stage transitions must be monotone")
        last_t, last_stage = r.t, _STAGE_ORDER[r.stage]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORDER_FIELDS)
        for r in records:
            writer.writerow([
                f"{r.t:.3f}",
                f"{r.heading:.9f}", f"{r.pitch:.9f}", f"{r.roll:.9f}",
                f"{r.theta:.9f}", f"{r.phi:.9f}",
                f"{r.dl1:.9f}", f"{r.dl2:.9f}", f"{r.dl3:.9f}",
                r.condition, r.stage,
                r.coins_inserted, r.coins_returned,
            ])


def read_recorder_csv(path) -> List[RecorderRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORDER_FIELDS:
            raise ValueError(f"unexpected recorder columns: {reader.fieldnames}")
        for row in reader:
            out.append(RecorderRecord(
                t=float(row["t"]),
                heading=float(row["heading"]),
                pitch=float(row["pitch"]),
                roll=float(row["roll"]),
                theta=float(row["theta"]),
                phi=float(row["phi"]),
                dl1=float(row["dl1"]),
                dl2=float(row["dl2"]),
                dl3=float(row["dl3"]),
                condition=row["condition"],
                stage=row["stage"],
                coins_inserted=int(row["coins_inserted"]),
                coins_returned=int(row["coins_returned"]),
            ))
    return out


# --- condition assignment -----------------------------------------------------


@dataclass(frozen=True)
class Participant:
    ident: str
    age: float
    gender: str


def _assignment_objective(groups: Sequence[Sequence[Participant]]):
    """Lexicographic badness: size spread, then per-gender count spread,
    then the largest pairwise difference in mean age."""
    sizes = [len(g) for g in groups]
    size_spread = max(sizes) - min(sizes)
    genders = {p.gender for g in groups for p in g}
    gender_spread = 0
    for gender in sorted(genders):
        counts = [sum(1 for p in g if p.gender == gender) for g in groups]
        gender_spread = max(gender_spread, max(counts) - min(counts))
    means = [sum(p.age for p in g) / len(g) if g else math.inf for g in groups]
    age_spread = max(abs(a - b) for a in means for b in means)
    return (size_spread, gender_spread, age_spread)


def _assign_exhaustive(participants: Sequence[Participant], k: int):
    best = None
    best_obj = None
    for labels in itertools.product(range(k), repeat=len(participants)):
        sizes = [0] * k
        for lab in labels:
            sizes[lab] += 1
        if max(sizes) - min(sizes) > 1 or min(sizes) == 0:
            continue
        groups = [[] for _ in range(k)]
        for p, lab in zip(participants, labels):
            groups[lab].append(p)
        obj = _assignment_objective(groups)
        if best_obj is None or obj < best_obj:
            best, best_obj = groups, obj
    return best


def _assign_greedy(participants: Sequence[Participant], k: int):
    # widest ages first, each into the currently least-loaded group that
    # improves the running objective the most
    ordered = sorted(participants, key=lambda p: (-p.age, p.gender, p.ident))
    groups: List[List[Participant]] = [[] for _ in range(k)]
    target = len(participants) / k
    for p in ordered:
        candidates = [i for i in range(k) if len(groups[i]) < math.ceil(target)]
        best_i = None
        best_obj = None
        for i in candidates:
            groups[i].append(p)
            obj = (len(groups[i]),) + _assignment_objective([g for g in groups if g])
            groups[i].pop()
            if best_obj is None or obj < best_obj:
                best_i, best_obj = i, obj
        groups[best_i].append(p)
    # local improvement by pairwise swaps
    improved = True
    guard = 0
    while improved and guard < 200:
        improved = False
        guard += 1
        current = _assignment_objective(groups)
        for i in range(k):
            for j in range(i + 1, k):
                for a in range(len(groups[i])):
                    for b in range(len(groups[j])):
                        groups[i][a], groups[j][b] = groups[j][b], groups[i][a]
                        if _assignment_objective(groups) < current:
                            current = _assignment_objective(groups)
                            improved = True
                        else:
                            groups[i][a], groups[j][b] = groups[j][b], groups[i][a]
    return groups


def assign_conditions(participants: Sequence[Participant], k: int,
                      conditions: Optional[Sequence[str]] = None) -> Dict[str, List[Participant]]:
    """Split participants into k groups balanced by size, gender, and age."""
    if k < 2:
        raise ValueError("need at least two conditions")
    if not participants:
        raise ValueError("no participants to assign")
    if len({p.ident for p in participants}) != len(participants):
        raise ValueError("participant ids must be unique")
    if conditions is None:
        conditions = list(CONDITIONS)[:k] if k <= len(CONDITIONS) else [str(i) for i in range(k)]
    if len(conditions) != k:
        raise ValueError("need exactly k condition labels")
    if k ** len(participants) <= 100_000:
        groups = _assign_exhaustive(participants, k)
        if groups is None:
            raise ValueError("cannot form balanced nonempty groups")
    else:
        groups = _assign_greedy(participants, k)
    return {c: sorted(g, key=lambda p: p.ident) for c, g in zip(conditions, groups)}


def read_participants_csv(path) -> List[Participant]:
    """Columns: participant, age, gender."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["participant", "age", "gender"]
        if reader.fieldnames != expected:
            raise ValueError(f"unexpected participant columns: {reader.fieldnames}")
        for row in reader:
            out.append(Participant(row["participant"], float(row["age"]), row["gender"]))
    return out


# --- synthetic questionnaire data ----------------------------------------------

# demo ground truth: mimicry reads as more trustworthy and more familiar,
# so its trust-block answers shift up and its distrust answers shift down
_CONDITION_SHIFT = {"simple": 0.0, "random": 0.3, "synchronized": 1.4, "replay": 0.7}


def synthetic_response(participant: Participant, condition: str, seed: int,
                       coins: Optional[int] = None) -> LikertResponse:
    rng = random.Random(f"{seed}:{participant.ident}:{condition}")
    shift = _CONDITION_SHIFT.get(condition, 0.0)

    def draw(center: float) -> int:
        return max(1, min(7, round(rng.gauss(center, 1.1))))

    items = [draw(4.0 - shift) for _ in range(5)]          # distrust-worded
    items += [draw(4.0 + shift) for _ in range(7)]         # trust-worded
    if coins is None:
        coins = max(0, min(5, round(rng.gauss(1.5 + shift, 1.0))))
    return LikertResponse(participant.ident, condition, tuple(items), coins)


# --- whole-study runner ----------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    participants: Tuple[Participant, ...]
    session: SessionConfig = field(default_factory=lambda: SessionConfig(condition="simple"))
    conditions: Tuple[str, ...] = ("simple", "random", "synchronized")
    seed: int = 0

    def __post_init__(self):
        if not self.participants:
            raise ValueError("study needs participants")


@dataclass(frozen=True)
class StudyResult:
    assignment: Dict[str, List[Participant]]
    sessions: Dict[str, SessionResult]
    responses: Tuple[LikertResponse, ...]
    report: Report


def _session_for(study: StudyConfig, condition: str, participant: Participant,
                 trace) -> SessionConfig:
    seed = random.Random(f"{study.seed}:{participant.ident}").getrandbits(32)
    base = study.session
    return replace(
        base,
        condition=condition,
        seed=seed,
        trace=trace if condition in ("synchronized", "replay") else base.trace,
        pattern=None,
    )


def run_study(study: StudyConfig, out_dir=None, trace=None) -> StudyResult:
    """Assign, simulate every participant's session, join synthetic
    questionnaire answers, and build the report.

    ``trace`` supplies the motion input for synchronized/replay conditions;
    when absent and needed, a gentle scripted sway is generated.
    """
    assignment = assign_conditions(list(study.participants), len(study.conditions),
                                   conditions=study.conditions)
    if trace is None and any(c in ("synchronized", "replay") for c in study.conditions):
        trace = _default_trace(study.seed, study.session)
    sessions: Dict[str, SessionResult] = {}
    responses: List[LikertResponse] = []
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        (out_path / "recorder").mkdir(parents=True, exist_ok=True)
    for condition in study.conditions:
        for participant in assignment[condition]:
            cfg = _session_for(study, condition, participant, trace)
            result = run_session(cfg)
            sessions[participant.ident] = result
            responses.append(
                synthetic_response(participant, condition, study.seed,
                                   coins=result.game.inserted)
            )
            if out_path is not None:
                write_recorder_csv(
                    out_path / "recorder" / f"{participant.ident}.csv", result.records
                )
    report = report_table(responses, conditions=study.conditions)
    if out_path is not None:
        write_responses(out_path / "responses.csv", responses)
        (out_path / "report.txt").write_text(format_report(report) + "\n")
        with open(out_path / "report.csv", "w", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(report_csv_rows(report))
    return StudyResult(assignment, sessions, tuple(responses), report)


def _default_trace(seed: int, session: SessionConfig):
    """Scripted participant sway for conditions that need a motion input."""
    from .sensing import OrientationSample, Trace

    rng = random.Random(f"{seed}:trace")
    a1 = rng.uniform(0.2, 0.5)
    a2 = rng.uniform(0.1, 0.3)
    w1 = rng.uniform(0.4, 0.9)
    w2 = rng.uniform(1.0, 2.2)
    total = session.duration + session.questionnaire_duration + 60.0
    samples = [
        OrientationSample(
            heading=a1 * math.sin(w1 * t),
            pitch=a2 * math.sin(w2 * t + 0.7),
            roll=a2 * 0.6 * math.sin(w2 * 1.3 * t),
            timestamp=t,
        )
        for t in (k * 0.02 for k in range(int(total * 50.0)))
    ]
    return Trace(samples)
