"""Coin-acceptor state machine for the trust-game stage.

Participants may deposit up to five coins.  Ten seconds after the last
insert the machine decides and returns coins per the payout policy; the
default policy returns one coin more than was deposited.  The machine
never holds or creates coins outside of that single payout -- coins
inserted at the wrong time bounce back immediately and are not counted.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Optional, Tuple

PHASES = ("idle", "accepting", "deciding", "paying", "done")

MAX_COINS = 5
DECISION_IDLE_SECONDS = 10.0
PAYOUT_CEILING_FACTOR = 3

# clock times arrive as k*dt products, so the idle window is checked with a
# nanosecond of slack (19.9 - 9.9 lands one ulp short of 10.0 otherwise)
_DEADLINE_SLACK = 1e-9


@dataclass(frozen=True)
class PayoutPolicy:
    """Default ``plus_one`` pays n+1; ``multiplier`` pays m*n with a seeded
    uniform perturbation, rounded half-to-even and clamped to 3n."""

    kind: str = "plus_one"
    multiplier: float = 1.5
    variance: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("plus_one", "multiplier"):
            raise ValueError(f"unknown payout policy {self.kind!r}")
        if self.multiplier <= 0 or not 0.0 <= self.variance < 1.0:
            raise ValueError("multiplier must be > 0 and variance in [0, 1)")

    def compute(self, inserted: int) -> int:
        if inserted <= 0:
            return 0
        if self.kind == "plus_one":
            payout = inserted + 1
        else:
            factor = self.multiplier * (1.0 + random.Random(self.seed).uniform(-self.variance, self.variance))
            # banker's rounding, matching round()
            payout = round(factor * inserted)
        return min(payout, PAYOUT_CEILING_FACTOR * inserted)


@dataclass(frozen=True)
class PayoutEvent:
    coins: int
    time: float


@dataclass(frozen=True)
class GameState:
    phase: str = "idle"
    inserted: int = 0
    last_insert_time: float = 0.0
    payout: Optional[int] = None
    rejected_returns: int = 0
    _clock: float = 0.0

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if not 0 <= self.inserted <= MAX_COINS:
            raise ValueError(f"inserted out of range: {self.inserted}")

    @property
    def coins_returned(self) -> int:
        return (self.payout or 0) + self.rejected_returns


def begin(state: GameState, now: float) -> GameState:
    """Arm the acceptor at the start of the game stage.

    The idle window starts counting immediately, so a participant who never
    deposits reaches ``done`` (a declined game) after the same ten seconds.
    """
    if state.phase != "idle":
        raise ValueError(f"cannot begin from phase {state.phase!r}")
    return replace(state, phase="accepting", last_insert_time=now, _clock=now)


def insert_coin(state: GameState, now: float) -> Tuple[GameState, bool]:
    """Returns the new state and whether the coin was accepted.

    A rejected coin (wrong phase, or a sixth coin) is returned to the
    participant immediately and never counts toward the deposit.
    """
    if not math.isfinite(now):
        raise ValueError("now must be finite")
    if state.phase in ("deciding", "paying", "done") or state.inserted >= MAX_COINS:
        return replace(state, rejected_returns=state.rejected_returns + 1), False
    return (
        replace(
            state,
            phase="accepting",
            inserted=state.inserted + 1,
            last_insert_time=now,
        ),
        True,
    )


def tick(state: GameState, now: float,
         policy: PayoutPolicy = PayoutPolicy()) -> Tuple[GameState, Optional[PayoutEvent]]:
    """Advance the machine to ``now``; returns a payout event when it fires."""
    if now < state._clock:
        raise ValueError(f"time went backwards: {now} < {state._clock}")
    state = replace(state, _clock=now)
    if state.phase == "paying":
        return replace(state, phase="done"), None
    if state.phase != "accepting" or now - state.last_insert_time < DECISION_IDLE_SECONDS - _DEADLINE_SLACK:
        return state, None
    if state.inserted == 0:
        # declined game: nothing was deposited, nothing comes back
        return replace(state, phase="done"), None
    coins = policy.compute(state.inserted)
    return replace(state, phase="paying", payout=coins), PayoutEvent(coins=coins, time=now)
