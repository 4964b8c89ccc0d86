"""Tests for the coin-acceptor state machine."""

import random

import pytest

from syncbot.trustgame import (
    GameState,
    PayoutEvent,
    PayoutPolicy,
    begin,
    insert_coin,
    tick,
)


def _drain(state, until, policy=PayoutPolicy(), dt=0.01):
    """Tick on a fixed grid, returning the final state and all events."""
    events = []
    for k in range(int(round(until / dt)) + 1):
        state, ev = tick(state, k * dt, policy)
        if ev is not None:
            events.append(ev)
    return state, events


class TestInsert:
    def test_first_coin_starts_accepting(self):
        state, accepted = insert_coin(GameState(), now=0.0)
        assert accepted
        assert state.phase == "accepting"
        assert state.inserted == 1
        assert state.last_insert_time == 0.0

    def test_sixth_coin_rejected(self):
        state = GameState()
        for k in range(5):
            state, accepted = insert_coin(state, now=float(k))
            assert accepted
        state, accepted = insert_coin(state, now=5.0)
        assert not accepted
        assert state.inserted == 5
        assert state.rejected_returns == 1

    def test_insert_after_decision_rejected(self):
        state, _ = insert_coin(GameState(), now=0.0)
        state, event = tick(state, 10.0)
        assert event is not None
        assert state.phase == "paying"
        state, accepted = insert_coin(state, now=10.1)
        assert not accepted
        state, _ = tick(state, 10.2)
        assert state.phase == "done"
        state, accepted = insert_coin(state, now=11.0)
        assert not accepted
        assert state.rejected_returns == 2


class TestDecision:
    def test_three_coins_pay_four(self):
        state = GameState()
        for t in (1.0, 3.0, 5.0):
            state, _ = insert_coin(state, now=t)
        state, events = _drain(state, 15.0)
        assert events == [PayoutEvent(coins=4, time=15.0)]
        assert state.payout == 4

    def test_second_coin_resets_the_timer(self):
        state, _ = insert_coin(GameState(), now=0.0)
        state, _ = insert_coin(state, now=9.9)
        # without the reset the decision would fire at 10.0
        state, ev = tick(state, 10.0)
        assert ev is None
        state, ev = tick(state, 19.0)
        assert ev is None and state.phase == "accepting"
        state, ev = tick(state, 19.89)
        assert ev is None
        state, ev = tick(state, 19.9)
        assert ev == PayoutEvent(coins=3, time=19.9)

    def test_declined_game_pays_nothing(self):
        state = begin(GameState(), now=0.0)
        state, events = _drain(state, 12.0)
        assert state.phase == "done"
        assert events == []
        assert state.payout is None
        assert state.coins_returned == 0

    def test_five_coins_pay_six_within_ceiling(self):
        state = GameState()
        for k in range(5):
            state, _ = insert_coin(state, now=0.1 * k)
        state, events = _drain(state, 11.0)
        assert events == [PayoutEvent(coins=6, time=10.4)]
        assert events[0].coins <= 3 * 5

    def test_payout_assigned_exactly_once(self):
        state, _ = insert_coin(GameState(), now=0.0)
        state, ev = tick(state, 10.0)
        assert ev is not None and state.payout == 2
        for t in (10.1, 10.2, 11.0):
            state, ev = tick(state, t)
            assert ev is None
        assert state.phase == "done"
        assert state.payout == 2

    def test_never_decides_before_ten_idle_seconds(self):
        rng = random.Random(17)
        for _ in range(50):
            state = begin(GameState(), now=0.0)
            inserts = sorted(rng.uniform(0.0, 20.0) for _ in range(rng.randrange(1, 6)))
            schedule = iter(inserts)
            pending = next(schedule, None)
            last_insert = 0.0
            t = 0.0
            while state.phase in ("idle", "accepting") and t < 60.0:
                while pending is not None and pending <= t:
                    state, accepted = insert_coin(state, pending)
                    if accepted:
                        last_insert = pending
                    pending = next(schedule, None)
                state, ev = tick(state, t)
                if ev is not None:
                    assert t - last_insert >= 10.0 - 1e-9
                t += 0.05
            assert state.phase in ("paying", "done")

    def test_time_regression_rejected(self):
        state, _ = insert_coin(GameState(), now=0.0)
        state, _ = tick(state, 5.0)
        with pytest.raises(ValueError, match="backwards"):
            tick(state, 4.0)

    def test_begin_twice_rejected(self):
        state = begin(GameState(), now=0.0)
        with pytest.raises(ValueError):
            begin(state, now=1.0)


class TestCoinConservation:
    def test_returned_equals_payout_plus_rejections(self):
        rng = random.Random(23)
        for _ in range(50):
            state = begin(GameState(), now=0.0)
            attempts = sorted(rng.uniform(0.0, 30.0) for _ in range(rng.randrange(0, 9)))
            accepted_count = 0
            events = []
            t = 0.0
            schedule = iter(attempts)
            pending = next(schedule, None)
            while t < 45.0:
                while pending is not None and pending <= t:
                    state, accepted = insert_coin(state, pending)
                    accepted_count += accepted
                    pending = next(schedule, None)
                state, ev = tick(state, t)
                if ev is not None:
                    events.append(ev)
                t += 0.05
            assert state.phase == "done"
            payout = sum(ev.coins for ev in events)
            assert payout == (state.payout or 0)
            assert state.coins_returned == payout + state.rejected_returns
            if accepted_count >= 1:
                assert payout == accepted_count + 1


class TestPayoutPolicies:
    def test_plus_one_values(self):
        policy = PayoutPolicy()
        assert [policy.compute(n) for n in range(6)] == [0, 2, 3, 4, 5, 6]

    def test_multiplier_banker_rounding(self):
        # exact 1.5x with no jitter: half-to-even at n=1, 3, 5
        policy = PayoutPolicy(kind="multiplier", variance=0.0)
        assert [policy.compute(n) for n in range(1, 6)] == [2, 3, 4, 6, 8]

    def test_multiplier_stays_in_band_and_under_ceiling(self):
        for seed in range(40):
            policy = PayoutPolicy(kind="multiplier", seed=seed)
            for n in range(1, 6):
                payout = policy.compute(n)
                assert payout <= 3 * n
                assert round(1.35 * n) - 1 <= payout <= round(1.65 * n) + 1

    def test_multiplier_is_seed_deterministic(self):
        a = PayoutPolicy(kind="multiplier", seed=9)
        b = PayoutPolicy(kind="multiplier", seed=9)
        assert [a.compute(n) for n in range(1, 6)] == [b.compute(n) for n in range(1, 6)]

    def test_bad_policy_rejected(self):
        with pytest.raises(ValueError):
            PayoutPolicy(kind="doubler")
        with pytest.raises(ValueError):
            PayoutPolicy(kind="multiplier", variance=1.5)
