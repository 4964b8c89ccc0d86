import math

import numpy as np
import pytest

from syncbot.actuation import (
    CableController,
    CableState,
    MotionLimits,
    plan_tick,
    settle_time,
    to_steps,
)
from syncbot.kinematics import CableDeltas

LIMITS = MotionLimits()
DT = LIMITS.dt


def _run_to_target(target_m: float, max_ticks: int = 2000):
    """Drive one cable to a constant target; return per-tick (pos, vel) history."""
    state = CableState()
    target = CableDeltas((target_m, -target_m / 2, -target_m / 2))
    history = []
    for _ in range(max_ticks):
        state = plan_tick(state, target, LIMITS, DT)
        history.append((state.length_delta[0], state.velocity[0]))
    return history


def test_fixed_point_at_target():
    state = CableState(length_delta=(0.01, -0.005, -0.005))
    target = CableDeltas((0.01, -0.005, -0.005))
    after = plan_tick(state, target, LIMITS, DT)
    assert after == state


def test_first_tick_velocity_bounded_by_acceleration():
    state = plan_tick(CableState(), CableDeltas((0.01, -0.005, -0.005)), LIMITS, DT)
    assert abs(state.velocity[0]) <= LIMITS.a_max * DT + 1e-15
    assert state.velocity[0] == pytest.approx(0.00628, abs=1e-9)


def test_large_step_saturates_at_v_max():
    history = _run_to_target(0.2)
    speeds = [abs(v) for _, v in history]
    assert max(speeds) == pytest.approx(LIMITS.v_max, abs=1e-12)
    # cruise segment exists: many ticks exactly at the cap
    assert sum(1 for v in speeds if abs(v - LIMITS.v_max) < 1e-12) > 10


def test_velocity_and_acceleration_limits_never_exceeded():
    rng = np.random.default_rng(31)
    for _ in range(50):
        target_m = rng.uniform(-0.25, 0.25)
        history = _run_to_target(target_m, max_ticks=400)
        vels = np.array([v for _, v in history])
        assert np.max(np.abs(vels)) <= LIMITS.v_max + 1e-9
        accels = np.abs(np.diff(np.concatenate([[0.0], vels]))) / DT
        assert np.max(accels) <= LIMITS.a_max * (1 + 1e-6)


def test_no_overshoot_beyond_one_tick_travel():
    rng = np.random.default_rng(33)
    for _ in range(50):
        target_m = rng.uniform(-0.25, 0.25)
        history = _run_to_target(target_m, max_ticks=400)
        sign = math.copysign(1.0, target_m)
        overshoot = max((p - target_m) * sign for p, _ in history)
        assert overshoot <= LIMITS.v_max * DT + 1e-12


def test_constant_target_reached_within_settle_time_plus_two_ticks():
    rng = np.random.default_rng(35)
    for target_m in [0.01, 0.1005, 0.2, 1e-4, *(rng.uniform(-0.3, 0.3, 30))]:
        history = _run_to_target(float(target_m))
        budget = math.ceil(settle_time(abs(target_m), LIMITS) / DT) + 2
        arrived = [
            k
            for k, (p, v) in enumerate(history, start=1)
            if p == float(target_m) and v == 0.0
        ]
        assert arrived, f"never settled on {target_m}"
        assert arrived[0] <= budget


def test_plan_tick_rejects_bad_input():
    with pytest.raises(ValueError):
        plan_tick(CableState(), CableDeltas((float("nan"), 0.0, 0.0)), LIMITS, DT)
    with pytest.raises(ValueError):
        plan_tick(CableState(), CableDeltas((0.0, 0.0, 0.0)), LIMITS, 0.0)


def test_steps_zero_motion():
    cmd = to_steps((0.0, 0.0, 0.0), (1e-5, 0.0, -1e-5), 40_000.0)
    assert cmd.steps == (0, 0, 0)
    assert cmd.residual == pytest.approx((1e-5, 0.0, -1e-5))


def test_steps_truncate_with_carried_remainder():
    cmd = to_steps((0.00105, 0.0, 0.0), (0.0, 0.0, 0.0), 1000.0)
    assert cmd.steps[0] == 1
    assert cmd.residual[0] == pytest.approx(0.00005, abs=1e-12)


def test_steps_negative_motion_symmetric():
    cmd = to_steps((-0.00105, 0.0, 0.0), (0.0, 0.0, 0.0), 1000.0)
    assert cmd.steps[0] == -1
    assert cmd.residual[0] == pytest.approx(-0.00005, abs=1e-12)
    assert all(abs(r) < 1 / 1000.0 for r in cmd.residual)


def test_step_train_reconstructs_travel():
    rng = np.random.default_rng(37)
    spm = 40_000.0
    residual = (0.0, 0.0, 0.0)
    total_steps = np.zeros(3)
    total_travel = np.zeros(3)
    for _ in range(10_000):
        moved = tuple(rng.uniform(-3e-3, 3e-3, 3))
        cmd = to_steps(moved, residual, spm)
        residual = cmd.residual
        total_steps += np.asarray(cmd.steps)
        total_travel += np.asarray(moved)
    reconstructed = total_steps / spm
    assert np.max(np.abs(reconstructed - total_travel)) < 1 / spm


def test_settle_time_profiles():
    assert settle_time(0.0, LIMITS) == 0.0
    d_triangle = LIMITS.v_max**2 / LIMITS.a_max  # 0.1005 m boundary
    assert settle_time(d_triangle, LIMITS) == pytest.approx(0.8, abs=1e-9)
    assert settle_time(0.2, LIMITS) == pytest.approx(1.1962, abs=1e-4)
    # simulated arrival closely tracks the analytic time
    history = _run_to_target(0.2)
    arrived = next(k for k, (p, v) in enumerate(history, 1) if p == 0.2 and v == 0.0)
    assert arrived * DT == pytest.approx(settle_time(0.2, LIMITS), abs=2 * DT)


def test_controller_emits_consistent_steps():
    ctl = CableController()
    target = CableDeltas((0.004, -0.002, -0.002))
    step_sum = np.zeros(3)
    for _ in range(300):
        state, cmd = ctl.tick(target)
        step_sum += np.asarray(cmd.steps)
    assert state.length_delta == pytest.approx(target.dl, abs=1e-12)
    assert step_sum / ctl.steps_per_meter == pytest.approx(
        np.asarray(target.dl), abs=1 / ctl.steps_per_meter
    )
