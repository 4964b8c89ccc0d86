"""Rate- and acceleration-limited cable actuation with stepper quantization.

Targets arrive as tendon length changes; each cable is slewed toward its
target under a speed cap and an acceleration cap (trapezoidal profile).  This
limiter is what delays the robot behind the person it mimics.  Cable motion is
then quantized to whole stepper steps with an exact carried residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import CableDeltas


@dataclass(frozen=True)
class MotionLimits:
    """Safety limits on cable motion: 25.12 cm/s speed, 62.8 cm/s^2 acceleration."""

    v_max: float = 0.2512
    a_max: float = 0.628
    loop_rate: float = 100.0

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0 and self.loop_rate > 0):
            raise ValueError("all motion limits must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.loop_rate


@dataclass(frozen=True)
class CableState:
    """Per-cable length change (m) and velocity (m/s)."""

    length_delta: tuple[float, float, float] = (0.0, 0.0, 0.0)
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def as_deltas(self) -> CableDeltas:
        # may transiently violate the sum-zero invariant mid-slew; use the
        # tolerant projection in bend recovery for telemetry
        return CableDeltas(dl=self.length_delta)


@dataclass(frozen=True)
class StepCommand:
    """Whole steps emitted this tick per cable, plus the carried remainder (m)."""

    steps: tuple[int, int, int]
    residual: tuple[float, float, float]


def _plan_axis(pos: float, vel: float, target: float, limits: MotionLimits, dt: float):
    a = limits.a_max
    d = target - pos
    # landing: finish this tick if the landing velocity is reachable now and
    # can itself be braked to rest on the next tick
    v_land = d / dt
    if (
        abs(v_land) <= limits.v_max
        and abs(v_land) <= a * dt * (1 + 1e-9)
        and abs(v_land - vel) <= a * dt * (1 + 1e-9)
    ):
        return target, v_land
    # discrete braking curve: the largest speed from which stepping the
    # velocity down by a*dt each tick still stops within |d|
    stop_v = math.sqrt(0.25 * (a * dt) ** 2 + 2.0 * a * abs(d)) - 0.5 * a * dt
    v_des = math.copysign(min(limits.v_max, stop_v), d)
    dv = min(a * dt, max(-a * dt, v_des - vel))
    v_new = vel + dv
    return pos + v_new * dt, v_new


def _tilt_components(deltas, r: float) -> tuple[float, float]:
    # bend-plane projection, same formulas the kinematic inverse uses:
    # phi*cos(theta) = -dl1/r, phi*sin(theta) = (dl3-dl2)/(sqrt(3)*r)
    return -deltas[0] / r, (deltas[2] - deltas[1]) / (math.sqrt(3.0) * r)


def _radial_speed(velocities, ex, ey, r: float) -> float:
    vx = -velocities[0] / r
    vy = (velocities[2] - velocities[1]) / (math.sqrt(3.0) * r)
    return vx * ex + vy * ey


def _radial_correction(velocities, prev_vel, delta: float, ex, ey,
                       limits: MotionLimits, r: float, dt: float):
    """Shift radial tilt speed by -delta (minimum-norm in cable space), then
    clamp each cable back into its own speed and acceleration budget."""
    raw = (
        velocities[0] + delta * r * ex,
        velocities[1] + delta * (math.sqrt(3.0) * r / 2.0) * ey,
        velocities[2] - delta * (math.sqrt(3.0) * r / 2.0) * ey,
    )
    bounded = []
    for v_new, v_old in zip(raw, prev_vel):
        v_new = min(max(v_new, v_old - limits.a_max * dt), v_old + limits.a_max * dt)
        v_new = min(max(v_new, -limits.v_max), limits.v_max)
        bounded.append(v_new)
    return tuple(bounded)


def _bend_barrier(previous, velocities, prev_vel, limits: MotionLimits,
                  stop: tuple[float, float], dt: float):
    """Cap the outward radial tilt speed by a braking curve toward the limit.

    Independent per-cable profiles can carry the projected bend across the
    safety disc at speed (corner paths: one tilt axis rises before the other
    falls).  Braking the radial component early -- the same discrete braking
    curve the axis planner uses, run at 90% of the worst-direction tilt
    deceleration a_max/r so a tick of slack always remains -- keeps the
    approach slow enough that the correction fits inside each cable's own
    acceleration budget.  A tangential step grows the radius too (chord
    sagitta), so the allowance also reserves room for this tick's tangential
    movement.

    Returns the corrected velocity tuple, or None when no correction applies.
    """
    r, phi_limit = stop
    x, y = _tilt_components(previous, r)
    rho = math.hypot(x, y)
    if rho <= 1e-12:
        return None
    ex, ey = x / rho, y / rho
    a_tilt = 0.9 * limits.a_max / r
    dist = max(phi_limit - rho, 0.0)
    allowed = math.sqrt(0.25 * (a_tilt * dt) ** 2 + 2.0 * a_tilt * dist) - 0.5 * a_tilt * dt

    def conforms(candidate) -> bool:
        # approach-speed governor plus exact one-step disc containment
        if _radial_speed(candidate, ex, ey, r) > allowed:
            return False
        cx = x + dt * (-candidate[0] / r)
        cy = y + dt * (candidate[2] - candidate[1]) / (math.sqrt(3.0) * r)
        return math.hypot(cx, cy) <= phi_limit

    if conforms(velocities):
        return None
    # The correction is radial, so per-cable clamping can eat part of it when
    # the axis planner already spent the budget accelerating outward.  Braking
    # flat out (all budgets against the radial direction) removes at least as
    # much radial speed per tick as the planner can add, so bisect the
    # correction magnitude for the smallest conforming one -- or settle for
    # flat-out braking when even that falls short (the position stop absorbs
    # the residue).
    flat_out = _radial_correction(velocities, prev_vel, 1e12, ex, ey,
                                  limits, r, dt)
    if not conforms(flat_out):
        return flat_out
    lo, hi = 0.0, 1e12
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        candidate = _radial_correction(velocities, prev_vel, mid, ex, ey,
                                       limits, r, dt)
        if conforms(candidate):
            hi = mid
        else:
            lo = mid
    return _radial_correction(velocities, prev_vel, hi, ex, ey, limits, r, dt)


def _bend_stop(previous, positions, stop: tuple[float, float]):
    """Final position guard: shorten the tick's movement to the disc boundary.

    With the barrier braking the approach this only ever shaves the residual
    left by the barrier's conservative one-tick discretization, so the implied
    velocity adjustment stays far below the acceleration cap.
    """
    r, phi_limit = stop
    px, py = _tilt_components(positions, r)
    if math.hypot(px, py) <= phi_limit:
        return positions, False
    qx, qy = _tilt_components(previous, r)
    dx, dy = px - qx, py - qy
    a = dx * dx + dy * dy
    if a <= 0.0:
        return previous, True
    b = 2.0 * (qx * dx + qy * dy)
    c = qx * qx + qy * qy - phi_limit * phi_limit
    scale = (-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
    scale = min(max(scale, 0.0), 1.0)
    return tuple(q + scale * (p - q) for q, p in zip(previous, positions)), True


def plan_tick(current: CableState, target: CableDeltas, limits: MotionLimits,
              dt: float, bend_stop: tuple[float, float] | None = None) -> CableState:
    """Advance all cables one control tick toward the target deltas.

    Per cable: velocity moves toward the braking-curve speed for the remaining
    distance, clamped to [-v_max, v_max] and changing by at most a_max*dt;
    position integrates the new velocity.  ``bend_stop`` = (r, phi_limit) arms
    the bend safety limit: a radial braking barrier plus a hard position stop
    keep the projected bend inside the limit disc.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    for v in target.dl:
        if not math.isfinite(v):
            raise ValueError("target deltas must be finite")
    planned = [
        _plan_axis(p, v, t, limits, dt)
        for p, v, t in zip(current.length_delta, current.velocity, target.dl)
    ]
    positions = tuple(p for p, _ in planned)
    velocities = tuple(v for _, v in planned)
    if bend_stop is None:
        return CableState(length_delta=positions, velocity=velocities)
    braked = _bend_barrier(current.length_delta, velocities,
                           current.velocity, limits, bend_stop, dt)
    if braked is not None:
        velocities = braked
        positions = tuple(
            p + v * dt for p, v in zip(current.length_delta, velocities)
        )
    positions, stopped = _bend_stop(current.length_delta, positions, bend_stop)
    if stopped:
        velocities = tuple(
            (p - q) / dt for p, q in zip(positions, current.length_delta)
        )
    return CableState(length_delta=positions, velocity=velocities)


def to_steps(moved: tuple[float, float, float], residual: tuple[float, float, float],
             steps_per_meter: float) -> StepCommand:
    """Quantize per-tick cable movement to whole steps.

    ``moved`` is the length change since the previous command.  Steps truncate
    toward zero; the sub-step remainder is carried so the emitted step train
    reconstructs the true travel to within one step over any tick sequence.
    """
    if steps_per_meter <= 0:
        raise ValueError("steps_per_meter must be positive")
    steps = []
    residuals = []
    for m, r in zip(moved, residual):
        raw = (m + r) * steps_per_meter
        n = math.trunc(raw)
        steps.append(int(n))
        residuals.append((raw - n) / steps_per_meter)
    return StepCommand(steps=tuple(steps), residual=tuple(residuals))


def settle_time(step_size: float, limits: MotionLimits) -> float:
    """Rest-to-rest traversal time of ``step_size`` under the motion limits.

    Triangular profile below d = v_max^2/a_max, trapezoidal above.
    """
    if step_size < 0:
        raise ValueError("step_size must be >= 0")
    if step_size == 0.0:
        return 0.0
    d_tri = limits.v_max**2 / limits.a_max
    if step_size <= d_tri:
        return 2.0 * math.sqrt(step_size / limits.a_max)
    return limits.v_max / limits.a_max + step_size / limits.v_max


@dataclass
class CableController:
    """Stateful per-session wrapper: slews cables and emits step commands.

    ``bend_stop`` = (backbone radius r, bend limit phi) arms the safety stop
    that keeps the projected bend inside the limit disc.
    """

    limits: MotionLimits = field(default_factory=MotionLimits)
    steps_per_meter: float = 40_000.0
    bend_stop: tuple[float, float] | None = None
    state: CableState = field(default_factory=CableState)
    _residual: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def tick(self, target: CableDeltas, dt: float | None = None) -> tuple[CableState, StepCommand]:
        dt = self.limits.dt if dt is None else dt
        previous = self.state.length_delta
        self.state = plan_tick(self.state, target, self.limits, dt,
                               bend_stop=self.bend_stop)
        moved = tuple(n - p for n, p in zip(self.state.length_delta, previous))
        command = to_steps(moved, self._residual, self.steps_per_meter)
        self._residual = command.residual
        return self.state, command
