"""Constant-curvature kinematics of a one-segment, three-tendon continuum robot.

The bent backbone is modeled as a circular arc of fixed length ``l0``.  A
configuration is the pair (theta, phi): the azimuth of the bending plane and
the total arc bending angle.  Three tendons at 120 degree spacing around the
backbone change length as the arc bends; a pulled (shortened) tendon carries a
negative length change.

All lengths are meters, all angles radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TAU = 2.0 * math.pi

# tendon azimuths around the backbone: 0, 120, 240 degrees
CABLE_ANGLES = (0.0, TAU / 3.0, 2.0 * TAU / 3.0)

# below this bend angle the arc coefficients switch to their series form
_PHI_SERIES_EPS = 1e-6

# headroom on the phi_max precondition so 6-decimal-rounded limits pass
_PHI_LIMIT_SLACK = 1e-6


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, TAU)
    if wrapped <= -math.pi:
        wrapped += TAU
    return wrapped


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BendState:
    """Robot configuration: bend direction ``theta`` and bend angle ``phi``.

    ``theta`` is wrapped to (-pi, pi]; ``phi`` is non-negative.  The straight
    configuration is direction-ambiguous and is normalized to theta = 0.
    """

    theta: float
    phi: float

    def __post_init__(self):
        theta = _require_finite("theta", self.theta)
        phi = _require_finite("phi", self.phi)
        if phi < 0.0:
            raise ValueError(f"phi must be >= 0, got {phi}")
        object.__setattr__(self, "theta", wrap_angle(theta) if phi > 0.0 else 0.0)
        object.__setattr__(self, "phi", phi)

    def tilt_vector(self) -> tuple[float, float]:
        """Cartesian (x, y) form phi*(cos theta, sin theta) of the bend."""
        return (self.phi * math.cos(self.theta), self.phi * math.sin(self.theta))

    @staticmethod
    def from_tilt(x: float, y: float) -> "BendState":
        return BendState(theta=math.atan2(y, x), phi=math.hypot(x, y))


@dataclass(frozen=True)
class RobotGeometry:
    """Physical constants of the continuum segment.

    ``l0``: backbone length.  ``r``: radial distance from the backbone to the
    tendons.  ``phi_max``: safety limit on the bend angle (default 20 deg).
    """

    l0: float = 1.0
    r: float = 0.02
    phi_max: float = math.radians(20.0)
    cable_count: int = 3
    spacer_count: int = 5

    def __post_init__(self):
        if not (self.l0 > 0.0 and self.r > 0.0):
            raise ValueError("l0 and r must be positive")
        if not (0.0 < self.phi_max < math.pi):
            raise ValueError("phi_max must lie in (0, pi)")
        if self.cable_count != 3:
            raise ValueError("only the three-tendon layout is supported")


@dataclass(frozen=True)
class CableDeltas:
    """Signed per-tendon length changes (shortened tendon is negative)."""

    dl: tuple[float, float, float]

    def __post_init__(self):
        if len(self.dl) != 3:
            raise ValueError("expected exactly three tendon deltas")
        dl = tuple(_require_finite(f"dl[{i}]", v) for i, v in enumerate(self.dl))
        object.__setattr__(self, "dl", dl)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.dl, dtype=float)


@dataclass(frozen=True)
class TipPose:
    """Tip position (base frame) and orientation (tip frame as a 3x3 rotation)."""

    position: np.ndarray
    orientation: np.ndarray = field(repr=False)


def cable_deltas(bend: BendState, geom: RobotGeometry) -> CableDeltas:
    """Tendon length changes for a bend state.

    dl_i = -r * phi * cos(theta - sigma_i) with tendon azimuths sigma at
    0/120/240 degrees.  The three deltas always sum to zero: the backbone is
    inextensible and the tendons sit symmetrically around it.
    """
    if bend.phi > geom.phi_max + _PHI_LIMIT_SLACK:
        raise ValueError(
            f"phi={bend.phi:.6f} exceeds the bend limit phi_max={geom.phi_max:.6f}"
        )
    dl = tuple(
        -geom.r * bend.phi * math.cos(bend.theta - sigma) for sigma in CABLE_ANGLES
    )
    return CableDeltas(dl=dl)


def bend_from_deltas(deltas: CableDeltas, geom: RobotGeometry, *, tol: float = 1e-6) -> BendState:
    """Recover the unique bend state (phi >= 0) from tendon deltas.

    Inverts the delta formula through the bend-plane components
    phi*cos(theta) = -dl1/r and phi*sin(theta) = (dl3 - dl2)/(sqrt(3)*r).
    Deltas must sum to zero within ``tol`` (meters); anything else cannot come
    from a rigid-backbone bend.
    """
    dl1, dl2, dl3 = deltas.dl
    total = dl1 + dl2 + dl3
    if abs(total) > tol:
        raise ValueError(
            f"inconsistent tendon deltas: sum {total:.3e} m exceeds tolerance {tol:.1e}"
        )
    return _bend_from_delta_components(dl1, dl2, dl3, geom.r)


def _bend_from_delta_components(dl1: float, dl2: float, dl3: float, r: float) -> BendState:
    # Projection onto the bend plane; tolerant of small sum!=0 residue.
    x = -dl1 / r
    y = (dl3 - dl2) / (math.sqrt(3.0) * r)
    return BendState.from_tilt(x, y)


def project_bend(deltas: CableDeltas, geom: RobotGeometry) -> BendState:
    """Nearest bend state for deltas that need not sum to zero.

    While the cables slew independently toward a new target their deltas
    transiently violate the closure constraint; telemetry still wants a bend
    estimate, so this projects onto the bend plane without the sum check.
    """
    dl1, dl2, dl3 = deltas.dl
    return _bend_from_delta_components(dl1, dl2, dl3, geom.r)


def _arc_coefficients(phi: float) -> tuple[float, float]:
    """Return ((1-cos phi)/phi, sin(phi)/phi) with a series fallback near zero."""
    if phi < _PHI_SERIES_EPS:
        # leading series terms; error O(phi^3) ~ 1e-19 at the switch point
        return phi / 2.0 - phi**3 / 24.0, 1.0 - phi**2 / 6.0
    return (1.0 - math.cos(phi)) / phi, math.sin(phi) / phi


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def tip_pose(bend: BendState, geom: RobotGeometry) -> TipPose:
    """Tip pose of the constant-curvature arc in the backbone base frame.

    In the bend plane the tip sits at (l0/phi)*(1-cos phi, 0, sin phi); the
    plane is rotated about z by theta.  The tip frame is the base frame tipped
    by phi about the axis normal to the bend plane: Rz(theta)Ry(phi)Rz(-theta).
    """
    if not bend.phi < math.pi:
        raise ValueError(f"phi must lie in [0, pi), got {bend.phi}")
    a, b = _arc_coefficients(bend.phi)
    in_plane = np.array([geom.l0 * a, 0.0, geom.l0 * b])
    rz = _rot_z(bend.theta)
    position = rz @ in_plane
    orientation = rz @ _rot_y(bend.phi) @ _rot_z(-bend.theta)
    return TipPose(position=position, orientation=orientation)


def backbone_points(bend: BendState, geom: RobotGeometry, n: int) -> np.ndarray:
    """``n`` points at equal arc length along the backbone, base to tip, shape (n, 3)."""
    if n < 2:
        raise ValueError(f"need at least 2 backbone points, got {n}")
    if not bend.phi < math.pi:
        raise ValueError(f"phi must lie in [0, pi), got {bend.phi}")
    fractions = np.linspace(0.0, 1.0, n)
    points = np.empty((n, 3))
    rz = _rot_z(bend.theta)
    for i, f in enumerate(fractions):
        # the partial arc up to arc length f*l0 bends by f*phi at the same curvature
        a, b = _arc_coefficients(f * bend.phi)
        points[i] = rz @ np.array([f * geom.l0 * a, 0.0, f * geom.l0 * b])
    return points
