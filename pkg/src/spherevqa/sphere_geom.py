"""Spherical coordinate math for panoramic frames.

Conventions: a unit vector (x, y, z) has azimuth ``theta = atan2(y, x)`` in
(-pi, pi] and elevation ``phi = asin(z)`` in [-pi/2, pi/2]. The viewing
direction of an NFoV crop at perspective (0, 0) is +x, the crop's horizontal
axis maps to +y and its vertical axis to +z. All angles are radians.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(a, TWO_PI)
    if w <= -math.pi:
        w += TWO_PI
    return w


@dataclass(frozen=True)
class UnitVec:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, v) -> "UnitVec":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def to_angles(self) -> tuple[float, float]:
        theta = math.atan2(self.y, self.x)
        if theta <= -math.pi:
            theta = math.pi
        return theta, math.asin(max(-1.0, min(1.0, self.z)))


def angles_to_unit(theta: float, phi: float) -> UnitVec:
    c = math.cos(phi)
    return UnitVec(c * math.cos(theta), c * math.sin(theta), math.sin(phi))


@dataclass(frozen=True)
class Perspective:
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not (-math.pi <= self.theta <= math.pi):
            raise ValueError(f"perspective theta {self.theta} outside (-pi, pi)")
        if not (-HALF_PI < self.phi < HALF_PI):
            raise ValueError(f"perspective phi {self.phi} outside (-pi/2, pi/2)")

    def matrix(self) -> np.ndarray:
        ct, st = math.cos(self.theta), math.sin(self.theta)
        cp, sp = math.cos(self.phi), math.sin(self.phi)
        return np.array(
            [
                [ct * cp, -st, -ct * sp],
                [st * cp, ct, -sp * st],
                [sp, 0.0, cp],
            ]
        )


@dataclass(frozen=True)
class SphericalBox:
    """Axis-aligned region in (theta, phi) angle space."""

    theta: float
    phi: float
    w_theta: float
    h_phi: float
    confidence: float = 1.0

    def __post_init__(self):
        if not (self.w_theta > 0 and self.h_phi > 0):
            raise ValueError("box extents must be strictly positive")
        if self.w_theta > TWO_PI + 1e-12 or self.h_phi > math.pi + 1e-12:
            raise ValueError("box extents exceed the sphere")
        if not (-HALF_PI - 1e-12 <= self.phi <= HALF_PI + 1e-12):
            raise ValueError(f"box phi {self.phi} outside [-pi/2, pi/2]")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def phi_bottom(self) -> float:
        return max(-HALF_PI, self.phi - 0.5 * self.h_phi)

    @property
    def phi_top(self) -> float:
        return min(HALF_PI, self.phi + 0.5 * self.h_phi)

    def center(self) -> UnitVec:
        return angles_to_unit(self.theta, self.phi)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "SphericalBox":
        return cls(
            float(d["theta"]),
            float(d["phi"]),
            float(d["w_theta"]),
            float(d["h_phi"]),
            float(d.get("confidence", 1.0)),
        )


# ---------------------------------------------------------------------------
# calibration


def calibrate_point(x: float, y: float, persp: Perspective) -> UnitVec:
    """Lift an NFoV-plane point in [-1, 1]^2 onto the unit sphere."""
    v = persp.matrix() @ np.array([1.0, x, y])
    return UnitVec.from_array(v)


def project_to_nfov(v: UnitVec, persp: Perspective) -> tuple[float, float]:
    """Inverse of :func:`calibrate_point` (tangent-plane projection).

    Raises ValueError for directions behind the viewing plane.
    """
    local = persp.matrix().T @ v.as_array()
    if local[0] <= 0:
        raise ValueError("direction is not in front of the perspective")
    return float(local[1] / local[0]), float(local[2] / local[0])


def _edge_extrema(fn, n: int = 257) -> tuple[float, float]:
    s = np.linspace(0.0, 1.0, n)
    vals = np.array([fn(si) for si in s])
    out = []
    for sign in (1.0, -1.0):
        k = int(np.argmin(sign * vals))
        lo, hi = s[max(k - 1, 0)], s[min(k + 1, n - 1)]
        best = sign * vals[k]
        if hi > lo:
            res = minimize_scalar(lambda t: sign * fn(t), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-13})
            best = min(best, float(res.fun))
        out.append(sign * best)
    return out[0], out[1]


def nfov_box_to_spherical(
    corners: Sequence[Sequence[float]],
    persp: Perspective,
    confidence: float = 1.0,
) -> SphericalBox:
    """Calibrate an NFoV bounding box ``((x0, y0), (x1, y1))`` to a SphericalBox.

    Extents are the angular spans reached along the box outline; theta is
    unwrapped around the box center so crossings of the +-pi seam are handled.
    """
    (x0, y0), (x1, y1) = corners
    if not (x0 < x1 and y0 < y1):
        raise ValueError("box corners must be ordered (min, max) per axis")
    m = persp.matrix()
    center = calibrate_point(0.5 * (x0 + x1), 0.5 * (y0 + y1), persp)
    tc, pc = center.to_angles()

    # a pole inside the crop makes the theta span the full circle
    poles = []
    for zsign in (1.0, -1.0):
        local = m.T @ np.array([0.0, 0.0, zsign])
        if local[0] > 0:
            px, py = local[1] / local[0], local[2] / local[0]
            if x0 <= px <= x1 and y0 <= py <= y1:
                poles.append(zsign)
    if len(poles) == 2:
        raise ValueError("calibrated box spans both poles")

    def point(s: float, edge: int) -> np.ndarray:
        if edge == 0:
            p = (x0 + s * (x1 - x0), y0)
        elif edge == 1:
            p = (x1, y0 + s * (y1 - y0))
        elif edge == 2:
            p = (x0 + s * (x1 - x0), y1)
        else:
            p = (x0, y0 + s * (y1 - y0))
        v = m @ np.array([1.0, p[0], p[1]])
        return v / np.linalg.norm(v)

    p_lo, p_hi = math.inf, -math.inf
    t_lo, t_hi = math.inf, -math.inf
    for edge in range(4):
        lo, hi = _edge_extrema(lambda s: math.asin(np.clip(point(s, edge)[2], -1, 1)))
        p_lo, p_hi = min(p_lo, lo), max(p_hi, hi)
        if not poles:
            def rel_theta(s):
                v = point(s, edge)
                return wrap_angle(math.atan2(v[1], v[0]) - tc)

            lo, hi = _edge_extrema(rel_theta)
            t_lo, t_hi = min(t_lo, lo), max(t_hi, hi)
    if poles:
        w = TWO_PI
        if poles[0] > 0:
            p_hi = HALF_PI
        else:
            p_lo = -HALF_PI
    else:
        w = t_hi - t_lo
    return SphericalBox(tc, pc, w, p_hi - p_lo, confidence)


# ---------------------------------------------------------------------------
# area / IoU / NMS


def spherical_area(box: SphericalBox) -> float:
    return max(0.0, box.w_theta * (math.sin(box.phi_top) - math.sin(box.phi_bottom)))


def _arc_overlap(a: SphericalBox, b: SphericalBox) -> float:
    if a.w_theta >= TWO_PI or b.w_theta >= TWO_PI:
        return min(a.w_theta, b.w_theta)
    a0, a1 = a.theta - 0.5 * a.w_theta, a.theta + 0.5 * a.w_theta
    total = 0.0
    for k in (-1, 0, 1):
        b0 = b.theta - 0.5 * b.w_theta + k * TWO_PI
        b1 = b.theta + 0.5 * b.w_theta + k * TWO_PI
        total += max(0.0, min(a1, b1) - max(a0, b0))
    return min(total, a.w_theta, b.w_theta)


def spherical_iou(a: SphericalBox, b: SphericalBox) -> float:
    """Area-weighted IoU of two boxes with longitude wraparound."""
    dtheta = _arc_overlap(a, b)
    lo = max(a.phi_bottom, b.phi_bottom)
    hi = min(a.phi_top, b.phi_top)
    if dtheta <= 0 or hi <= lo:
        return 0.0
    inter = dtheta * (math.sin(hi) - math.sin(lo))
    union = spherical_area(a) + spherical_area(b) - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


NMS_TAU = 0.65
NMS_MAX_KEEP = 35


def spherical_nms(
    boxes: Iterable[SphericalBox], tau: float = NMS_TAU, max_keep: int = NMS_MAX_KEEP
) -> list[SphericalBox]:
    boxes = list(boxes)
    order = sorted(range(len(boxes)), key=lambda i: -boxes[i].confidence)
    keep: list[SphericalBox] = []
    for i in order:
        if len(keep) >= max_keep:
            break
        cand = boxes[i]
        if all(spherical_iou(cand, k) <= tau for k in keep):
            keep.append(cand)
    return keep


# ---------------------------------------------------------------------------
# spatial embeddings


@dataclass(frozen=True)
class QuatEmbedding:
    t: float
    q_w: float
    q_x: float
    q_y: float
    w: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.q_w, self.q_x, self.q_y, self.w, self.h])


def quaternion_embedding(box: SphericalBox, t: float = 0.0) -> QuatEmbedding:
    """Rotation-quaternion code of a box.

    The rotation carries the south pole (0, 0, -1) to the box center about an
    axis restricted to the XY-plane. The in-plane axis is normalized so the
    quaternion is unit; at the north pole the axis is fixed to (1, 0).
    """
    c = box.center()
    angle = math.acos(max(-1.0, min(1.0, -c.z)))
    r = math.hypot(c.x, c.y)
    if r < 1e-12:
        ax, ay = 1.0, 0.0
    else:
        ax, ay = c.x / r, c.y / r
    half = 0.5 * angle
    s = math.sin(half)
    return QuatEmbedding(t, math.cos(half), -ay * s, ax * s,
                         box.w_theta / TWO_PI, box.h_phi / math.pi)


class SpatialMode(str, enum.Enum):
    QUATERNION = "quaternion"
    CARTESIAN = "cartesian"
    SPHERICAL = "spherical"
    UNIT_SPHERE = "unit-sphere"


def alt_embedding(box: SphericalBox, t: float, mode) -> np.ndarray:
    mode = SpatialMode(mode)
    if mode is SpatialMode.CARTESIAN:
        return np.array([
            t,
            (box.theta + math.pi) / TWO_PI,
            (HALF_PI - box.phi) / math.pi,
            box.w_theta / TWO_PI,
            box.h_phi / math.pi,
        ])
    if mode is SpatialMode.SPHERICAL:
        return np.array([t, box.theta, box.phi, box.w_theta, box.h_phi])
    if mode is SpatialMode.UNIT_SPHERE:
        c = box.center()
        return np.array([t, c.x, c.y, c.z, box.w_theta, box.h_phi])
    raise ValueError(f"alt_embedding has no mode {mode.value!r}; use quaternion_embedding")


def spatial_code(box: SphericalBox, t: float, mode) -> np.ndarray:
    """Time-prefixed spatial code of ``box`` in any mode."""
    if SpatialMode(mode) is SpatialMode.QUATERNION:
        return quaternion_embedding(box, t).as_array()
    return alt_embedding(box, t, mode)


def spatial_code_width(mode) -> int:
    return {"quaternion": 6, "cartesian": 5, "spherical": 5, "unit-sphere": 6}[SpatialMode(mode).value]


def grounding_vector(box: SphericalBox, mode) -> np.ndarray:
    """5-vector regression target: the spatial code without time, zero-padded."""
    code = spatial_code(box, 0.0, mode)[1:]
    out = np.zeros(5)
    out[: code.size] = code
    return out


# ---------------------------------------------------------------------------
# relations


class SpatialRelation(str, enum.Enum):
    NEXT_TO = "next to"
    OPPOSITE_OF = "opposite of"
    LEFT_OF = "left of"
    RIGHT_OF = "right of"
    ABOVE = "above"
    BELOW = "below"

    def swapped(self) -> "SpatialRelation":
        return _SWAP[self]


_SWAP = {
    SpatialRelation.NEXT_TO: SpatialRelation.NEXT_TO,
    SpatialRelation.OPPOSITE_OF: SpatialRelation.OPPOSITE_OF,
    SpatialRelation.LEFT_OF: SpatialRelation.RIGHT_OF,
    SpatialRelation.RIGHT_OF: SpatialRelation.LEFT_OF,
    SpatialRelation.ABOVE: SpatialRelation.BELOW,
    SpatialRelation.BELOW: SpatialRelation.ABOVE,
}


@dataclass(frozen=True)
class RelationThresholds:
    next_to: float = math.pi / 6
    opposite: float = 5 * math.pi / 6
    vertical: float = math.pi / 12


def great_circle(a: UnitVec, b: UnitVec) -> float:
    # atan2 form keeps precision for nearly coincident or antipodal points
    va, vb = a.as_array(), b.as_array()
    return float(math.atan2(np.linalg.norm(np.cross(va, vb)), float(va @ vb)))


def classify_relation(
    a: SphericalBox, b: SphericalBox, thresholds: RelationThresholds = RelationThresholds()
) -> SpatialRelation:
    """Relation of ``b`` relative to ``a``."""
    d = great_circle(a.center(), b.center())
    if d < 1e-9:
        raise ValueError("coincident box centers have no defined relation")
    if d < thresholds.next_to:
        return SpatialRelation.NEXT_TO
    dtheta = wrap_angle(b.theta - a.theta)
    dphi = b.phi - a.phi
    if abs(dtheta) > thresholds.opposite:
        return SpatialRelation.OPPOSITE_OF
    if abs(dphi) >= abs(dtheta) and abs(dphi) >= thresholds.vertical:
        return SpatialRelation.ABOVE if dphi > 0 else SpatialRelation.BELOW
    return SpatialRelation.RIGHT_OF if dtheta > 0 else SpatialRelation.LEFT_OF
