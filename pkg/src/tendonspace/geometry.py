"""Rigid-body poses, the cylindrical scaffold, and the overtube model.

Conventions used throughout the toolkit:

* World frame: the scaffold axis is the X-axis (through the origin,
  spanning ``0 <= x <= length``); gravity points along -Z.
* Orientation is yaw-then-pitch, ``R = Rz(yaw) @ Ry(pitch)``. Roll is an
  uncontrolled degree of freedom and is not represented.
* The overtube body frame is anchored at the tube tip: tip at the origin,
  tip tangent along +X, so the tube extends into x < 0. Attachment points
  are stored in this frame.
* All lengths in mm, angles in radians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConstraintViolationError, GeometryDomainError

TWO_PI = 2.0 * math.pi

# Arc shorter than this (radians) is treated as exactly straight.
_STRAIGHT_BEND_EPS = 1e-12


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]; exact identity for angles already there."""
    a = math.remainder(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


def canonical_angle(angle: float) -> float:
    """Reduce an angle for trig evaluation.

    Uses IEEE ``remainder``, which is exact: 2*pi maps to exactly 0.0,
    angles already in [-pi, pi] pass through bit-identically, and the
    reduction is odd-symmetric (needed for the mirror-image invariants).
    """
    return math.remainder(angle, TWO_PI)


def circular_mean(angles) -> float:
    """Circular mean of angles in radians, wrapped into (-pi, pi]."""
    a = np.asarray(angles, dtype=float)
    if a.size == 0:
        raise GeometryDomainError("circular mean of an empty set")
    return wrap_angle(math.atan2(float(np.sin(a).sum()), float(np.cos(a).sum())))


def _as_vec3(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise GeometryDomainError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryDomainError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Pose:
    """Position plus yaw/pitch orientation of the overtube tip frame.

    yaw in (-pi, pi], pitch in (-pi/2, pi/2). Position in mm.
    """

    position: np.ndarray
    yaw: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec3(self.position, "position"))
        if not (math.isfinite(self.yaw) and math.isfinite(self.pitch)):
            raise GeometryDomainError("yaw/pitch must be finite")
        if not (-math.pi < self.yaw <= math.pi):
            raise GeometryDomainError(f"yaw {self.yaw} outside (-pi, pi]")
        if not (-math.pi / 2 < self.pitch < math.pi / 2):
            raise GeometryDomainError(f"pitch {self.pitch} outside (-pi/2, pi/2)")

    @cached_property
    def rotation(self) -> np.ndarray:
        """World-from-body rotation, Rz(yaw) @ Ry(pitch)."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        return np.array(
            [
                [cy * cp, -sy, cy * sp],
                [sy * cp, cy, sy * sp],
                [-sp, 0.0, cp],
            ]
        )


def pose_to_world(pose: Pose, local) -> np.ndarray:
    """Map a body-frame point (mm) to world coordinates."""
    local = np.asarray(local, dtype=float)
    return pose.rotation @ local + pose.position


def world_to_pose(pose: Pose, world) -> np.ndarray:
    """Inverse of :func:`pose_to_world`."""
    world = np.asarray(world, dtype=float)
    return pose.rotation.T @ (world - pose.position)


def reflect_pose(pose: Pose) -> Pose:
    """Mirror a pose about the XZ-plane (y -> -y, yaw -> -yaw)."""
    p = pose.position
    return Pose(
        position=np.array([p[0], -p[1], p[2]]),
        yaw=wrap_angle(-pose.yaw),
        pitch=pose.pitch,
    )


@dataclass(frozen=True)
class ScaffoldCylinder:
    """Rigid peripheral cylinder carrying the tendon entry (fulcrum) points.

    The axis is the world X-axis; the cylinder spans 0 <= x <= length.
    """

    diameter: float
    length: float

    def __post_init__(self):
        if not (self.diameter > 0 and math.isfinite(self.diameter)):
            raise GeometryDomainError(f"diameter must be > 0, got {self.diameter}")
        if not (self.length > 0 and math.isfinite(self.length)):
            raise GeometryDomainError(f"length must be > 0, got {self.length}")

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        if p[0] < -tol or p[0] > self.length + tol:
            return False
        return p[1] * p[1] + p[2] * p[2] <= (self.radius + tol) ** 2


@dataclass(frozen=True)
class EntryPoint:
    """Tendon fulcrum on the scaffold surface.

    angle: radians around the scaffold axis, measured from +Y toward +Z.
    axial: mm along the scaffold axis.
    """

    angle: float
    axial: float

    def __post_init__(self):
        if not (math.isfinite(self.angle) and math.isfinite(self.axial)):
            raise GeometryDomainError("entry point fields must be finite")


def entry_point_to_world(scaffold: ScaffoldCylinder, e: EntryPoint) -> np.ndarray:
    """Resolve an entry point to its 3-D location on the cylinder surface."""
    if e.axial < 0.0 or e.axial > scaffold.length:
        raise GeometryDomainError(
            f"entry axial {e.axial} outside [0, {scaffold.length}]"
        )
    r = scaffold.radius
    a = canonical_angle(e.angle)
    return np.array([e.axial, r * math.cos(a), r * math.sin(a)])


def reflect_entry_point(e: EntryPoint) -> EntryPoint:
    # y = r cos(angle), so the XZ-mirror (y -> -y) is angle -> pi - angle.
    return EntryPoint(angle=wrap_angle(math.pi - e.angle), axial=e.axial)


@dataclass(frozen=True)
class OvertubeSegment:
    """One centerline piece: straight if bend_angle == 0, else a circular
    arc of the given arc length turning by bend_angle in the plane selected
    by bend_plane_angle (0 = toward body +Z, pi/2 = toward body +Y)."""

    length: float
    bend_angle: float = 0.0
    bend_plane_angle: float = 0.0

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise GeometryDomainError(f"segment length must be > 0, got {self.length}")
        if not math.isfinite(self.bend_angle) or not math.isfinite(self.bend_plane_angle):
            raise GeometryDomainError("segment angles must be finite")


@dataclass(frozen=True)
class OvertubeSpec:
    """Parametric overtube: total length, centerline segments, the offset of
    the front attachment ring behind the tip, and the tube surface radius on
    which attachment points sit."""

    total_length: float
    segments: tuple[OvertubeSegment, ...]
    front_ring_offset: float
    attachment_ring_radius: float

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise GeometryDomainError("overtube needs at least one segment")
        total = sum(s.length for s in self.segments)
        if abs(total - self.total_length) > 1e-9:
            raise GeometryDomainError(
                f"segment lengths sum to {total}, expected {self.total_length}"
            )
        if not (0.0 <= self.front_ring_offset <= self.total_length):
            raise GeometryDomainError("front_ring_offset outside [0, total_length]")
        if not (self.attachment_ring_radius > 0):
            raise GeometryDomainError("attachment_ring_radius must be > 0")

    @staticmethod
    def straight(
        total_length: float = 120.0,
        front_ring_offset: float = 10.0,
        attachment_ring_radius: float = 3.0,
    ) -> "OvertubeSpec":
        return OvertubeSpec(
            total_length=total_length,
            segments=(OvertubeSegment(length=total_length),),
            front_ring_offset=front_ring_offset,
            attachment_ring_radius=attachment_ring_radius,
        )

    @staticmethod
    def single_curved(
        total_length: float = 120.0,
        bend_angle: float = math.radians(40.0),
        bend_length: float = 40.0,
        bend_plane_angle: float = 0.0,
        front_ring_offset: float = 10.0,
        attachment_ring_radius: float = 3.0,
    ) -> "OvertubeSpec":
        return OvertubeSpec(
            total_length=total_length,
            segments=(
                OvertubeSegment(length=total_length - bend_length),
                OvertubeSegment(
                    length=bend_length,
                    bend_angle=bend_angle,
                    bend_plane_angle=bend_plane_angle,
                ),
            ),
            front_ring_offset=front_ring_offset,
            attachment_ring_radius=attachment_ring_radius,
        )

    @staticmethod
    def double_curved(
        total_length: float = 120.0,
        bend_angle: float = math.radians(35.0),
        bend_length: float = 30.0,
        bend_plane_angle: float = 0.0,
        front_ring_offset: float = 10.0,
        attachment_ring_radius: float = 3.0,
    ) -> "OvertubeSpec":
        # S-shape: two opposite bends of equal magnitude near the tip.
        return OvertubeSpec(
            total_length=total_length,
            segments=(
                OvertubeSegment(length=total_length - 2 * bend_length),
                OvertubeSegment(
                    length=bend_length,
                    bend_angle=bend_angle,
                    bend_plane_angle=bend_plane_angle,
                ),
                OvertubeSegment(
                    length=bend_length,
                    bend_angle=-bend_angle,
                    bend_plane_angle=bend_plane_angle,
                ),
            ),
            front_ring_offset=front_ring_offset,
            attachment_ring_radius=attachment_ring_radius,
        )


def reflect_overtube_spec(spec: OvertubeSpec) -> OvertubeSpec:
    """Mirror an overtube about the XZ-plane (bend planes flip sign)."""
    return OvertubeSpec(
        total_length=spec.total_length,
        segments=tuple(
            OvertubeSegment(s.length, s.bend_angle, -s.bend_plane_angle)
            for s in spec.segments
        ),
        front_ring_offset=spec.front_ring_offset,
        attachment_ring_radius=spec.attachment_ring_radius,
    )


def scale_overtube_spec(spec: OvertubeSpec, s: float) -> OvertubeSpec:
    """Uniformly scale all lengths (bend angles are scale-free)."""
    return OvertubeSpec(
        total_length=spec.total_length * s,
        segments=tuple(
            OvertubeSegment(seg.length * s, seg.bend_angle, seg.bend_plane_angle)
            for seg in spec.segments
        ),
        front_ring_offset=spec.front_ring_offset * s,
        attachment_ring_radius=spec.attachment_ring_radius * s,
    )


@dataclass(frozen=True)
class AttachmentPoint:
    """Tendon termination on the overtube surface, in the tip-anchored
    body frame (mm)."""

    local_position: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "local_position", _as_vec3(self.local_position, "local_position")
        )


def reflect_attachment_point(a: AttachmentPoint) -> AttachmentPoint:
    p = a.local_position
    return AttachmentPoint(local_position=np.array([p[0], -p[1], p[2]]))


class _SegmentFrame:
    """Start frame of one centerline segment during construction (base
    coordinates: base at origin, base tangent +X)."""

    __slots__ = ("start", "rotation", "segment", "arc_start")

    def __init__(self, start, rotation, segment, arc_start):
        self.start = start
        self.rotation = rotation
        self.segment = segment
        self.arc_start = arc_start


def _segment_step(segment: OvertubeSegment):
    """Local end-position and rotation for a full segment traversal."""
    return _segment_partial(segment, segment.length)


def _segment_partial(segment: OvertubeSegment, arc: float):
    """Local displacement/rotation after `arc` mm along the segment."""
    theta_full = segment.bend_angle
    if abs(theta_full) < _STRAIGHT_BEND_EPS:
        return np.array([arc, 0.0, 0.0]), np.eye(3)
    theta = theta_full * (arc / segment.length)
    rho = segment.length / theta_full  # signed bend radius
    phi = segment.bend_plane_angle
    cphi, sphi = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    # Bend direction (0, sin phi, cos phi): phi -> -phi mirrors the tube
    # about the XZ-plane exactly.
    disp = np.array(
        [rho * st, rho * (1.0 - ct) * sphi, rho * (1.0 - ct) * cphi]
    )
    # Rotation about the local binormal tangent x bend-direction by theta.
    axis = np.array([0.0, -cphi, sphi])
    k = axis
    kmat = np.array(
        [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]]
    )
    rot = np.eye(3) + st * kmat + (1.0 - ct) * (kmat @ kmat)
    return disp, rot


class OvertubeModel:
    """Realized overtube geometry.

    Public queries return tip-anchored body coordinates (tip at origin, tip
    tangent +X). ``tip_in_base`` exposes where the tip landed relative to
    the tube base, which characterizes the curve shape.
    """

    def __init__(self, spec: OvertubeSpec):
        for seg in spec.segments:
            if abs(seg.bend_angle) >= math.pi:
                raise GeometryDomainError(
                    f"bend angle {seg.bend_angle} rad >= pi would self-intersect"
                )
        self.spec = spec
        frames = []
        pos = np.zeros(3)
        rot = np.eye(3)
        arc = 0.0
        for seg in spec.segments:
            frames.append(_SegmentFrame(pos, rot, seg, arc))
            disp, step_rot = _segment_step(seg)
            pos = pos + rot @ disp
            rot = rot @ step_rot
            arc += seg.length
        self._frames = frames
        self._tip_position_base = pos
        self._tip_rotation_base = rot

    @property
    def total_length(self) -> float:
        return self.spec.total_length

    @property
    def tip_in_base(self) -> tuple[np.ndarray, np.ndarray]:
        """(position, rotation) of the tip frame in base coordinates."""
        return self._tip_position_base, self._tip_rotation_base

    def _frame_from_base(self, arc_from_base: float):
        if arc_from_base < -1e-9 or arc_from_base > self.total_length + 1e-9:
            raise GeometryDomainError(
                f"arc length {arc_from_base} outside [0, {self.total_length}]"
            )
        arc_from_base = min(max(arc_from_base, 0.0), self.total_length)
        frame = self._frames[-1]
        for f in self._frames:
            if arc_from_base <= f.arc_start + f.segment.length + 1e-12:
                frame = f
                break
        local_arc = arc_from_base - frame.arc_start
        disp, rot = _segment_partial(frame.segment, local_arc)
        return frame.start + frame.rotation @ disp, frame.rotation @ rot

    def frame_at(self, arc_from_tip: float) -> tuple[np.ndarray, np.ndarray]:
        """Centerline point and tangent frame at an arc distance behind the
        tip, in body (tip) coordinates."""
        pos_b, rot_b = self._frame_from_base(self.total_length - arc_from_tip)
        tip_rot_t = self._tip_rotation_base.T
        return tip_rot_t @ (pos_b - self._tip_position_base), tip_rot_t @ rot_b

    def centerline_point(self, arc_from_tip: float) -> np.ndarray:
        return self.frame_at(arc_from_tip)[0]

    def surface_point(self, arc_from_tip: float, ring_angle: float) -> np.ndarray:
        """Point on the tube surface: ring at `arc_from_tip`, angle measured
        from the local +Y normal toward +Z."""
        center, rot = self.frame_at(arc_from_tip)
        a = canonical_angle(ring_angle)
        r = self.spec.attachment_ring_radius
        return center + rot @ np.array([0.0, r * math.cos(a), r * math.sin(a)])

    @property
    def tip_direction(self) -> np.ndarray:
        return np.array([1.0, 0.0, 0.0])

    @property
    def base_direction(self) -> np.ndarray:
        """Tube tangent at the base, in body coordinates."""
        return self.frame_at(self.total_length)[1][:, 0]

    @property
    def front_ring_center(self) -> np.ndarray:
        return self.centerline_point(self.spec.front_ring_offset)

    @property
    def rear_ring_center(self) -> np.ndarray:
        """Rear-most attachment ring, at the tube base."""
        return self.centerline_point(self.total_length)

    def surface_distance(self, point) -> float:
        """Unsigned distance (mm) from a body-frame point to the tube
        surface, used to validate attachment points."""
        p = np.asarray(point, dtype=float)
        best = math.inf
        for f in self._frames:
            d = self._distance_to_segment_centerline(p, f)
            best = min(best, abs(d - self.spec.attachment_ring_radius))
        return best

    def _distance_to_segment_centerline(self, p_body, frame: _SegmentFrame) -> float:
        # Work in base coordinates, then per-segment local coordinates.
        tip_pos, tip_rot = self._tip_position_base, self._tip_rotation_base
        p_base = tip_rot @ p_body + tip_pos
        local = frame.rotation.T @ (p_base - frame.start)
        seg = frame.segment
        if abs(seg.bend_angle) < _STRAIGHT_BEND_EPS:
            t = min(max(local[0], 0.0), seg.length)
            return float(np.linalg.norm(local - np.array([t, 0.0, 0.0])))
        theta_full = seg.bend_angle
        rho = seg.length / theta_full
        phi = seg.bend_plane_angle
        d_hat = np.array([0.0, math.sin(phi), math.cos(phi)])
        axis = np.array([0.0, -math.cos(phi), math.sin(phi)])
        center = rho * d_hat
        radius = abs(rho)
        v = local - center
        h = float(v @ axis)
        v_plane = v - h * axis
        norm_vp = float(np.linalg.norm(v_plane))
        if norm_vp < 1e-12:
            # On the arc axis: every arc point is equidistant.
            return math.hypot(radius, h)
        u0 = -math.copysign(1.0, rho) * d_hat  # radial direction at arc start
        # Sweep direction such that the arc spans alpha in [0, |theta|].
        sweep_axis = math.copysign(1.0, theta_full) * axis
        alpha = math.atan2(
            float(np.cross(u0, v_plane / norm_vp) @ sweep_axis),
            float(u0 @ (v_plane / norm_vp)),
        )
        if alpha < 0.0:
            alpha += TWO_PI
        alpha = min(max(alpha, 0.0), abs(theta_full))
        u_alpha = math.cos(alpha) * u0 + math.sin(alpha) * np.cross(sweep_axis, u0)
        closest = center + radius * u_alpha
        return float(np.linalg.norm(local - closest))


def build_overtube(spec: OvertubeSpec) -> OvertubeModel:
    """Realize the overtube centerline, attachment rings, and tip frame.

    Rejects self-intersecting arcs (|bend_angle| >= pi).
    """
    return OvertubeModel(spec)


def attachment_on_ring(
    model: OvertubeModel, arc_from_tip: float, ring_angle: float
) -> AttachmentPoint:
    """Convenience constructor for an attachment on a given ring."""
    if not (0.0 <= arc_from_tip <= model.total_length):
        raise ConstraintViolationError(
            f"ring arc {arc_from_tip} outside the tube [0, {model.total_length}]"
        )
    return AttachmentPoint(local_position=model.surface_point(arc_from_tip, ring_angle))
