"""Ingestion of recorded task executions into a task-space.

Recording CSV format (UTF-8, '#' starts a comment line), header exactly:

    time_s,x_mm,y_mm,z_mm,qw,qx,qy,qz,fx_N,fy_N,fz_N,tx_Nmm,ty_Nmm,tz_Nmm

The six wrench columns are optional as a block; individual rows may leave
them empty when no load was recorded for that sample. Orientations are
unit quaternions (w, x, y, z); on conversion to poses the roll component
is discarded, matching the yaw/pitch-only pose model. Optional comment
directives `# instrument_id: ...` and `# frame_id: ...` set the stream
metadata.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryDomainError, TaskDataError
from .geometry import Pose, circular_mean, wrap_angle
from .statics import FIVE_DOF, Wrench, dof_count

_HEADER_POSE = ["time_s", "x_mm", "y_mm", "z_mm", "qw", "qx", "qy", "qz"]
_HEADER_WRENCH = ["fx_N", "fy_N", "fz_N", "tx_Nmm", "ty_Nmm", "tz_Nmm"]
_QUAT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class TaskSample:
    time: float
    position: np.ndarray  # mm
    quaternion: np.ndarray  # (w, x, y, z), unit within 1e-6
    force: np.ndarray | None = None  # N
    torque: np.ndarray | None = None  # N*mm

    @property
    def has_wrench(self) -> bool:
        return self.force is not None


@dataclass(frozen=True)
class TaskRecording:
    samples: tuple[TaskSample, ...]
    instrument_id: str = "instrument"
    frame_id: str = "world"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        prev = -math.inf
        for i, s in enumerate(self.samples):
            if not s.time > prev:
                raise TaskDataError(
                    f"sample {i} time {s.time} not strictly increasing"
                )
            prev = s.time
            norm = float(np.linalg.norm(s.quaternion))
            if abs(norm - 1.0) > _QUAT_NORM_TOL:
                raise TaskDataError(f"sample {i} quaternion norm {norm} not unit")

    @property
    def duration(self) -> float:
        if not self.samples:
            return 0.0
        return self.samples[-1].time - self.samples[0].time


@dataclass(frozen=True)
class TaskSpace:
    """Poses paired index-for-index with required wrenches, plus the
    aggregate placement statistics (centroid, circular-mean yaw, mean
    pitch) used to position configurations."""

    poses: tuple[Pose, ...]
    wrenches: tuple[Wrench, ...]
    centroid: np.ndarray = field(init=False)
    mean_yaw: float = field(init=False)
    mean_pitch: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "wrenches", tuple(self.wrenches))
        if not self.poses:
            raise GeometryDomainError("task-space must contain >= 1 pose")
        if len(self.poses) != len(self.wrenches):
            raise GeometryDomainError("poses and wrenches must pair 1:1")
        positions = np.array([p.position for p in self.poses])
        object.__setattr__(self, "centroid", positions.mean(axis=0))
        object.__setattr__(
            self, "mean_yaw", circular_mean([p.yaw for p in self.poses])
        )
        object.__setattr__(
            self, "mean_pitch", float(np.mean([p.pitch for p in self.poses]))
        )

    def __len__(self) -> int:
        return len(self.poses)


def quaternion_to_yaw_pitch(q) -> tuple[float, float]:
    """Z-Y-X decomposition of a unit quaternion; roll is discarded."""
    w, x, y, z = (float(v) for v in q)
    # Rotation matrix entries needed for yaw/pitch.
    r00 = 1.0 - 2.0 * (y * y + z * z)
    r10 = 2.0 * (x * y + w * z)
    r20 = 2.0 * (x * z - w * y)
    yaw = math.atan2(r10, r00)
    pitch = math.asin(max(-1.0, min(1.0, -r20)))
    return wrap_angle(yaw), pitch


def yaw_pitch_to_quaternion(yaw: float, pitch: float) -> np.ndarray:
    """Unit quaternion for Rz(yaw) @ Ry(pitch) (roll = 0)."""
    cy, sy = math.cos(yaw / 2.0), math.sin(yaw / 2.0)
    cp, sp = math.cos(pitch / 2.0), math.sin(pitch / 2.0)
    # qz(yaw) * qy(pitch)
    return np.array([cy * cp, -sy * sp, cy * sp, sy * cp])


def _parse_float(text: str, line_no: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise TaskDataError(f"column {col}: cannot parse {text!r}", line=line_no)


def load_task_recording(source, format: str = "csv") -> TaskRecording:
    """Parse a recording from a path, file object, or bytes/str payload.

    Raises :class:`TaskDataError` with the offending line number for
    non-monotonic time, non-unit quaternions, or malformed rows.
    """
    if format != "csv":
        raise TaskDataError(f"unsupported format {format!r}")
    if isinstance(source, bytes):
        fh = io.StringIO(source.decode("utf-8"))
        close = False
    elif isinstance(source, str) and "\n" not in source:
        fh = open(source, "r", encoding="utf-8")
        close = True
    elif isinstance(source, str):
        fh = io.StringIO(source)
        close = False
    elif hasattr(source, "read"):
        raw = source.read()
        fh = io.StringIO(raw.decode("utf-8") if isinstance(raw, bytes) else raw)
        close = False
    else:
        fh = open(source, "r", encoding="utf-8")
        close = True
    try:
        return _parse_recording(fh)
    finally:
        if close:
            fh.close()


def _parse_recording(fh) -> TaskRecording:
    instrument_id = "instrument"
    frame_id = "world"
    header = None
    has_wrench = False
    samples: list[TaskSample] = []
    prev_time = -math.inf
    for line_no, raw in enumerate(fh, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("instrument_id:"):
                instrument_id = body.split(":", 1)[1].strip()
            elif body.startswith("frame_id:"):
                frame_id = body.split(":", 1)[1].strip()
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if cells == _HEADER_POSE:
                has_wrench = False
            elif cells == _HEADER_POSE + _HEADER_WRENCH:
                has_wrench = True
            else:
                raise TaskDataError(
                    f"bad header {','.join(cells)!r}", line=line_no
                )
            header = cells
            continue
        expected = len(header)
        if len(cells) != expected:
            raise TaskDataError(
                f"expected {expected} columns, got {len(cells)}", line=line_no
            )
        time = _parse_float(cells[0], line_no, "time_s")
        if not time > prev_time:
            raise TaskDataError(
                f"time {time} not greater than previous {prev_time}", line=line_no
            )
        prev_time = time
        position = np.array(
            [_parse_float(cells[i], line_no, _HEADER_POSE[i]) for i in (1, 2, 3)]
        )
        quat = np.array(
            [_parse_float(cells[i], line_no, _HEADER_POSE[i]) for i in (4, 5, 6, 7)]
        )
        norm = float(np.linalg.norm(quat))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise TaskDataError(f"quaternion norm {norm} not unit", line=line_no)
        force = torque = None
        if has_wrench:
            wrench_cells = cells[8:14]
            if any(wrench_cells):
                if not all(wrench_cells):
                    raise TaskDataError(
                        "wrench columns must be all present or all empty",
                        line=line_no,
                    )
                vals = [
                    _parse_float(c, line_no, name)
                    for c, name in zip(wrench_cells, _HEADER_WRENCH)
                ]
                force = np.array(vals[:3])
                torque = np.array(vals[3:])
        samples.append(TaskSample(time, position, quat, force, torque))
    if header is None:
        raise TaskDataError("empty input: no header found")
    return TaskRecording(
        samples=tuple(samples), instrument_id=instrument_id, frame_id=frame_id
    )


def save_task_recording(rec: TaskRecording, path) -> None:
    """Write a recording in the CSV format this module parses."""
    has_wrench = any(s.has_wrench for s in rec.samples)
    header = _HEADER_POSE + (_HEADER_WRENCH if has_wrench else [])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# instrument_id: {rec.instrument_id}\n")
        fh.write(f"# frame_id: {rec.frame_id}\n")
        fh.write(",".join(header) + "\n")
        for s in rec.samples:
            cells = [repr(float(s.time))]
            cells += [repr(float(v)) for v in s.position]
            cells += [repr(float(v)) for v in s.quaternion]
            if has_wrench:
                if s.has_wrench:
                    cells += [repr(float(v)) for v in s.force]
                    cells += [repr(float(v)) for v in s.torque]
                else:
                    cells += [""] * 6
            fh.write(",".join(cells) + "\n")


@dataclass(frozen=True)
class PreprocessOptions:
    """Downsampling/trim window plus the wrench applied to samples that
    carry none (e.g. the 0.1 N overtube weight)."""

    downsample_hz: float | None = None
    trim: tuple[float, float] | None = None
    default_wrench: Wrench | None = None
    dof_mode: str = FIVE_DOF


def preprocess(rec: TaskRecording, opts: PreprocessOptions | None = None) -> TaskSpace:
    """Convert a recording to a task-space.

    Quaternions are reduced to yaw/pitch (roll discarded). Downsampling
    picks the nearest sample to each uniform target time. Recorded torques
    are dropped in five_dof mode; samples without a recorded wrench get
    ``opts.default_wrench`` (zero if unset).
    """
    opts = opts or PreprocessOptions()
    samples = list(rec.samples)
    if opts.trim is not None:
        t0, t1 = opts.trim
        samples = [s for s in samples if t0 <= s.time <= t1]
    if not samples:
        raise TaskDataError("no samples left after trim")
    if opts.downsample_hz is not None:
        if opts.downsample_hz <= 0:
            raise TaskDataError("downsample_hz must be > 0")
        times = np.array([s.time for s in samples])
        t_start, t_end = times[0], times[-1]
        n_targets = max(1, int(math.floor((t_end - t_start) * opts.downsample_hz)) + 1)
        targets = t_start + np.arange(n_targets) / opts.downsample_hz
        picked = []
        for t in targets:
            j = int(np.argmin(np.abs(times - t)))  # ties: earlier sample
            if not picked or picked[-1] != j:
                picked.append(j)
        samples = [samples[j] for j in picked]
    m = dof_count(opts.dof_mode)
    default = opts.default_wrench or Wrench.zero(opts.dof_mode)
    if default.as_vector().shape != (m,):
        raise TaskDataError("default_wrench dimension does not match dof_mode")
    poses = []
    wrenches = []
    for s in samples:
        yaw, pitch = quaternion_to_yaw_pitch(s.quaternion)
        poses.append(Pose(position=s.position.copy(), yaw=yaw, pitch=pitch))
        if s.has_wrench:
            if opts.dof_mode == FIVE_DOF:
                # Loadcell torques are dropped for the 5-DOF model.
                wrenches.append(Wrench(s.force.copy(), np.zeros(2)))
            else:
                wrenches.append(Wrench(s.force.copy(), s.torque.copy()))
        else:
            wrenches.append(default)
    return TaskSpace(poses=tuple(poses), wrenches=tuple(wrenches))


def synthesize_task(
    shape: str = "arc",
    extent: float = 30.0,
    n_poses: int = 12,
    wrench_profile="gravity",
    seed: int = 0,
    center=(0.0, 0.0, 0.0),
    dof_mode: str = FIVE_DOF,
) -> TaskSpace:
    """Deterministic synthetic task for tests and the bundled demo.

    shape: "line" (along +X from the center point), "arc" (semicircle in
    the XY-plane, extent = diameter), or "lissajous" (3-D figure inside an
    extent-sized box). wrench_profile: "zero", "gravity" (0.1 N dead
    weight), or an explicit :class:`Wrench` applied to every pose.
    """
    if n_poses < 1:
        raise GeometryDomainError("n_poses must be >= 1")
    center = np.asarray(center, dtype=float)
    rng = np.random.default_rng(seed)
    u = np.linspace(0.0, 1.0, n_poses) if n_poses > 1 else np.array([0.0])
    if shape == "line":
        pts = np.zeros((n_poses, 3))
        pts[:, 0] = u * extent
    elif shape == "arc":
        r = extent / 2.0
        phi = (u - 0.5) * math.pi  # -pi/2 .. pi/2
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), np.zeros(n_poses)], axis=1)
    elif shape == "lissajous":
        a = extent / 2.0
        t = u * 2.0 * math.pi
        pts = np.stack(
            [a * np.sin(t), a * np.sin(2.0 * t), a * np.sin(3.0 * t + 0.5)], axis=1
        )
    else:
        raise GeometryDomainError(f"unknown task shape {shape!r}")
    pts = pts + center
    # Gentle deterministic orientation sweep with seeded jitter.
    yaws = 0.06 * np.sin(2.0 * math.pi * u) + rng.normal(0.0, 0.01, n_poses)
    pitches = 0.05 * np.cos(math.pi * u) + rng.normal(0.0, 0.01, n_poses)
    if isinstance(wrench_profile, Wrench):
        w = wrench_profile
    elif wrench_profile == "gravity":
        w = Wrench.gravity(-0.1, dof_mode)
    elif wrench_profile == "zero":
        w = Wrench.zero(dof_mode)
    else:
        raise GeometryDomainError(f"unknown wrench profile {wrench_profile!r}")
    poses = tuple(
        Pose(position=pts[i], yaw=wrap_angle(float(yaws[i])), pitch=float(pitches[i]))
        for i in range(n_poses)
    )
    return TaskSpace(poses=poses, wrenches=(w,) * n_poses)


def task_to_recording(
    task: TaskSpace, rate_hz: float = 10.0, instrument_id: str = "synthetic"
) -> TaskRecording:
    """Render a task-space as a recording (for writing demo CSV files)."""
    samples = []
    for i, (pose, w) in enumerate(zip(task.poses, task.wrenches)):
        force = w.force.copy()
        torque = np.zeros(3)
        if w.dof_mode != FIVE_DOF:
            torque = w.moment.copy()
        samples.append(
            TaskSample(
                time=i / rate_hz,
                position=pose.position.copy(),
                quaternion=yaw_pitch_to_quaternion(pose.yaw, pose.pitch),
                force=force,
                torque=torque,
            )
        )
    return TaskRecording(samples=tuple(samples), instrument_id=instrument_id)
