"""Voxel-grid estimation of the wrench-feasible workspace.

A pose grid is laid over an axis-aligned box inside the scaffold; each
voxel-center pose is tested against every wrench in the test set, and the
workspace volume is the feasible voxel count times the voxel volume.
Voxel centers are generated symmetrically about the box midpoint so that
mirrored or uniformly scaled grids produce exactly mirrored/scaled
centers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryDomainError, SingularGeometryError
from .geometry import Pose, wrap_angle
from .statics import TendonConfiguration, Wrench, pose_problem

_EXPORT_SCHEMA = "tendonspace-workspace/1"


@dataclass(frozen=True)
class OrientationPolicy:
    """Orientation(s) at which voxel poses are evaluated.

    kind is one of "fixed", "task_mean", "list"; a voxel counts as
    feasible only if every listed orientation passes.
    """

    kind: str
    orientations: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.kind not in ("fixed", "task_mean", "list"):
            raise GeometryDomainError(f"unknown orientation policy {self.kind!r}")
        if not self.orientations:
            raise GeometryDomainError("orientation policy needs >= 1 orientation")
        object.__setattr__(
            self,
            "orientations",
            tuple((float(y), float(p)) for y, p in self.orientations),
        )

    @staticmethod
    def fixed(yaw: float = 0.0, pitch: float = 0.0) -> "OrientationPolicy":
        return OrientationPolicy("fixed", ((yaw, pitch),))

    @staticmethod
    def task_mean(task) -> "OrientationPolicy":
        """Mean yaw/pitch of a task-space (resolved at construction)."""
        return OrientationPolicy("task_mean", ((task.mean_yaw, task.mean_pitch),))

    @staticmethod
    def orientation_list(orientations) -> "OrientationPolicy":
        return OrientationPolicy("list", tuple(orientations))

    def reflected(self) -> "OrientationPolicy":
        return OrientationPolicy(
            self.kind,
            tuple((wrap_angle(-y), p) for y, p in self.orientations),
        )


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned voxel grid: bounds (lo, hi) in mm plus the voxel edge
    length; bounds must lie inside the scaffold."""

    lo: np.ndarray
    hi: np.ndarray
    resolution: float
    orientation_policy: OrientationPolicy = field(
        default_factory=lambda: OrientationPolicy.fixed()
    )

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise GeometryDomainError("grid bounds must be 3-vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise GeometryDomainError("grid bounds must be finite")
        if not np.all(hi > lo):
            raise GeometryDomainError("grid bounds must have positive volume")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise GeometryDomainError("resolution must be > 0")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if min(self.shape) < 1:
            raise GeometryDomainError(
                "grid bounds shorter than one voxel along some axis"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        span = self.hi - self.lo
        return tuple(int(math.floor(s / self.resolution + 1e-12)) for s in span)

    def axis_centers(self, axis: int) -> np.ndarray:
        """Voxel centers along one axis, symmetric about the box midpoint
        (exact under negation/doubling of the bounds)."""
        n = self.shape[axis]
        mid = (self.lo[axis] + self.hi[axis]) / 2.0
        offsets = (np.arange(n) - (n - 1) / 2.0) * self.resolution
        return mid + offsets

    def voxel_centers(self) -> np.ndarray:
        """All voxel centers, shape (nx*ny*nz, 3), x fastest last."""
        cx, cy, cz = (self.axis_centers(i) for i in range(3))
        xx, yy, zz = np.meshgrid(cx, cy, cz, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)

    def corners(self) -> np.ndarray:
        lo, hi = self.lo, self.hi
        return np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )


def reflect_grid(grid: GridSpec) -> GridSpec:
    """Mirror a grid about the XZ-plane (y bounds negate and swap)."""
    lo = np.array([grid.lo[0], -grid.hi[1], grid.lo[2]])
    hi = np.array([grid.hi[0], -grid.lo[1], grid.hi[2]])
    return GridSpec(lo, hi, grid.resolution, grid.orientation_policy.reflected())


def scale_grid(grid: GridSpec, s: float) -> GridSpec:
    return GridSpec(
        grid.lo * s, grid.hi * s, grid.resolution * s, grid.orientation_policy
    )


@dataclass(frozen=True)
class WorkspaceMap:
    """Boolean wrench-feasibility per voxel plus the grid it lives on."""

    grid: GridSpec
    feasible: np.ndarray  # bool, shape grid.shape
    wrench_set: tuple[Wrench, ...]

    def __post_init__(self):
        f = np.asarray(self.feasible, dtype=bool)
        if f.shape != self.grid.shape:
            raise GeometryDomainError(
                f"feasible array shape {f.shape} != grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "feasible", f)
        object.__setattr__(self, "wrench_set", tuple(self.wrench_set))

    @property
    def feasible_count(self) -> int:
        return int(self.feasible.sum())

    @property
    def volume_cm3(self) -> float:
        return workspace_volume(self)


def workspace_volume(wmap: WorkspaceMap) -> float:
    """Feasible volume in cm^3: count * resolution^3 / 1000, exactly."""
    return wmap.feasible_count * wmap.grid.resolution**3 / 1000.0


@dataclass(frozen=True)
class CoverageFailure:
    pose_index: int
    wrench: Wrench
    margin: float
    reason: str  # "infeasible" | "singular-geometry" | "outside-scaffold"


@dataclass(frozen=True)
class CoverageReport:
    """Per-pose feasibility of a task under its recorded wrenches."""

    total_poses: int
    feasible_poses: int
    failures: tuple[CoverageFailure, ...]
    margins: tuple[float, ...]  # per pose; 0.0 for failed poses

    def __post_init__(self):
        object.__setattr__(self, "failures", tuple(self.failures))
        object.__setattr__(self, "margins", tuple(self.margins))

    @property
    def full_coverage(self) -> bool:
        return not self.failures

    @property
    def coverage_fraction(self) -> float:
        if self.total_poses == 0:
            return 0.0
        return self.feasible_poses / self.total_poses


def _check_grid_in_scaffold(config: TendonConfiguration, grid: GridSpec) -> None:
    scaffold = config.scaffold
    for corner in grid.corners():
        if not scaffold.contains(corner, tol=1e-9):
            raise GeometryDomainError(
                f"grid corner {corner.tolist()} lies outside the scaffold"
            )


def _evaluate_voxel_block(config, centers, orientations, wrenches) -> np.ndarray:
    out = np.zeros(len(centers), dtype=bool)
    for i, center in enumerate(centers):
        ok = True
        for yaw, pitch in orientations:
            pose = Pose(position=center, yaw=yaw, pitch=pitch)
            try:
                problem = pose_problem(config, pose)
            except SingularGeometryError:
                ok = False
                break
            for w in wrenches:
                if not problem.solve(w).feasible:
                    ok = False
                    break
            if not ok:
                break
        out[i] = ok
    return out


def estimate_workspace(
    config: TendonConfiguration,
    grid: GridSpec,
    wrenches,
    threads: int = 1,
) -> WorkspaceMap:
    """Scan the grid; a voxel is feasible iff every wrench in `wrenches`
    can be balanced at the voxel-center pose (at every policy orientation).

    The result is a pure function of the inputs: evaluation order and
    `threads` do not affect it.
    """
    wrenches = tuple(wrenches)
    if not wrenches:
        raise GeometryDomainError("wrench set must be non-empty (use the zero wrench)")
    m_expected = 5 if config.dof_mode == "five_dof" else 6
    for w in wrenches:
        if w.as_vector().shape != (m_expected,):
            raise GeometryDomainError("wrench dimension does not match dof_mode")
    _check_grid_in_scaffold(config, grid)
    centers = grid.voxel_centers()
    orientations = grid.orientation_policy.orientations
    if threads <= 1 or len(centers) < 64:
        flat = _evaluate_voxel_block(config, centers, orientations, wrenches)
    else:
        blocks = np.array_split(np.arange(len(centers)), threads * 4)
        flat = np.zeros(len(centers), dtype=bool)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                (idx, pool.submit(
                    _evaluate_voxel_block, config, centers[idx], orientations, wrenches
                ))
                for idx in blocks
                if len(idx)
            ]
            for idx, fut in futures:
                flat[idx] = fut.result()
    return WorkspaceMap(
        grid=grid, feasible=flat.reshape(grid.shape), wrench_set=wrenches
    )


def taskspace_coverage(config: TendonConfiguration, task) -> CoverageReport:
    """Check every task pose against its paired wrench."""
    if len(task.poses) == 0:
        raise GeometryDomainError("task is empty")
    failures: list[CoverageFailure] = []
    margins: list[float] = []
    feasible_poses = 0
    for i, (pose, w) in enumerate(zip(task.poses, task.wrenches)):
        if not config.scaffold.contains(pose.position, tol=1e-9):
            failures.append(CoverageFailure(i, w, 0.0, "outside-scaffold"))
            margins.append(0.0)
            continue
        try:
            sol = pose_problem(config, pose).solve(w)
        except SingularGeometryError:
            failures.append(CoverageFailure(i, w, 0.0, "singular-geometry"))
            margins.append(0.0)
            continue
        if sol.feasible:
            feasible_poses += 1
            margins.append(sol.margin)
        else:
            failures.append(CoverageFailure(i, w, sol.margin, "infeasible"))
            margins.append(0.0)
    return CoverageReport(
        total_poses=len(task.poses),
        feasible_poses=feasible_poses,
        failures=tuple(failures),
        margins=tuple(margins),
    )


def wrench_to_dict(w: Wrench) -> dict:
    return {"force_N": w.force.tolist(), "moment_Nmm": w.moment.tolist()}


def grid_to_dict(grid: GridSpec) -> dict:
    return {
        "lo_mm": grid.lo.tolist(),
        "hi_mm": grid.hi.tolist(),
        "resolution_mm": grid.resolution,
        "orientation_policy": {
            "kind": grid.orientation_policy.kind,
            "orientations_rad": [list(o) for o in grid.orientation_policy.orientations],
        },
    }


def workspace_summary(wmap: WorkspaceMap) -> dict:
    """JSON-ready summary of a workspace map."""
    return {
        "schema": _EXPORT_SCHEMA,
        "volume_cm3": workspace_volume(wmap),
        "grid": grid_to_dict(wmap.grid),
        "counts": {
            "total_voxels": int(np.prod(wmap.grid.shape)),
            "feasible_voxels": wmap.feasible_count,
        },
        "wrench_set": [wrench_to_dict(w) for w in wmap.wrench_set],
    }


def write_point_cloud(wmap: WorkspaceMap, path) -> None:
    """CSV point cloud: one row per voxel center with a 0/1 feasible flag."""
    centers = wmap.grid.voxel_centers()
    flags = wmap.feasible.ravel().astype(int)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x_mm,y_mm,z_mm,feasible\n")
        for (x, y, z), flag in zip(centers, flags):
            fh.write(f"{x!r},{y!r},{z!r},{flag}\n")


def write_summary_json(wmap: WorkspaceMap, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(workspace_summary(wmap), fh, indent=2, sort_keys=True)
        fh.write("\n")
