"""Wrench-matrix construction and optimal tension distribution.

The mechanism is redundantly actuated (n tendons, m controlled degrees of
freedom, n >= m + 1). Tendons can only pull, so balancing an external
wrench w means finding tensions t with

    A @ t + w = 0,    t_min <= t_i <= t_max,

where column i of A stacks the unit pull direction of tendon i and the
(reduced) moment it produces about the tip frame origin. Among all
admissible tensions the solver returns the unique minimizer of
sum((t_i - t_min)^2), which makes the distribution deterministic.

Solver realization: the equality constraint is eliminated through the
nullspace of A, leaving a least-distance problem over the box, which is
solved by a dense active-set method (Lawson-Hanson NNLS on the dual).
No external optimization package is used.

five_dof mode drops the roll moment (about the overtube tip axis): roll is
neither controlled nor represented in :class:`~tendonspace.geometry.Pose`.
Moment components are therefore expressed in the tip frame, rows
``[fx, fy, fz, m_pitch, m_yaw]``. six_dof keeps the full world moment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GeometryDomainError, SingularGeometryError
from .geometry import (
    AttachmentPoint,
    EntryPoint,
    OvertubeModel,
    OvertubeSpec,
    Pose,
    ScaffoldCylinder,
    build_overtube,
    entry_point_to_world,
    reflect_attachment_point,
    reflect_entry_point,
    reflect_overtube_spec,
    scale_overtube_spec,
)

FIVE_DOF = "five_dof"
SIX_DOF = "six_dof"

# Relative singular-value cutoff for the full-row-rank check.
_RANK_TOL = 1e-9
# A tendon shorter than this (mm) is degenerate.
_MIN_TENDON_LENGTH = 1e-6
# Feasibility tolerances (N); see TensionSolution invariants.
_BOUND_TOL = 1e-9

_ON_SURFACE_TOL = 1e-6


def dof_count(dof_mode: str) -> int:
    if dof_mode == FIVE_DOF:
        return 5
    if dof_mode == SIX_DOF:
        return 6
    raise GeometryDomainError(f"unknown dof_mode {dof_mode!r}")


@dataclass(frozen=True)
class Wrench:
    """External force (N) plus moment (N*mm) acting on the overtube.

    five_dof: moment = (pitch, yaw) components in the tip frame.
    six_dof:  moment = full 3-vector.
    """

    force: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        m = np.asarray(self.moment, dtype=float)
        if f.shape != (3,):
            raise GeometryDomainError("wrench force must be a 3-vector")
        if m.shape not in ((2,), (3,)):
            raise GeometryDomainError("wrench moment must be a 2- or 3-vector")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(m))):
            raise GeometryDomainError("wrench components must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "moment", m)

    @property
    def dof_mode(self) -> str:
        return FIVE_DOF if self.moment.shape == (2,) else SIX_DOF

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])

    @staticmethod
    def zero(dof_mode: str = FIVE_DOF) -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(dof_count(dof_mode) - 3))

    @staticmethod
    def from_force(force, dof_mode: str = FIVE_DOF) -> "Wrench":
        return Wrench(np.asarray(force, dtype=float), np.zeros(dof_count(dof_mode) - 3))

    @staticmethod
    def gravity(fz: float = -0.1, dof_mode: str = FIVE_DOF) -> "Wrench":
        """Dead weight acting on the overtube (default 0.1 N downward)."""
        return Wrench.from_force([0.0, 0.0, fz], dof_mode)


def reflect_wrench(w: Wrench) -> Wrench:
    """Mirror a wrench about the XZ-plane (moment is a pseudo-vector)."""
    f = w.force
    force = np.array([f[0], -f[1], f[2]])
    if w.dof_mode == FIVE_DOF:
        moment = np.array([w.moment[0], -w.moment[1]])
    else:
        moment = np.array([-w.moment[0], w.moment[1], -w.moment[2]])
    return Wrench(force, moment)


@dataclass(frozen=True)
class TendonConfiguration:
    """Complete tendon layout: scaffold, overtube, index-paired entry and
    attachment points, and the admissible tension box."""

    scaffold: ScaffoldCylinder
    overtube: OvertubeSpec
    entries: tuple[EntryPoint, ...]
    attachments: tuple[AttachmentPoint, ...]
    t_min: float = 1.0
    t_max: float = 60.0
    dof_mode: str = FIVE_DOF

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "attachments", tuple(self.attachments))
        m = dof_count(self.dof_mode)
        n = len(self.entries)
        if len(self.attachments) != n:
            raise GeometryDomainError(
                f"{n} entries but {len(self.attachments)} attachments"
            )
        if n < m + 1:
            raise GeometryDomainError(
                f"need at least {m + 1} tendons for {self.dof_mode}, got {n}"
            )
        if not (0.0 < self.t_min < self.t_max):
            raise GeometryDomainError(
                f"tension bounds must satisfy 0 < t_min < t_max, "
                f"got [{self.t_min}, {self.t_max}]"
            )
        model = build_overtube(self.overtube)
        for i, e in enumerate(self.entries):
            if e.axial < 0.0 or e.axial > self.scaffold.length:
                raise GeometryDomainError(
                    f"entry {i} axial {e.axial} outside the scaffold"
                )
        for i, a in enumerate(self.attachments):
            d = model.surface_distance(a.local_position)
            if d > _ON_SURFACE_TOL:
                raise GeometryDomainError(
                    f"attachment {i} lies {d:.3g} mm off the overtube surface"
                )

    @property
    def n_tendons(self) -> int:
        return len(self.entries)

    @cached_property
    def overtube_model(self) -> OvertubeModel:
        return build_overtube(self.overtube)

    @cached_property
    def entry_points_world(self) -> np.ndarray:
        return np.array(
            [entry_point_to_world(self.scaffold, e) for e in self.entries]
        )

    @cached_property
    def attachment_points_local(self) -> np.ndarray:
        return np.array([a.local_position for a in self.attachments])


def reflect_configuration(config: TendonConfiguration) -> TendonConfiguration:
    """Mirror a configuration about the XZ-plane, tendon for tendon."""
    return TendonConfiguration(
        scaffold=config.scaffold,
        overtube=reflect_overtube_spec(config.overtube),
        entries=tuple(reflect_entry_point(e) for e in config.entries),
        attachments=tuple(reflect_attachment_point(a) for a in config.attachments),
        t_min=config.t_min,
        t_max=config.t_max,
        dof_mode=config.dof_mode,
    )


def scale_configuration(config: TendonConfiguration, s: float) -> TendonConfiguration:
    """Uniformly scale all geometry by s; tension bounds are unchanged."""
    if s <= 0:
        raise GeometryDomainError("scale factor must be > 0")
    return TendonConfiguration(
        scaffold=ScaffoldCylinder(config.scaffold.diameter * s, config.scaffold.length * s),
        overtube=scale_overtube_spec(config.overtube, s),
        entries=tuple(EntryPoint(e.angle, e.axial * s) for e in config.entries),
        attachments=tuple(
            AttachmentPoint(a.local_position * s) for a in config.attachments
        ),
        t_min=config.t_min,
        t_max=config.t_max,
        dof_mode=config.dof_mode,
    )


@dataclass(frozen=True)
class TensionSolution:
    """Outcome of one tension query.

    When feasible, tensions satisfy the bounds within 1e-9 N and the
    equilibrium residual (inf-norm of A t + w) is at most
    1e-9 * max(1, |w|_inf). When infeasible, tensions hold the
    bound-unconstrained equilibrium point closest to the t_min baseline,
    kept for diagnostics, and margin is 0.
    """

    tensions: np.ndarray
    feasible: bool
    margin: float
    residual: float


def wrench_matrix_from_points(
    entries_world: np.ndarray,
    attachments_world: np.ndarray,
    pose: Pose,
    dof_mode: str = FIVE_DOF,
) -> np.ndarray:
    """Build the m x n wrench matrix from resolved world-frame points.

    Column i is [u_i ; reduced(r_i x u_i)] with u_i the unit vector from
    attachment i toward entry i and r_i the attachment position relative
    to the tip frame origin. Sign convention: A @ t + w = 0.
    """
    entries_world = np.asarray(entries_world, dtype=float)
    attachments_world = np.asarray(attachments_world, dtype=float)
    diff = entries_world - attachments_world
    lengths = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if np.any(lengths <= _MIN_TENDON_LENGTH):
        bad = int(np.argmin(lengths))
        raise SingularGeometryError(
            f"tendon {bad} is degenerate (length {lengths[bad]:.3g} mm)"
        )
    u = diff / lengths[:, None]
    r = attachments_world - pose.position
    moments = np.cross(r, u)
    if dof_mode == SIX_DOF:
        return np.concatenate([u, moments], axis=1).T
    if dof_mode != FIVE_DOF:
        raise GeometryDomainError(f"unknown dof_mode {dof_mode!r}")
    # Express moments in the tip frame and drop the roll component.
    moments_body = moments @ pose.rotation  # == (R^T m^T)^T
    return np.concatenate([u, moments_body[:, 1:]], axis=1).T


def wrench_matrix(config: TendonConfiguration, pose: Pose) -> np.ndarray:
    """Wrench matrix of a configuration at a pose (m x n)."""
    rot = pose.rotation
    attachments_world = config.attachment_points_local @ rot.T + pose.position
    return wrench_matrix_from_points(
        config.entry_points_world, attachments_world, pose, config.dof_mode
    )


def _nnls(E: np.ndarray, f: np.ndarray, max_iter: int) -> np.ndarray:
    """Dense Lawson-Hanson nonnegative least squares.

    Deterministic: the entering variable is the largest-gradient candidate,
    ties resolved by lowest index.
    """
    mrows, p = E.shape
    u = np.zeros(p)
    passive = np.zeros(p, dtype=bool)
    resid = -f.copy()
    grad_tol = 1e-12 * max(1.0, float(np.abs(E).max())) * max(1.0, float(np.abs(f).max()))
    for _ in range(max_iter):
        w = -(E.T @ resid)
        w[passive] = -np.inf
        j = int(np.argmax(w))
        if w[j] <= grad_tol:
            break
        passive[j] = True
        for _ in range(max_iter):
            idx = np.flatnonzero(passive)
            s_sub, *_ = np.linalg.lstsq(E[:, idx], f, rcond=None)
            if np.all(s_sub > 0.0):
                u = np.zeros(p)
                u[idx] = s_sub
                break
            mask = s_sub <= 0.0
            denom = u[idx][mask] - s_sub[mask]
            steps = np.where(denom > 1e-300, u[idx][mask] / denom, 0.0)
            alpha = float(np.min(steps))
            u[idx] = u[idx] + alpha * (s_sub - u[idx])
            passive[idx] = u[idx] > 1e-14
            u[~passive] = 0.0
        resid = E @ u - f
    return u


def _least_distance(G: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    """min |z| subject to G z >= h; None when the constraints are
    incompatible (Lawson-Hanson LDP reduction to NNLS)."""
    q, k = G.shape
    # Normalize each constraint row for conditioning (scale-invariant set).
    scale = np.maximum(np.abs(G).max(axis=1), np.abs(h))
    scale = np.where(scale > 0.0, scale, 1.0)
    Gn = G / scale[:, None]
    hn = h / scale
    E = np.concatenate([Gn.T, hn[None, :]], axis=0)
    f = np.zeros(k + 1)
    f[k] = 1.0
    u = _nnls(E, f, max_iter=max(30, 5 * q))
    resid = E @ u - f
    rnorm = float(np.linalg.norm(resid))
    if rnorm <= 1e-10:
        return None
    return -resid[:k] / resid[k]


class TensionProblem:
    """Factorized statics of one (configuration, pose) pair, reusable
    across many wrench queries."""

    def __init__(self, A: np.ndarray, t_min: float, t_max: float):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            raise GeometryDomainError("wrench matrix must be 2-D")
        m, n = A.shape
        if not (math.isfinite(t_min) and math.isfinite(t_max)) or t_min > t_max:
            raise GeometryDomainError(f"bad tension bounds [{t_min}, {t_max}]")
        sv = np.linalg.svd(A, compute_uv=False)
        if m > n or sv[-1] <= _RANK_TOL * sv[0] or sv[0] == 0.0:
            raise SingularGeometryError(
                f"wrench matrix rank-deficient (singular values {sv})"
            )
        self.A = A
        self.m, self.n = m, n
        self.t_min, self.t_max = float(t_min), float(t_max)
        self.span = self.t_max - self.t_min
        self.gram = A @ A.T
        # Nullspace basis via the orthogonal projector onto ker(A);
        # modified Gram-Schmidt with largest-column pivoting.
        proj = np.eye(n) - A.T @ np.linalg.solve(self.gram, A)
        self.nullspace = self._orthonormal_columns(proj, n - m)
        self._lower = np.full(n, self.t_min)

    @staticmethod
    def _orthonormal_columns(proj: np.ndarray, k: int) -> np.ndarray:
        cols = []
        work = proj.copy()
        for _ in range(k):
            norms = np.linalg.norm(work, axis=0)
            j = int(np.argmax(norms))
            if norms[j] < 1e-12:
                break
            q = work[:, j] / norms[j]
            cols.append(q)
            work = work - np.outer(q, q @ work)
        if len(cols) != k:
            raise SingularGeometryError("failed to span the tendon nullspace")
        return np.array(cols).T

    def solve(self, w) -> TensionSolution:
        w = w.as_vector() if isinstance(w, Wrench) else np.asarray(w, dtype=float)
        if w.shape != (self.m,):
            raise GeometryDomainError(
                f"wrench has dimension {w.shape}, expected ({self.m},)"
            )
        # Shift to x = t - t_min in [0, span]; A x = -w - A t_min.
        rhs = -w - self.A @ self._lower
        x_min_norm = self.A.T @ np.linalg.solve(self.gram, rhs)
        N = self.nullspace
        G = np.concatenate([N, -N], axis=0)
        h = np.concatenate([-x_min_norm, x_min_norm - self.span])
        z = _least_distance(G, h)
        w_scale = max(1.0, float(np.abs(w).max()) if w.size else 1.0)
        if z is None:
            t_diag = self._lower + x_min_norm
            residual = float(np.abs(self.A @ t_diag + w).max())
            return TensionSolution(
                tensions=t_diag, feasible=False, margin=0.0, residual=residual
            )
        t = self._lower + x_min_norm + N @ z
        residual = float(np.abs(self.A @ t + w).max())
        violation = float(
            np.maximum(self.t_min - t, t - self.t_max).max()
        )
        feasible = violation <= _BOUND_TOL and residual <= _BOUND_TOL * w_scale
        if not feasible:
            return TensionSolution(
                tensions=t, feasible=False, margin=0.0, residual=residual
            )
        margin = max(
            0.0, float(np.minimum(t - self.t_min, self.t_max - t).min())
        )
        return TensionSolution(
            tensions=t, feasible=True, margin=margin, residual=residual
        )


def tension_distribution(
    A: np.ndarray, w, t_min: float, t_max: float
) -> TensionSolution:
    """Optimal tension distribution for one wrench.

    Returns the unique minimizer of sum((t_i - t_min)^2) over
    {A t = -w, t_min <= t <= t_max} when that set is nonempty; otherwise
    an infeasible solution carrying the closest equilibrium point.

    Raises :class:`SingularGeometryError` when A is not full row rank
    (relative singular-value tolerance 1e-9), which is distinct from
    infeasibility.
    """
    return TensionProblem(A, t_min, t_max).solve(w)


def pose_problem(config: TendonConfiguration, pose: Pose) -> TensionProblem:
    """Factorized tension problem for a configuration at a pose."""
    A = wrench_matrix(config, pose)
    return TensionProblem(A, config.t_min, config.t_max)


def is_wrench_feasible(
    config: TendonConfiguration, pose: Pose, w: Wrench
) -> tuple[bool, float]:
    """Whether bounded tensions exist that balance w at this pose.

    Returns (feasible, margin); propagates SingularGeometryError for
    degenerate geometry.
    """
    sol = pose_problem(config, pose).solve(w)
    return sol.feasible, sol.margin
