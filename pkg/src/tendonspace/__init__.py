"""Wrench-feasible workspace estimation and tendon-layout optimization
for tendon-driven parallel mechanisms operating inside a cylindrical
scaffold."""

from .errors import (
    ConstraintViolationError,
    GeometryDomainError,
    SingularGeometryError,
    TaskDataError,
    TendonspaceError,
)
from .geometry import (
    AttachmentPoint,
    EntryPoint,
    OvertubeModel,
    OvertubeSegment,
    OvertubeSpec,
    Pose,
    ScaffoldCylinder,
    build_overtube,
    entry_point_to_world,
    pose_to_world,
)
from .statics import (
    TendonConfiguration,
    TensionSolution,
    Wrench,
    is_wrench_feasible,
    tension_distribution,
    wrench_matrix,
)

__version__ = "0.1.0"
