"""Exception hierarchy shared across the toolkit."""


class TendonspaceError(Exception):
    """Base class for all toolkit errors."""


class GeometryDomainError(TendonspaceError, ValueError):
    """An input lies outside the geometric domain it must belong to."""


class SingularGeometryError(TendonspaceError):
    """Tendon geometry that cannot support a wrench balance (degenerate
    tendon or rank-deficient wrench matrix). Distinct from a plain
    infeasible tension query, which is a normal value-level outcome."""


class ConstraintViolationError(TendonspaceError, ValueError):
    """A requested layout violates the scaffold/overtube size constraints."""


class TaskDataError(TendonspaceError, ValueError):
    """Malformed task recording input. Carries a line number when the
    problem is tied to a specific CSV row."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
