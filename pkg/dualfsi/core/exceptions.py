"""Custom exceptions."""
from typing import Any, Dict, Optional


class FSIError(Exception):
    """Base class for all solver errors."""

    default_detail = "FSI solver error"

    def __init__(self, detail: Optional[str] = None):
        if detail is None:
            detail = self.default_detail
        self.detail = detail
        super().__init__(detail)


class InvalidConfigError(FSIError):
    """Invalid case configuration."""

    default_detail = "Invalid configuration"


class InvalidParamsError(FSIError):
    """Invalid time integration parameters."""

    default_detail = "Invalid integrator parameters"


class MeshParseError(FSIError):
    """Malformed mesh file."""

    default_detail = "Malformed mesh file"

    def __init__(self, detail: Optional[str] = None, line: Optional[int] = None):
        self.line = line
        if detail is None:
            detail = self.default_detail
        if line is not None:
            detail = f"line {line}: {detail}"
        super().__init__(detail)


class UnknownEdgeSetError(FSIError):
    """Requested edge set does not exist."""

    default_detail = "Unknown edge set"


class DomainError(FSIError):
    """Argument outside the domain of a constitutive law."""

    default_detail = "Argument outside of the admissible domain"


class AssemblyError(FSIError):
    """Element-level failure during assembly."""

    default_detail = "Element assembly failed"

    def __init__(self, detail: Optional[str] = None, element: Optional[int] = None):
        self.element = element
        if detail is None:
            detail = self.default_detail
        if element is not None:
            detail = f"element {element}: {detail}"
        super().__init__(detail)


class CouplingError(FSIError):
    """Interface curves cannot be coupled."""

    default_detail = "Interface curves do not overlap"


class SingularMortarError(FSIError):
    """Slave interface node without support."""

    default_detail = "Slave mortar matrix is singular"


class ShapeMismatchError(FSIError):
    """Operand shapes do not conform."""

    default_detail = "Shape mismatch"


class ConsistencyError(FSIError):
    """Internal block system inconsistency."""

    default_detail = "Block system is inconsistent"


class LinearSolverError(FSIError):
    """Linear solver failure."""

    default_detail = "Linear solver failed"


class ZeroPivotError(LinearSolverError):
    """Zero pivot during incomplete factorization."""

    default_detail = "Zero pivot"

    def __init__(self, detail: Optional[str] = None, row: Optional[int] = None):
        self.row = row
        if detail is None:
            detail = self.default_detail if row is None else f"zero pivot in row {row}"
        super().__init__(detail)


class SingularMatrixError(LinearSolverError):
    """Numerically singular dense matrix."""

    default_detail = "Matrix is numerically singular"

    def __init__(self, detail: Optional[str] = None, pivot: Optional[float] = None):
        self.pivot = pivot
        if detail is None:
            detail = self.default_detail
            if pivot is not None:
                detail = f"{detail} (smallest pivot {pivot:.3e})"
        super().__init__(detail)


class BreakdownError(LinearSolverError):
    """Krylov iteration broke down or stagnated."""

    default_detail = "GMRES stagnated"


class NonConvergenceError(FSIError):
    """Newton iteration did not converge."""

    default_detail = "Newton iteration did not converge"

    def __init__(self, detail: Optional[str] = None, norms: Optional[Dict[str, Any]] = None):
        self.norms = norms or {}
        super().__init__(detail)


class StudyError(FSIError):
    """Parameter study aborted."""

    default_detail = "Study aborted"

    def __init__(self, detail: Optional[str] = None, partial_path: Optional[str] = None):
        self.partial_path = partial_path
        super().__init__(detail)


def add_context(exc: FSIError, context: str) -> FSIError:
    """Prefix the detail of an error in place, keeping its type and attributes."""
    exc.detail = f"{context}: {exc.detail}"
    exc.args = (exc.detail,)
    return exc
