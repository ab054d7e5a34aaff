"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class ModelError(ValueError):
    """A CP model is internally inconsistent (mismatched factor shapes)."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of the operation."""


class SolverError(RuntimeError):
    """A numerical solve failed beyond recovery.

    For factor updates, ``mode`` and ``row`` identify the offending
    (1-based) mode index and row index.
    """

    def __init__(self, message, mode=None, row=None):
        super().__init__(message)
        self.mode = mode
        self.row = row


class OperatorError(ValueError):
    """A linear operator pair failed the randomized adjoint check."""


class TnsFormatError(ValueError):
    """A .tns file violates the format grammar.  ``line`` is 1-based."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class TnsDataError(ValueError):
    """A .tns file is well-formed but carries inconsistent data."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class TnsBoundsError(IndexError):
    """A .tns entry index falls outside the declared extents."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
