"""Exception types shared across the package."""


class NonSPDError(ValueError):
    """A matrix (or a nodal tensor field) is not symmetric positive definite.

    Carries the offending minimum eigenvalue and, for fields, the vertex
    index where it occurs.
    """

    def __init__(self, min_eigenvalue, vertex=None):
        self.min_eigenvalue = float(min_eigenvalue)
        self.vertex = vertex
        where = "" if vertex is None else f" at vertex {vertex}"
        super().__init__(
            f"matrix not SPD{where}: min eigenvalue {self.min_eigenvalue:.6e}"
        )


class SingularMatrixError(ValueError):
    """A matrix is numerically singular (an eigenvalue below the floor)."""

    def __init__(self, min_abs_eigenvalue):
        self.min_abs_eigenvalue = float(min_abs_eigenvalue)
        super().__init__(
            f"matrix numerically singular: min |eigenvalue| "
            f"{self.min_abs_eigenvalue:.6e}"
        )


class DimensionMismatchError(ValueError):
    """Operands live in different spatial dimensions."""


class MeshMismatchError(ValueError):
    """Two fields or states do not share the expected mesh relation."""


class FixedPointDivergedError(RuntimeError):
    """The per-step fixed-point iteration exhausted its budget."""

    def __init__(self, iterations, increment, t=None):
        self.iterations = iterations
        self.increment = increment
        self.t = t
        at = "" if t is None else f" at t={t:.6g}"
        super().__init__(
            f"fixed-point iteration did not converge{at}: "
            f"increment {increment:.3e} after {iterations} sweeps"
        )


class LinearSolveFailedError(RuntimeError):
    """A linear solve did not reach the requested relative residual."""

    def __init__(self, residual, tol):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"linear solve failed: relative residual {residual:.3e} > {tol:.3e}"
        )


class ConfigParseError(ValueError):
    """Malformed configuration text; carries the 1-based line number."""

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class ConfigValidationError(ValueError):
    """Structurally valid configuration with inconsistent values."""
