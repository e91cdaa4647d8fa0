"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was handed inputs that break its stated contract."""


class DimensionError(ContractViolationError):
    """Operand shapes are incompatible."""


class Ic0BreakdownError(RuntimeError):
    """Incomplete Cholesky hit a nonpositive pivot.

    Carries the row index and the offending pivot value so callers can
    decide whether to retry with a diagonal shift.
    """

    def __init__(self, row: int, pivot: float):
        self.row = row
        self.pivot = pivot
        super().__init__(f"nonpositive pivot {pivot:.6e} in row {row}")


class SingularFactorError(RuntimeError):
    """A triangular factor has a zero on its diagonal."""


class EigConvergenceError(RuntimeError):
    """The dense eigenvalue iteration failed to converge."""


class MatrixMarketError(ValueError):
    """Malformed Matrix Market content; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(ValueError):
    """Bad experiment configuration (unknown key, malformed value, ...)."""


class UnsupportedFormError(RuntimeError):
    """An operator was asked for a representation it cannot provide."""


class ScaleCapError(RuntimeError):
    """A dense-path routine refused an input above its size cap."""


class CondensationSignError(RuntimeError):
    """Static condensation produced an indefinite pressure block."""


class AssemblyConsistencyError(RuntimeError):
    """Assembled blocks violate a structural identity."""
