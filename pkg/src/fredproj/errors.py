"""Exception hierarchy for fredproj."""


class FredprojError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(FredprojError, ValueError):
    pass


class DependentConstraintError(FredprojError):
    def __init__(self, index, norm):
        self.index = index
        self.norm = norm
        super().__init__(
            f"constraint vector {index} is dependent on its predecessors "
            f"(residual norm {norm:.3e})"
        )


class DependentKError(FredprojError):
    def __init__(self, gram_det):
        self.gram_det = gram_det
        super().__init__(f"k vectors are linearly dependent (Gram determinant {gram_det:.3e})")


class AdmissibilityError(FredprojError):
    pass


class NormNotConverged(FredprojError):
    """Power iteration ran out of iterations; ``estimate`` holds the best value."""

    def __init__(self, estimate):
        self.estimate = estimate
        super().__init__(
            f"power iteration did not converge after {estimate.iterations} iterations "
            f"(best estimate {estimate.value:.6g})"
        )


class ContractionError(FredprojError):
    def __init__(self, norm):
        self.norm = norm
        super().__init__(f"operator norm {norm:.6g} >= 1, Neumann series not guaranteed")


class SeriesNotConverged(FredprojError):
    def __init__(self, terms, tail):
        self.terms = terms
        self.tail = tail
        super().__init__(f"Neumann series tail bound {tail:.3e} after {terms} terms")


class SingularSystemError(FredprojError):
    pass


class UnsummableFamilyError(FredprojError):
    pass


class ConfigError(FredprojError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class KernelEvalError(FredprojError):
    def __init__(self, i, j, x, y):
        self.location = (i, j)
        super().__init__(f"non-finite kernel value at nodes ({i}, {j}) = ({x!r}, {y!r})")
