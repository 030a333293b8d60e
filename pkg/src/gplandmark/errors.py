"""Exception hierarchy.

Every error carries a short machine-readable ``code`` which the CLI prints
on failure.
"""


class GPLandmarkError(Exception):
    code = "ERROR"


class ParseError(GPLandmarkError):
    code = "PARSE_ERROR"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(GPLandmarkError):
    code = "VALIDATION_ERROR"


class ConfigError(ValidationError):
    code = "CONFIG_ERROR"


class DegenerateGeometryError(GPLandmarkError):
    code = "DEGENERATE_GEOMETRY"


class AllZeroCurvatureError(GPLandmarkError):
    code = "ALL_ZERO_CURVATURE"


class DegenerateNeighborhoodError(GPLandmarkError):
    code = "DEGENERATE_NEIGHBORHOOD"


class InvalidBandwidth(GPLandmarkError, ValueError):
    code = "INVALID_BANDWIDTH"


class DimensionMismatch(GPLandmarkError, ValueError):
    code = "DIMENSION_MISMATCH"


class SingularSubmatrixError(GPLandmarkError):
    code = "SINGULAR_SUBMATRIX"


class NumericalBreakdownError(GPLandmarkError):
    code = "NUMERICAL_BREAKDOWN"


class EmptyDesignError(GPLandmarkError, ValueError):
    code = "EMPTY_DESIGN"


class NonpositiveSigmaError(GPLandmarkError):
    code = "NONPOSITIVE_SIGMA"
