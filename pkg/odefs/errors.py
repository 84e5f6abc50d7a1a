class OdefsError(Exception):
    """
    Base class for every error raised by the package.

    Attributes:
        code (str): Machine-parsable error code printed by the command line front end.
    """

    code: str = "ODEFS_ERROR"


class DataError(OdefsError, ValueError):
    code = "DATA_ERROR"


class ConfigError(OdefsError, ValueError):
    code = "CONFIG_ERROR"


class UsageError(OdefsError):
    code = "USAGE_ERROR"


class EmptyCandidatesError(OdefsError):
    code = "EMPTY_CANDIDATES"


class DegenerateComponentError(OdefsError):
    code = "DEGENERATE_COMPONENT"


class EnsembleError(OdefsError):
    code = "ALL_COMPONENTS_DEGENERATE"


class OptimizationError(OdefsError, ArithmeticError):
    code = "NON_FINITE_GRADIENT"


class MetricError(OdefsError, ValueError):
    code = "METRIC_ERROR"


class OutputError(OdefsError):
    code = "IO_ERROR"
