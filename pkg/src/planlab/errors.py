"""Exception hierarchy shared across the package."""


class PlanLabError(Exception):
    """Base class for all planlab errors."""


class SchemaError(PlanLabError):
    """Unknown relation/attribute, or a schema that contradicts the data."""


class ParseError(PlanLabError):
    """Malformed input file (CSV row, config document, query file)."""


class ConfigError(PlanLabError):
    """Invalid or unsupported configuration value."""


class InvalidQueryError(PlanLabError):
    """QuerySpec violates a structural invariant."""


class ShapeError(PlanLabError):
    """Vector/matrix dimension mismatch."""


class NumericError(PlanLabError):
    """Non-finite value where a finite one is required."""


class ContractViolation(PlanLabError):
    """Caller broke an operation precondition (illegal prefix, stale tape, ...)."""


class EncodingError(PlanLabError):
    """Action references a predicate unknown to the catalog."""


class CapacityError(PlanLabError):
    """Input exceeds a hard size limit of an exhaustive algorithm."""
