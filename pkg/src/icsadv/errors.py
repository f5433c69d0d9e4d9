"""Exception types shared across the package.

Every error raised on bad user input derives from ValueError so callers
that do not care about the fine-grained type can catch one thing.
"""


class IcsAdvError(ValueError):
    """Base class for all package-specific errors."""


class SchemaMismatchError(IcsAdvError):
    """Header or schema disagreement between two artifacts."""


class ParseError(IcsAdvError):
    """Malformed CSV or JSON input; message names row/column when known."""


class LabelError(IcsAdvError):
    """Label token outside the Normal/Attack vocabulary."""


class ParameterError(IcsAdvError):
    """Out-of-range or inconsistent configuration value."""


class EmptyInputError(IcsAdvError):
    """Operation that needs at least one row received none."""


class ShapeError(IcsAdvError):
    """Array dimension disagreement (e.g. vector length vs model input)."""


class KindMismatchError(IcsAdvError):
    """Attack targeted a feature of the wrong kind (sensor vs actuator)."""


class InputContractError(IcsAdvError):
    """Caller violated a documented data contract (e.g. wrong labels)."""


class DegenerateTargetError(IcsAdvError):
    """Training target has a single class where two are required."""
