"""Exception types shared across the teaching engine.

Every error carries a short machine-readable ``code`` so the service layer
can map exceptions onto protocol error messages without a lookup table.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""

    code = "internal"


class InvalidArgumentError(EngineError):
    """An operand violates an operation's preconditions."""

    code = "invalid_argument"


class NotFoundError(EngineError):
    """A referenced label or class id does not exist."""

    code = "not_found"


class ConflictError(EngineError):
    """A uniqueness constraint was violated (e.g. duplicate label name)."""

    code = "conflict"


class StateError(EngineError):
    """The session is not in a state that permits the requested call."""

    code = "wrong_state"


class PreconditionError(EngineError):
    """Training-readiness preconditions are not met."""

    code = "precondition"


class CompatibilityError(EngineError):
    """Stored data was produced by a different backbone."""

    code = "incompatible_backbone"


class SessionParseError(EngineError):
    """A session document is corrupt. ``offset`` is the byte position of the
    failure when it is known (JSON syntax errors), else None."""

    code = "parse_error"

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ModelLoadError(EngineError):
    """A backbone asset is missing or cannot be parsed."""

    code = "model_load"


class UnsupportedModelError(ModelLoadError):
    """The model graph lacks what feature extraction needs (for example a
    spatial activation ahead of a global pooling node)."""

    code = "unsupported_model"


class TrainCancelled(EngineError):
    """Training was cancelled between batches."""

    code = "cancelled"
