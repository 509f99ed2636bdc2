"""Exception types shared across the package."""


class LiqoptError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LiqoptError):
    """Malformed input data (bad file row, invalid config value)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownParticipantError(LiqoptError):
    """A batch payment names a participant outside the known universe."""

    def __init__(self, participant: str, payment_id: str):
        self.participant = participant
        self.payment_id = payment_id
        super().__init__(
            f"payment {payment_id!r} names unknown participant {participant!r}"
        )


class EncodingError(LiqoptError):
    """A value cannot be represented by the binary encoding of a model."""


class ExactLimitError(LiqoptError):
    """Batch too large for exhaustive search; use a heuristic solver."""
