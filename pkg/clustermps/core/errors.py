class ValidationError(ValueError):
    """Raised when caller-supplied input violates a documented precondition."""


class InvariantViolation(RuntimeError):
    """Raised when an internal consistency check fails (a simulator bug)."""
