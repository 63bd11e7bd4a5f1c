"""Exception types shared by all modules."""


class RejectedInputError(ValueError):
    """An argument violates a documented precondition."""


class OutOfDomainError(ValueError):
    """A point lies outside the region an object is defined on."""


class ParseError(ValueError):
    """A serialized document is malformed.

    ``path`` names the offending field, e.g. ``layers[2].bias[0]``.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConstructionError(ValueError):
    """A network construction cannot be carried out for the given parameters."""


class PrecisionOverflowError(ConstructionError):
    """The requested construction exceeds what binary64 arithmetic can represent."""


class ValidationError(ConstructionError):
    """A model description is structurally inconsistent."""


class TrainingError(RuntimeError):
    """Gradient descent diverged."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
