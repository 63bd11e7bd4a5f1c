"""Explicit ReLU network constructions for approximating smooth and hierarchical functions."""

from .errors import (ConstructionError, OutOfDomainError, ParseError, PrecisionOverflowError,
                     RejectedInputError, TrainingError, ValidationError)
from .network import (Network, affine, compose, count_parameters, deserialize, evaluate, load,
                      parallelize, save, serialize)

__all__ = [
    "ConstructionError", "OutOfDomainError", "ParseError", "PrecisionOverflowError",
    "RejectedInputError", "TrainingError", "ValidationError", "Network", "affine", "compose",
    "count_parameters", "deserialize", "evaluate", "load", "parallelize", "save", "serialize",
]
