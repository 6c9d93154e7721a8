"""Exception hierarchy for dst_eval."""


class DSTEvalError(Exception):
    """Base class for every error raised by this package."""


class EmptyField(DSTEvalError, ValueError):
    """A triplet's domain or slot is empty after normalization."""


class OntologyEmpty(DSTEvalError, ValueError):
    """Slot accuracy was requested against an ontology with no pairs."""


class SlotAccuracyRange(DSTEvalError, ValueError):
    """A turn has more distinct slot errors than the ontology has pairs."""


class DomainError(DSTEvalError, ValueError):
    """An argument lies outside the domain of a calibration formula."""


class InputMismatch(DSTEvalError, ValueError):
    """A turn is missing its ground-truth or predicted state."""


class ConfigError(DSTEvalError, ValueError):
    """Invalid generator or metric configuration."""


class ParseError(DSTEvalError):
    """Input document is not well-formed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemaError(DSTEvalError):
    """Input document is well-formed but violates the file schema."""
