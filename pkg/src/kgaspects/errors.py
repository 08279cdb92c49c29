"""Exception hierarchy shared by every module of the package."""


class KGAspectsError(Exception):
    """Base class for all errors raised by kgaspects."""


class ParseError(KGAspectsError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CycleError(KGAspectsError):
    def __init__(self, cls):
        self.cls = cls
        super().__init__(f"subclass cycle through class {cls!r}")


class NotFoundError(KGAspectsError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class AnnotationReferenceError(ParseError):
    """An annotation points at a class missing from the ontology."""


class SamplingError(KGAspectsError):
    """Raised when a sampler cannot draw the requested number of items."""


class MissingEmbeddingError(NotFoundError):
    pass


class DimensionMismatchError(KGAspectsError, ValueError):
    pass


class InputError(KGAspectsError, ValueError):
    pass


class DegenerateLabelsError(InputError):
    pass


class StratificationError(InputError):
    pass


class UnsupportedOperationError(KGAspectsError):
    pass


class ConfigError(KGAspectsError, ValueError):
    pass


class StageError(KGAspectsError):
    """Wraps a failure inside one pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
