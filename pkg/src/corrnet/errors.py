"""Exception hierarchy shared by every stage of the pipeline."""


class CorrnetError(Exception):
    """Base class for all library errors."""


class ParseError(CorrnetError, ValueError):
    """A record could not be parsed. ``line`` is 1-based (header is line 1)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IntegrityError(CorrnetError, ValueError):
    """Duplicate cells, duplicate ranks, duplicate window ids."""


class DomainError(CorrnetError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class RangeError(CorrnetError, ValueError):
    """Requested dates fall outside the panel."""


class EmptyPanelError(CorrnetError, ValueError):
    """Filtering left no assets."""


class IncompletePanelError(CorrnetError, ValueError):
    """A computation needs a panel with no missing cells."""


class DegenerateError(CorrnetError, ValueError):
    """Input too small or degenerate (zero variance, singleton community, N < 2)."""


class NumericalError(CorrnetError, ArithmeticError):
    """A numerical routine failed to converge."""


class ConnectivityError(CorrnetError, ValueError):
    """A spanning tree was requested for a disconnected graph."""

    def __init__(self, message, components=()):
        self.components = [list(c) for c in components]
        super().__init__(message)


class ConfigError(CorrnetError, ValueError):
    """Invalid pipeline configuration."""


class DependencyError(CorrnetError, RuntimeError):
    """A stage was run before the stage whose artifacts it consumes."""

    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)
