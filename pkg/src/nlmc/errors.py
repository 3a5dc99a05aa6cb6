class NLMCError(Exception):
    """Base class; ``code`` feeds the CLI exit status."""

    code = 1


class ConfigError(NLMCError, ValueError):
    code = 2


class DomainError(NLMCError, ValueError):
    code = 2


class InvalidShapeError(DomainError):
    pass


class GeometryError(NLMCError, RuntimeError):
    code = 3


class NumericalError(NLMCError, RuntimeError):
    code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
