"""Exception hierarchy shared by every module of the package."""


class CausalRDFError(Exception):
    """Base class for all errors raised by causal_rdf."""


class DomainError(CausalRDFError, ValueError):
    """Inputs have the wrong shape, alphabet or range."""


class DegenerateDistributionError(CausalRDFError, ValueError):
    """A distribution cannot be normalized (all weights are zero)."""


class DegenerateRowError(CausalRDFError, ArithmeticError):
    """A tilted kernel row has a zero or non-finite normalizer."""


class CapacityError(CausalRDFError):
    """The instance exceeds the dense table-size cap."""


class DistortionRangeError(CausalRDFError, ValueError):
    """A distortion target lies outside the achievable interval."""

    def __init__(self, message, lower=None, upper=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper


class SpecError(CausalRDFError, ValueError):
    """A problem-spec file failed to parse or validate."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class SpecParseError(SpecError):
    """The problem-spec file is not well-formed (syntax or value types)."""
