"""Exception taxonomy shared across the package."""


class SdwaveError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SdwaveError):
    """Invalid configuration value (bad domain sizes, exponents, config files)."""


class UsageError(SdwaveError):
    """API misuse: mismatched domains, missing accumulators, wrong variables."""


class NumericalError(SdwaveError):
    """A numerical procedure broke down (solver divergence, iteration cap)."""


class OverflowEvent(SdwaveError):
    """Non-finite values appeared where a finite field was required."""


class ParseError(SdwaveError):
    """Expression syntax or identifier error; carries a character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class SamplingError(SdwaveError):
    """Expression evaluation hit a domain fault at a specific grid node."""


class CheckerError(SdwaveError):
    """A structure-condition checker produced a non-finite residual."""


class EstimationError(SdwaveError):
    """Blow-up time extrapolation lacks usable tail data."""


class PreconditionError(SdwaveError):
    """A documented operation precondition failed; carries diagnostics."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegenerateDataError(SdwaveError):
    """Input data for which the requested quantity is undefined (zero data)."""
