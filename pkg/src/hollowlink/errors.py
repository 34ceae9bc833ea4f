"""Exception types shared across the package."""


class HollowlinkError(Exception):
    """Base class for all package errors."""


class InvalidRange(HollowlinkError):
    """A scan or grid range is empty, inverted, or has too few points."""


class DegenerateScenario(HollowlinkError):
    """The accidental rate is zero, so the coincidence ratio is unbounded."""


class ThresholdAboveBest(HollowlinkError):
    """Even a zero-length link cannot meet the requested ratio threshold."""


class UnsortedInput(HollowlinkError):
    """A timestamp stream was not sorted in non-decreasing order."""


class ZeroBinWidth(HollowlinkError):
    """Histogram bin width must be a positive number of picoseconds."""


class NoPeak(HollowlinkError):
    """No statistically significant correlation peak in the search range."""


class NoConvergence(HollowlinkError):
    """The peak fit did not converge within the iteration budget."""


class ZeroBackground(HollowlinkError):
    """Fitted background is zero; the empirical ratio is unbounded."""


class InsufficientCoincidences(HollowlinkError):
    """A measurement interval holds too few coincidences to extract a delay.

    ``interval_index`` is None when the failure comes from the up-front
    rate check rather than a specific interval.
    """

    def __init__(self, message, interval_index=None):
        super().__init__(message)
        self.interval_index = interval_index


class SeriesTooShort(HollowlinkError):
    """The phase series is too short for the requested averaging factor."""

    def __init__(self, message, m=None):
        super().__init__(message)
        self.m = m


class TooFewPoints(HollowlinkError):
    """Fewer than three curve points fall inside the requested fit range."""


class ConfigError(HollowlinkError):
    """Base class for configuration-file problems."""


class ParseError(ConfigError):
    """A config line could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class UnknownKey(ConfigError):
    """The config contains a key the schema does not define."""


class MissingKey(ConfigError):
    """A required config key is absent."""


class UnitViolation(ConfigError):
    """A value is outside the physical domain implied by its unit suffix."""
