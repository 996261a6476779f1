"""Exception hierarchy. The CLI maps these to exit codes (config=1, data=2, numeric=3)."""


class MmbError(Exception):
    """Base class for all package errors."""


class ConfigError(MmbError):
    """Invalid or inconsistent configuration (missing factor params, bad flags, bad config file)."""


class DataError(MmbError):
    """Malformed or inconsistent input data (parse errors, NaN features, alignment failures)."""


class AlignmentError(DataError):
    """A word interval could not be matched to any stream frames."""


class DimensionError(MmbError):
    """Array shapes inconsistent with the declared factor/embedding dimensions."""


class NumericError(MmbError):
    """Non-finite values where finite ones are required (objective, gradients, densities)."""
