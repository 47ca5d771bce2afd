"""Exception types shared across the package.

Contract violations on otherwise valid objects (shape mismatches, out of
range arguments) raise plain ``ValueError``; the classes below mark the
three failure families the command line maps to distinct exit codes.
"""


class ConfigurationError(Exception):
    """A configuration is inconsistent or describes impossible geometry."""


class DataFormatError(Exception):
    """A data file is missing, truncated, or fails format validation."""


class NumericalError(Exception):
    """A numerical procedure diverged or failed a tolerance check."""
