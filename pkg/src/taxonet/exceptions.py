"""Exception taxonomy shared across the package.

The CLI maps these onto process exit codes, so new failure modes should
reuse an existing class where the meaning fits.
"""


class TaxonetError(Exception):
    """Base class for all package errors."""


class FormatError(TaxonetError):
    """Malformed file or array layout (parse failures, wrong channel count)."""


class ValidationError(TaxonetError):
    """Structurally parseable input that violates a semantic invariant."""


class ArgumentError(TaxonetError):
    """Bad argument value passed to an operation."""


class RegistryError(TaxonetError):
    """Unknown architecture name, or a backbone whose provider is unavailable."""


class WeightLoadError(TaxonetError):
    """Pretrained tensor source is missing, unreadable, or incompatible."""


class CheckpointError(TaxonetError):
    """Unreadable, truncated, or version-mismatched checkpoint file."""


class NumericError(TaxonetError):
    """Non-finite values encountered during optimization or inference."""


class DataError(TaxonetError):
    """Missing or inconsistent data encountered at run time."""


class ConfigError(TaxonetError):
    """Invalid experiment configuration."""
