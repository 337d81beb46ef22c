"""Exception taxonomy.

Two base classes split the world the way the CLI exit codes do:
``DataError`` (bad inputs, exit 1) and ``ConfigError`` (bad settings,
exit 2). Leaf names are part of the public contract and appear in
operation docstrings throughout the package.
"""


class GatefuseError(Exception):
    """Base class for every error raised by this package."""


class DataError(GatefuseError):
    """Input data is malformed, inconsistent, or missing. CLI exit code 1."""


class ConfigError(GatefuseError):
    """A parameter or configuration value is invalid. CLI exit code 2."""


# -- manifest ---------------------------------------------------------------

class DuplicateId(DataError):
    """A sample_id occurs more than once."""


class InconsistentGender(DataError):
    """A speaker appears with two different gender labels."""


class ParseError(DataError):
    """A file could not be parsed; message carries the line number where known."""


class SplitCoverage(DataError):
    """A fully split-assigned manifest leaves some speaker out of the train split."""


class BadRatios(ConfigError):
    """Split ratios do not sum to 1."""


# -- audio ------------------------------------------------------------------

class UnsupportedCodec(DataError):
    """WAV file uses a codec other than integer PCM or 32-bit float."""


class BadNfft(ConfigError):
    """FFT size is not a power of two, or is smaller than the frame length."""


class BadFilterSpec(ConfigError):
    """Mel filterbank parameters are out of range or collapse under bin quantization."""


# -- embeddings -------------------------------------------------------------

class CorruptFile(DataError):
    """Binary table file is truncated or inconsistent with its header."""


class MissingEmbedding(DataError):
    """Manifest references sample ids absent from an embedding table."""


# -- feature selection / classifiers ----------------------------------------

class DegenerateLabels(DataError):
    """Fewer than two distinct labels were supplied to a fit."""


class NonFiniteInput(DataError):
    """A feature matrix contains NaN or infinity."""


class MaskMismatch(DataError):
    """A selection mask was applied to a matrix of the wrong width."""


class DimensionMismatch(DataError):
    """A matrix width does not match what the model was trained on."""


# -- pipeline ---------------------------------------------------------------

class GenderLeak(DataError):
    """Rows of more than one gender reached a single-gender branch fit."""


class DegenerateBranch(DataError):
    """A gender branch has fewer than two speakers (or a gender is absent entirely)."""
