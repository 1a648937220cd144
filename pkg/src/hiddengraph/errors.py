"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with inputs violating its preconditions."""


class ConfigError(ValueError):
    """Inconsistent model or graph configuration."""


class ParseError(ValueError):
    """Malformed proposal stream or dataset file.

    ``line`` is the 1-based line number of the offending record, when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(ValueError):
    """A checkpoint file could not be loaded."""


class FormatError(CheckpointError):
    """Wrong magic, unsupported version, truncated file or unreadable header."""


class ChecksumError(CheckpointError):
    """The payload CRC32 does not match the stored checksum."""


class ManifestError(CheckpointError):
    """Parameter names or shapes disagree with the configuration."""


class VariantMismatchError(CheckpointError):
    """The checkpoint holds a different model variant than requested."""
