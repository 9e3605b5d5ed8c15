"""Exception hierarchy shared across the package."""


class LmTaggerError(Exception):
    """Base class for all package-specific failures."""


class ShapeError(LmTaggerError):
    """An operand's rank or dimensions do not match the operation."""


class ParseError(LmTaggerError):
    """Malformed input text; message carries the offending line number."""


class DataError(LmTaggerError):
    """Structurally valid input that violates a precondition."""


class ConfigError(LmTaggerError):
    """Bad configuration key, value, or missing required path."""


class NumericError(LmTaggerError):
    """A non-finite value surfaced where the contract requires finiteness."""


class CheckpointError(LmTaggerError):
    """Base class for checkpoint persistence failures."""


class CheckpointFormatError(CheckpointError):
    """Wrong magic string or unsupported format version."""


class CheckpointIntegrityError(CheckpointError):
    """Truncated file, bad footer, or manifest/payload mismatch."""
