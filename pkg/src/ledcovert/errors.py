"""Exception hierarchy shared by every stage of the pipeline."""


class LedCovertError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LedCovertError, ValueError):
    """Malformed bit-strings, parameters or configuration."""


class FrameSizeError(InvalidInputError):
    """Payload does not match the fixed 256-bit frame layout."""


class AlignmentError(InvalidInputError):
    """Bit count is not a multiple of the symbol width."""


class IndistinguishableSymbolsError(InvalidInputError):
    """Two symbols would be modulated onto identical waveforms."""


class InvalidCellError(InvalidInputError):
    """Manchester half-cells must have equal length."""


class UndersamplingError(InvalidInputError):
    """Sample rate too low to resolve the shortest LED pulse."""


class SubNyquistError(InvalidInputError):
    """Fewer than two camera frames per bit."""


class SyncError(LedCovertError):
    """Frame does not start with the expected preamble."""


class SyncNotFoundError(SyncError):
    """No preamble could be located in a waveform."""


class IntegrityError(LedCovertError):
    """CRC of a received frame does not match its payload."""

    def __init__(self, message, payload=None, received_crc=None, computed_crc=None):
        super().__init__(message)
        self.payload = payload
        self.received_crc = received_crc
        self.computed_crc = computed_crc


class CapacityError(LedCovertError):
    """Timeline needs more LEDs than the router provides."""


class HardwareLimitError(LedCovertError):
    """Timeline violates the router's measured timing limits."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class TruncationError(LedCovertError):
    """Demodulation ran past the end of the waveform.

    ``partial`` holds the bits that were decoded before the cut.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
