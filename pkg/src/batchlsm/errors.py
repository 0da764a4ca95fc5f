"""Exception types raised at the library boundary."""


class LsmError(ValueError):
    """Base class for all errors raised by batchlsm."""


class InvalidConfig(LsmError):
    pass


class BatchSizeMismatch(LsmError):
    pass


class KeyOutOfDomain(LsmError):
    pass


class EmptyBatch(LsmError):
    pass


class SizeNotMultipleOfBatch(LsmError):
    pass


class InvalidRange(LsmError):
    pass


class SpecInvalid(LsmError):
    pass


class DumpFormatError(LsmError):
    """A text dump could not be parsed or violates structural invariants."""


class InvariantViolation(LsmError):
    """The level structure breaks an occupancy or ordering invariant."""
