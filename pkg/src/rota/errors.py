"""Exception types shared across the package."""


class RotaError(Exception):
    """Base class for all errors raised by this package."""


class InstanceError(RotaError, ValueError):
    """Unknown element ids, malformed instances, non-basis colour classes."""


class ContractError(RotaError, ValueError):
    """An operation was called with inputs violating its precondition."""


class SizeCapError(RotaError, ValueError):
    """A brute-force oracle refused an input above its enumeration cap."""


class ParseError(RotaError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
