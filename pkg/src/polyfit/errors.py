"""Exception hierarchy shared by every module.

Each exception carries the CLI exit code it maps to, so the command line
front-end can translate failures without a lookup table of its own.
"""

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_GUARANTEE = 3
EXIT_DATA = 4


class PolyFitError(Exception):
    exit_code = EXIT_DATA


# data / ingestion
class EmptyInput(PolyFitError):
    pass


class NonFiniteValue(PolyFitError):
    def __init__(self, row: int, message: str = ""):
        self.row = row
        super().__init__(message or f"non-finite value at row {row}")


class InvalidRange(PolyFitError):
    exit_code = EXIT_USAGE


# fitting / segmentation
class DegreeOutOfRange(PolyFitError):
    exit_code = EXIT_USAGE


class SolverFailure(PolyFitError):
    pass


class InstanceTooLarge(PolyFitError):
    pass


class MaxDepthExceeded(PolyFitError):
    pass


# query guarantees
class GuaranteeMismatch(PolyFitError):
    exit_code = EXIT_GUARANTEE


# csv / binary io
class ParseError(PolyFitError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaMismatch(PolyFitError):
    pass


class FormatError(PolyFitError):
    exit_code = EXIT_IO


class BadMagic(FormatError):
    pass


class VersionUnsupported(FormatError):
    pass


class ChecksumMismatch(FormatError):
    pass


class Truncated(FormatError):
    pass
