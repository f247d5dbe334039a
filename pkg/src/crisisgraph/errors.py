"""Exception hierarchy shared by the library and the command line.

Each class carries the process exit status the CLI maps it to.
"""


class CrisisGraphError(Exception):
    exit_code = 1


class DataError(CrisisGraphError, ValueError):
    """Malformed input data: bad records, unknown labels, missing ids."""

    exit_code = 3


class ShapeError(DataError):
    """Operand extents do not line up."""


class NumericError(CrisisGraphError, ArithmeticError):
    """A non-finite value showed up during training or evaluation."""

    exit_code = 4


class FormatError(CrisisGraphError, ValueError):
    """Corrupt or version-incompatible serialized artifact."""

    exit_code = 5
