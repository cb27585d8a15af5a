"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError (and subclasses) exit 3,
DivergenceError exits 4. Usage errors are argparse's native exit 2.
"""


class DataError(Exception):
    """Invalid input data (bad file, failed validation, bad cross-reference)."""


class ParseError(DataError):
    """A file could not be parsed; message carries the file/line locus."""


class ValidationError(DataError):
    """Parsed data violates a structural invariant."""


class DivergenceError(Exception):
    """Training produced a non-finite loss."""
