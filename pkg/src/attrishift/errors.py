"""Exception hierarchy shared by every module.

Validation-type errors map to CLI exit code 2, numeric failures to 3.
"""


class AttriShiftError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 2
    kind = "error"


class SchemaError(AttriShiftError, KeyError):
    kind = "schema"

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class ParseError(AttriShiftError, ValueError):
    kind = "parse"


class DomainError(AttriShiftError, ValueError):
    kind = "domain"


class ShapeError(AttriShiftError, ValueError):
    kind = "shape"


class SizeError(AttriShiftError, ValueError):
    kind = "size"


class UnsupportedModelError(AttriShiftError, TypeError):
    kind = "unsupported_model"


class NumericError(AttriShiftError, ArithmeticError):
    exit_code = 3
    kind = "numeric"


class DegenerateError(NumericError):
    kind = "degenerate"


class RankDeficiencyError(NumericError):
    kind = "rank_deficient"


class MalformedTreeError(NumericError):
    kind = "malformed_tree"
