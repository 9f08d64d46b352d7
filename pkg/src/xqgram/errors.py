"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for configuration problems, 3 for data problems and 4 for numerical
degeneracy.
"""


class XQGramError(Exception):
    exit_code = 1


class ConfigError(XQGramError, ValueError):
    exit_code = 2


class DataError(XQGramError, ValueError):
    exit_code = 3


class MissingColumn(DataError):
    def __init__(self, column, available=()):
        self.column = column
        self.available = tuple(available)
        msg = f"column {column!r} not found"
        if self.available:
            msg += f" (available: {', '.join(self.available)})"
        super().__init__(msg)


class NonNumericCell(DataError):
    def __init__(self, row, column, value=""):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: non-numeric or missing value {value!r}")


class LengthMismatch(DataError):
    pass


class NumericalError(XQGramError, ArithmeticError):
    exit_code = 4


class ZeroDenominator(NumericalError):
    """A hit sum of squares is zero, so the quantilogram is undefined."""

    def __init__(self, lag=None, pair=None, detail=""):
        self.lag = lag
        self.pair = pair
        where = []
        if pair is not None:
            where.append(f"pair={pair}")
        if lag is not None:
            where.append(f"k={lag}")
        msg = "zero denominator in cross-quantilogram"
        if where:
            msg += " at " + ", ".join(where)
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class SingularNormalizer(NumericalError):
    pass


class DegenerateNormalizer(NumericalError):
    pass


class SingularHitMatrix(NumericalError):
    pass


class MissingTableEntry(ConfigError):
    pass
