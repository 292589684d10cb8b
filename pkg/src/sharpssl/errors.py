"""Exception hierarchy.

Everything derives from :class:`SharpSSLError`; the CLI maps the three
mid-level families onto exit codes (config 2, data 3, numerical 4).
"""


class SharpSSLError(Exception):
    pass


class ConfigError(SharpSSLError, ValueError):
    pass


class DataError(SharpSSLError, ValueError):
    pass


class NumericalError(SharpSSLError, ArithmeticError):
    pass


# linalg
class NotSymmetric(NumericalError):
    pass


class NotFinite(DataError):
    pass


class SingularWithinCovariance(NumericalError):
    pass


# dataset
class ParseError(DataError):
    def __init__(self, msg, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{msg} ({', '.join(where)})" if where else msg)
        self.row = row
        self.column = column


class InconsistentWidth(ParseError):
    pass


class LabelOutOfRange(DataError):
    pass


class ZeroVarianceColumn(DataError):
    def __init__(self, column):
        super().__init__(f"column {column} has zero variance; drop it first")
        self.column = column


class NoLabeledData(DataError):
    pass


# projections / pipeline
class InvalidDimension(ConfigError):
    pass


class DimensionMismatch(DataError):
    pass


class AllRunsFailed(NumericalError):
    pass


class GroupFailed(NumericalError):
    def __init__(self, group):
        super().__init__(f"every projection in group {group} failed in the base learner")
        self.group = group


class LengthMismatch(DataError):
    pass
