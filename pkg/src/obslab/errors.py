"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad inputs, the CLI
maps it to exit code 2) and :class:`NumericalFailure` (exit code 3).
"""


class ObslabError(Exception):
    pass


class ValidationError(ObslabError, ValueError):
    pass


class NumericalFailure(ObslabError, ArithmeticError):
    pass


class NonPositiveCoefficient(ValidationError):
    pass


class CutoffMismatch(ValidationError):
    pass


class UnsupportedOrder(ValidationError):
    pass


class OriginProjection(ValidationError):
    pass


class DimensionGuard(ValidationError):
    pass


class CouplingSingular(ValidationError):
    pass


class SequenceNotAveraging(ValidationError):
    pass


class WindowTooSmall(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class AlignmentError(ValidationError):
    pass


class ConvergenceFailure(NumericalFailure):
    pass


class EnergyNotPD(NumericalFailure):
    pass
