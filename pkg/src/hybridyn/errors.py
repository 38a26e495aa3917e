"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`HybridynError`.
The CLI maps the two subfamilies onto exit codes: :class:`InputError` (bad
parameters, bad configuration) exits with 1, :class:`NumericalError` with 2.
"""


class HybridynError(Exception):
    """Base class for all package errors."""


class InputError(HybridynError, ValueError):
    """A precondition on the inputs is violated."""


class NumericalError(HybridynError, ArithmeticError):
    """The computation itself failed or would produce meaningless numbers."""


class GridMismatch(InputError):
    pass


class DimMismatch(InputError):
    pass


class GridTooNarrow(InputError):
    pass


class KernelUnderresolved(InputError):
    pass


class InvalidDensityMatrix(InputError):
    pass


class InvalidDistribution(InputError):
    pass


class InvalidState(InputError):
    pass


class StepTooLarge(InputError):
    pass


class UnsupportedClassicalState(InputError):
    pass


class ConditionOnNullEvent(InputError):
    """The classical density vanishes where a conditional state was requested."""


class ZeroProbabilityOutcome(NumericalError):
    """The requested measurement outcome has vanishing probability."""


class NonFiniteState(NumericalError):
    pass


class OffDiagonalUnstable(NumericalError):
    """The transform-domain multiplier of an imaginary shift is too large to trust."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(InputError):
    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)
