"""Exception and warning types shared across the package."""


class WeakMeasError(Exception):
    pass


class NonHermitian(WeakMeasError, ValueError):
    pass


class DimensionTooLarge(WeakMeasError, ValueError):
    pass


class DimensionMismatch(WeakMeasError, ValueError):
    pass


class NotNormalized(WeakMeasError, ValueError):
    pass


class ZeroOverlap(WeakMeasError, ArithmeticError):
    pass


class OrthogonalPostselection(WeakMeasError, ArithmeticError):
    """Pre- and postselected states are orthogonal, so the weak value diverges."""


class ZeroVariance(WeakMeasError, ValueError):
    """The initial state is an eigenstate of the observable; nothing to amplify."""


class DegenerateTarget(WeakMeasError, ValueError):
    pass


class ProbabilityOutOfRange(WeakMeasError, ValueError):
    pass


class InconsistentDerivative(WeakMeasError, ValueError):
    pass


class BasisNotOrthonormal(WeakMeasError, ValueError):
    pass


class BasisNotPovm(WeakMeasError, ValueError):
    pass


class SingularWeakValue(WeakMeasError, ValueError):
    pass


class DegenerateInput(WeakMeasError, ValueError):
    pass


class ConfigError(WeakMeasError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class EmptyTable(WeakMeasError, ValueError):
    pass


class LinearResponseWarning(UserWarning):
    """g|A_w| is large enough that first-order formulas are unreliable."""


class DegenerateExtremesWarning(UserWarning):
    pass


class VoteThresholdWarning(UserWarning):
    pass
