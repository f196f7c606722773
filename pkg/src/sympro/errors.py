"""Exception hierarchy shared by all sympro modules."""


class SymproError(Exception):
    pass


class NumericalBlowup(SymproError, FloatingPointError):
    pass


class StepBudgetExceeded(SymproError):
    pass


class RankDeficient(SymproError, ArithmeticError):
    pass


class ConvergenceFailure(SymproError, ArithmeticError):
    pass


class DimensionMismatch(SymproError, ValueError):
    pass


class ConstantRankViolation(SymproError):
    pass


class ParameterRejected(SymproError, ValueError):
    pass


class NoCircleFactor(SymproError, ValueError):
    pass


class NoConvergence(SymproError):
    pass


class DegenerateTangent(SymproError, ValueError):
    pass


class EmptyNeutralSubspace(SymproError, ValueError):
    pass


class NoPinnedPoint(SymproError):
    pass


class AmbiguousMode(SymproError):
    pass


class ZeroGap(SymproError, ValueError):
    pass


class ConfigError(SymproError, ValueError):
    pass
