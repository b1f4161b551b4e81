"""Exception hierarchy shared by all modules."""


class StratifiedError(Exception):
    """Base class for every error raised by this package."""


# group structure
class GroupSpecError(StratifiedError):
    pass


class BadStrata(GroupSpecError):
    pass


class HomogeneityViolation(GroupSpecError):
    pass


class RankDeficient(GroupSpecError):
    pass


class UnsupportedGroupLaw(StratifiedError):
    pass


class NonPositiveLambda(StratifiedError, ValueError):
    pass


# expressions
class ExpressionError(StratifiedError):
    pass


class ParseError(ExpressionError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownCoordinate(ExpressionError):
    pass


class EvalError(ExpressionError, ArithmeticError):
    pass


class NonDifferentiable(EvalError):
    pass


class SingularGradient(EvalError):
    pass


# geometry / quadrature
class DegenerateJacobian(StratifiedError):
    pass


class DomainError(StratifiedError):
    pass


# identities
class InadmissibleNonlinearity(StratifiedError, ValueError):
    pass


class CalibrationFailed(StratifiedError):
    pass


class PoleEvaluation(EvalError):
    pass


class DegenerateFlux(StratifiedError):
    pass


class NonpositiveV(StratifiedError):
    pass


class VNotBoundedBelow(StratifiedError):
    pass


class NonpositiveInput(StratifiedError):
    pass


class PoleTooCloseToBoundary(StratifiedError):
    pass


class NegativeRobinMeasure(StratifiedError):
    pass


# solver
class TooCoarse(StratifiedError, ValueError):
    pass


class NonPositiveEps(StratifiedError, ValueError):
    pass


class NoConvergence(StratifiedError):
    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class LineSearchStall(NoConvergence):
    pass


class FixedPointDivergence(StratifiedError):
    pass


class ReactionAssumptionError(StratifiedError):
    """A reaction fails a structural assumption required by an experiment."""


class ConfigError(StratifiedError):
    def __init__(self, message, field=None):
        self.field = field
        prefix = f"{field}: " if field else ""
        super().__init__(prefix + message)
