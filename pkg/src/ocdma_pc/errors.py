class OcdmaError(Exception):
    """Base class for package errors."""


class EmptyInstanceError(OcdmaError, ValueError):
    pass


class SingularOrInfeasible(OcdmaError):
    """The closed-form power vector does not exist (spectral radius >= 1 or singular solve)."""


class RankDeficient(OcdmaError):
    """Constraint Jacobian lost row rank during confinement."""


class NoConvergence(OcdmaError):
    """An inner iteration hit its cap without meeting its tolerance."""


class NumericalFailure(OcdmaError):
    """A numerical subproblem (QP, inner minimisation) failed."""


class ConfigError(OcdmaError, ValueError):
    pass
