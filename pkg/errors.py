"""
Errors Module
Exception hierarchy raised by the solvers, oracles and configuration layer
"""


class SolverError(Exception):
    """Base class for every error raised by the library"""


class NonFiniteValue(SolverError):
    """An oracle returned NaN (or an unexpected infinity)"""


class BudgetExhausted(SolverError):
    """An iteration cap was hit before the requested certificate closed"""


class DualBudgetExhausted(BudgetExhausted):
    """The dual inner solver did not reach its zeta-residual target"""


class StepIncreasedObjective(SolverError):
    """A descent certificate failed: t is too large or an oracle is wrong"""


class CertificateMissing(SolverError):
    """The subsolver cannot certify the requested accuracy"""


class InvalidRateConstants(SolverError):
    """Subscheme constants violate gamma >= 0, tau in (0, 1)"""


class OutsideDualDomain(SolverError):
    """A dual point lies outside dom h* (conjugate value is +inf)"""


class InvalidMuTilde(SolverError):
    """Accelerated method called with mu_tilde <= mu"""


class BudgetTooSmall(SolverError):
    """The total inner-iteration budget fails the plan precondition"""


class DimensionMismatch(SolverError):
    """Components or vectors disagree on their dimension"""


class NonConvexBase(SolverError):
    """A function without a valid proximal map was supplied"""


class ConfigError(SolverError):
    """Configuration file missing, malformed, or failing the schema"""
