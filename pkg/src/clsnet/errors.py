"""Exception hierarchy shared by the library and the CLI."""


class ClsError(Exception):
    """Base class for all clsnet errors."""


class UsageError(ClsError, ValueError):
    """Caller violated a precondition (mismatched sizes, bad option, ...)."""


class DomainError(ClsError, ValueError):
    """A value lies outside the domain of the latent space or function."""


class SingularityError(ClsError, ArithmeticError):
    """Distance gradient requested at (near) coincident points."""


class UnboundedLogitError(ClsError, ValueError):
    """The link function has no finite logit (hard threshold)."""


class SamplingError(ClsError, RuntimeError):
    """A rejection sampler exhausted its proposal budget."""


class OptimizationError(ClsError, RuntimeError):
    """No restart of an optimizer produced a finite objective."""


class ExperimentFailure(ClsError, RuntimeError):
    """Too many replicates of an experiment failed."""


class LogZeroWarning(RuntimeWarning):
    """A log-likelihood term was log(0); the result is -inf."""
