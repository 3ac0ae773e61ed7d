"""Exception and warning types raised across the package."""


class TomographyError(Exception):
    """Base class for every error raised by tetratomo."""


class NonPhysicalState(TomographyError, ValueError):
    """A state lies outside the set of density operators."""


class InvalidProbabilities(TomographyError, ValueError):
    pass


class ZeroAxis(TomographyError, ValueError):
    pass


class EmptyData(TomographyError, ValueError):
    """No detector clicks were supplied."""


class EmptyAxis(TomographyError, ValueError):
    """A six-state measurement axis registered no clicks at all."""


class NoRoot(TomographyError, ArithmeticError):
    """The multiplier equation could not be bracketed; signals numerical failure."""


class AllZeroProb(TomographyError, ArithmeticError):
    """A fitted probability vanished for an outcome that was observed."""


class SingularInformation(TomographyError, ArithmeticError):
    pass


class DomainError(TomographyError, ValueError):
    """A closed-form expression is evaluated outside its range of validity."""


class KappaZero(DomainError):
    pass


class UndefinedPostState(TomographyError, ValueError):
    pass


class ConfigError(TomographyError, ValueError):
    """Invalid experiment configuration.

    ``errors`` maps offending field names to a human readable diagnostic.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = {"config": errors}
        self.errors = dict(errors)
        msg = "; ".join(f"{k}: {v}" for k, v in self.errors.items())
        super().__init__(msg)


class NotOrthogonal(UserWarning):
    """An estimated orientation dyadic deviates noticeably from a rotation."""


class SmallSampleWarning(UserWarning):
    """A large-N formula was evaluated at a small number of clicks."""
