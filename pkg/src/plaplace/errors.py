"""Exception hierarchy shared by all modules."""


class PLaplaceError(Exception):
    """Base class for every error raised by this package."""


class DomainError(PLaplaceError, ValueError):
    """An argument lies outside the range where an operation is defined."""


class RegimeError(DomainError):
    """The (N, p) pair is outside the regime an estimate applies to."""


class DegenerateError(PLaplaceError, ArithmeticError):
    """A derivative or weight degenerates (u_r = 0, non-finite weight)."""

    def __init__(self, message, node=None, radius=None):
        super().__init__(message)
        self.node = node
        self.radius = radius


class IntegrationBlowUp(PLaplaceError, ArithmeticError):
    """The radial IVP left the domain of the nonlinearity before r = 1."""

    def __init__(self, message, radius):
        super().__init__(message)
        self.radius = radius


class NoMatch(PLaplaceError):
    """Shooting found no sign change of u(1) in the admissible lambda range."""


class ProfileFormatError(PLaplaceError, ValueError):
    """A profile CSV file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
