from typing import Optional, Sequence


class DomainException(Exception):
    """Base domain exception."""

    pass


class InvalidArgumentException(DomainException):
    """Raised when an argument has the wrong shape, range or resolution."""

    pass


class DomainViolationException(DomainException):
    """Raised when a sample lies outside the declared state domain."""

    pass


class NoSolutionException(DomainException):
    """Raised when a Lyapunov equation has no positive definite solution."""

    def __init__(self, message: str, eigenvalues: Optional[Sequence[complex]] = None):
        super().__init__(message)
        self.eigenvalues = list(eigenvalues) if eigenvalues is not None else []


class PreconditionViolationException(DomainException):
    """Raised when a hypothesis of a tracking guarantee does not hold."""

    pass


class DivergenceException(DomainException):
    """Raised when the simulated state leaves the guard box."""

    def __init__(self, message: str, time: float = 0.0, state: Optional[list] = None):
        super().__init__(message)
        self.time = time
        self.state = state or []


class ConfigurationException(DomainException):
    """Raised when an experiment configuration cannot be loaded."""

    pass
