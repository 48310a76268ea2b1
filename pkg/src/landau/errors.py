"""Exception taxonomy shared across the toolkit."""


class LandauError(Exception):
    """Base class for all toolkit errors."""


class DomainError(LandauError, ValueError):
    """Invalid input: quantum numbers, parameter ranges, incompatible modes."""


class AccuracyError(LandauError, RuntimeError):
    """A computation finished but failed its own accuracy certificate."""


class SolverError(LandauError, RuntimeError):
    """An iterative solver did not converge."""


class ContinuationError(SolverError):
    """Eigenvalue branch tracking lost the branch.

    Carries the portion of the branch computed so far in ``partial``.
    """

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial if partial is not None else []


class RangeError(LandauError, ValueError):
    """Requested evaluation point lies outside the resolved range."""


class DegenerateInputError(LandauError, ValueError):
    """Input leads to an empty or degenerate subproblem."""


class ConfigError(LandauError, ValueError):
    """Experiment configuration failed to parse or validate."""

    def __init__(self, msg, line=None):
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)
        self.line = line
