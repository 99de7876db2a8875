"""Exception hierarchy shared by all modules."""


class CopostabError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CopostabError, ValueError):
    pass


class SingularError(CopostabError, ArithmeticError):
    """A matrix was numerically singular (pivot below tolerance)."""


class AsymmetryError(CopostabError, ValueError):
    pass


class EmptyFeasible(CopostabError):
    """A polytope turned out to be empty."""


class PartitionError(CopostabError, ValueError):
    """A point is not complementarity-feasible at the requested tolerance."""


class StepSizeError(CopostabError, ValueError):
    """The time step violates the discretization bounds."""


class NoSolutionError(CopostabError):
    """An LCP encountered during simulation has no solution."""

    def __init__(self, message, step=None, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class EmptyResult(CopostabError):
    pass


class PreconditionError(CopostabError, ValueError):
    pass


class NegativityError(CopostabError, ValueError):
    """An S-lemma multiplier matrix has negative entries."""


class BudgetError(CopostabError):
    """Pattern enumeration would exceed the configured budget."""


class UnknownExample(CopostabError, KeyError):
    pass


class DocumentError(CopostabError, ValueError):
    """A JSON document does not follow its schema."""
