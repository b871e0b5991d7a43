"""Exception hierarchy shared by every solver and the command line."""


class CRGError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CRGError, ValueError):
    """An argument lies outside the domain of an operation."""


class InvalidGameError(CRGError, ValueError):
    """A game definition violates one of its invariants."""


class ImpossibleObservationError(CRGError):
    """A signal has zero likelihood under every state the belief allows."""


class BudgetExceededError(CRGError):
    """The solver's state space is larger than the configured budget."""

    def __init__(self, what: str, cardinality: int, budget: int):
        super().__init__(f"{what}: {cardinality} exceeds budget {budget}")
        self.cardinality = cardinality
        self.budget = budget


class InternalInvariantError(CRGError, AssertionError):
    """An internal consistency check failed."""


class UnsupportedConfigurationError(CRGError, ValueError):
    """The requested experiment is not defined for this game."""


class UnreachableContextError(CRGError):
    """A decision context cannot arise under the game's signal model."""
