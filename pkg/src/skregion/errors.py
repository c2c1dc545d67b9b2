"""Semantic exception hierarchy.

Public functions raise these instead of bare ValueError/KeyError so callers
(and the CLI exit-code mapping) can tell validation problems, infeasible
inputs, and resource-limit refusals apart.
"""


class SkregionError(Exception):
    """Base class for all errors raised by this package."""


class UnknownVariableError(SkregionError, KeyError):
    """A variable name does not exist in the distribution it was asked of."""


class ArgumentError(SkregionError, ValueError):
    """Arguments violate an operation's contract (overlap, domain, shape)."""


class DistributionError(SkregionError, ValueError):
    """Probability data is invalid: negative mass, wrong normalization."""


class CompositionError(SkregionError, ValueError):
    """Alphabets do not line up along a kernel composition."""


class CellLimitError(SkregionError):
    """A dense joint tensor would exceed the configured cell cap."""


class CodebookLimitError(SkregionError):
    """A codebook would exceed the configured codeword-symbol cap."""


class InfeasibleCouplingError(SkregionError):
    """Coupling violates the feasibility constraint of the search set.

    Carries ``margin``: by how many bits the constraint is violated.
    """

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


class PreconditionError(SkregionError):
    """An operation's stated precondition does not hold.

    ``margin`` is set when the violation is quantifiable (e.g. a target
    rate pair outside the achievable region).
    """

    def __init__(self, message: str, margin: float | None = None):
        super().__init__(message)
        self.margin = margin


class ScenarioError(SkregionError, ValueError):
    """A scenario file failed validation."""
