"""Exception hierarchy. Every domain error derives from RecApcError so the
CLI can map it to exit code 1."""


class RecApcError(Exception):
    """Base class for domain errors."""


class InstanceFormatError(RecApcError, ValueError):
    """Malformed instance document or inconsistent dimensions."""


class InfiniteWelfareError(InstanceFormatError):
    """Some like-probability equals 1, so a fixed policy has unbounded value."""


class ZeroLikelihoodError(RecApcError, ArithmeticError):
    """A 'like' on this category is impossible under the current belief."""


class NodeBudgetExceeded(RecApcError):
    pass


class StateBudgetExceeded(RecApcError):
    pass


class SearchBudgetExceeded(RecApcError):
    """Brute-force enumeration would exceed its sequence budget."""


class HorizonTooLarge(RecApcError):
    pass


class NotConvergedWithinBudget(RecApcError):
    pass


class PreconditionError(RecApcError, ValueError):
    pass


class RoundCapExceeded(RecApcError):
    pass


class EmptySimulationError(RecApcError, ValueError):
    pass


class EmptyClusterError(RecApcError):
    pass


class UnknownIdError(RecApcError, KeyError):
    pass
