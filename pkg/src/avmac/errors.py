"""Exception hierarchy.

Input problems derive from :class:`InputError` (a ``ValueError``); numerical
budget or solver trouble derives from :class:`ComputationError`. The CLI maps
the first family to exit code 2 and the second to exit code 3.
"""


class AvmacError(Exception):
    pass


class InputError(AvmacError, ValueError):
    pass


class ComputationError(AvmacError, RuntimeError):
    pass


class NonStochasticRow(InputError):
    pass


class NegativeEntry(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class LengthMismatch(InputError):
    pass


class UnknownName(InputError):
    pass


class InvalidDistribution(InputError):
    pass


class HypothesisViolation(InputError):
    """Raised when a theorem-level precondition (e.g. C1 or C2 > 0) fails."""


class RateInfeasible(InputError):
    pass


class SymmetrizableChannel(InputError):
    pass


class BudgetViolation(InputError):
    """Conferencing alphabet exceeds the declared conferencing capacity."""


class ComponentMismatch(InputError):
    pass


class InfeasibleCertificate(InputError):
    pass


class SolverFailure(ComputationError):
    pass


class BudgetExceeded(ComputationError):
    pass


class CapExceeded(ComputationError):
    pass


class RetriesExhausted(ComputationError):
    def __init__(self, msg, best_error=None):
        super().__init__(msg)
        self.best_error = best_error
