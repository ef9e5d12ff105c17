"""Exception hierarchy shared by the synthesis, simulation and CLI layers."""


class FlowBalanceError(Exception):
    """Base class for all errors raised by :mod:`flowbalance`."""


class ScenarioError(FlowBalanceError, ValueError):
    """Malformed input: bad dimensions, wrong types, out-of-range indices."""


class AssumptionViolation(FlowBalanceError):
    """A structural hypothesis of the regulator design does not hold.

    Raised for disconnected graphs, non skew-symmetric exosystems,
    non-positive gains, infeasible capacity scenarios and similar.
    """


class NumericalFailure(FlowBalanceError, ArithmeticError):
    """Integration produced non-finite values or tripped the overflow guard."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time
