"""Exception types shared across the package."""


class ErgopressError(Exception):
    """Base class for all package errors."""


class DomainError(ErgopressError, ValueError):
    """An argument is outside the operation's domain (bad index, empty
    scaffold, mismatched sizes, non-admissible input, ...)."""


class ContractError(ErgopressError, ValueError):
    """A stated hypothesis of the requested quantity is violated; the
    message names the hypothesis."""


class ScaffoldResolutionError(ErgopressError, RuntimeError):
    """The scaffold is too coarse for the requested computation; the
    caller must refine it."""


class SolverBudgetError(ErgopressError, RuntimeError):
    """An exact combinatorial search exceeded its node budget; rerun in
    greedy mode for a flagged bound."""


class OracleError(ErgopressError, RuntimeError):
    """An analytic oracle is undefined or failed to certify convergence."""
