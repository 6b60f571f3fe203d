"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: validation problems exit 2,
numerical failures exit 3, infeasible budgets exit 4.
"""


class ClaqError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 2


class ValidationError(ClaqError):
    """Malformed input: bad manifest, shape mismatch, broken invariant."""

    exit_code = 2


class FormatError(ValidationError):
    """Corrupt or unsupported on-disk container."""

    exit_code = 2


class NumericalError(ClaqError):
    """Non-finite values or a failed factorization aborted a computation."""

    exit_code = 3


class InfeasibleBudgetError(ClaqError):
    """No allocation satisfies the requested size budget."""

    exit_code = 4
