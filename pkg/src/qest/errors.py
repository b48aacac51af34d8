"""Shared exception and warning types.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical contract violations with 3.
"""


class ConfigError(ValueError):
    """A configuration file or command-line argument is invalid."""


class ContractViolationError(ValueError):
    """An input violates a numerical precondition (non-Hermitian, non-unitary, ...)."""


class SingularDesignError(ContractViolationError):
    """The regression design is informationally incomplete.

    Carries the dimension of the unresolved parameter subspace.
    """

    def __init__(self, null_dim, message=None):
        self.null_dim = int(null_dim)
        super().__init__(
            message
            or f"singular design: null-space dimension {self.null_dim}; "
            "the measurement set does not determine all state parameters"
        )


class BranchAmbiguityWarning(UserWarning):
    """An eigenphase sits near the branch cut at pi; the matrix logarithm is unreliable."""
