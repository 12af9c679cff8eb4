"""
Exception types for geodesic computations.

Every error carries a human readable ``error`` message and the process
exit code the command line front end reports for it.
"""


class CarnotError(Exception):
    """Base error for all failures raised by the package."""

    exit_code = 1

    def __init__(self, error: str, exit_code: int = None):
        super().__init__(error)
        self.error = error
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return f"{self.error} (exit code: {self.exit_code})"


class PreconditionError(CarnotError, ValueError):
    """Input violates the documented precondition of an operation."""

    exit_code = 1


class DegenerateParams(PreconditionError):
    """Constant-control family C1 = C2 = 0 with non-zero K."""


class LineBranch(CarnotError):
    """K = 0: the extremal is a straight line and h(t) = h(0) is constant."""

    exit_code = 1


class CollinearTarget(CarnotError):
    """Target invariants describe a point of C_n; use the Heisenberg branch."""

    exit_code = 0


class CollinearFrame(CarnotError):
    """ell and y are dependent, so the aligning rotation is not unique."""

    exit_code = 1


class NoConvergence(CarnotError):
    """No Newton start reached the requested residual."""

    exit_code = 2


class SingularJacobian(NoConvergence):
    """Newton iteration met a numerically singular Jacobian."""


class OutOfValidatedRange(CarnotError):
    """Only roots beyond the first critical time of the exponential map exist."""

    exit_code = 3


class TheoremViolation(CarnotError):
    """A numerical property check contradicted a proved statement."""

    exit_code = 4
