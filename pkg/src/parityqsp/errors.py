"""Exception types shared across the package.

The command line tool maps these onto exit codes: bad input or
configuration exits with 2, numerical trouble (truncation, integrator
or step-size failures) with 3, and anything signalling a broken
internal invariant with 4.
"""


class InvalidArgumentError(ValueError):
    """Bad argument to a library function."""


class UnsupportedModulusError(InvalidArgumentError):
    """The modulus does not admit the requested decomposition."""


class SingularParametersError(InvalidArgumentError):
    """Device parameters sit on a pole of the dispersive expansion."""


class UnsupportedInputError(InvalidArgumentError):
    """The routine does not handle this kind of input state."""


class InvalidComparisonError(InvalidArgumentError):
    """Mismatched configurations passed to a comparison routine."""


class TruncationError(RuntimeError):
    """Photon-number cutoff too small for the state at hand."""

    def __init__(self, message, lost_weight=None):
        super().__init__(message)
        self.lost_weight = lost_weight


class IntegratorFailure(RuntimeError):
    """Master-equation integration lost accuracy (trace drift or NaN)."""


class StepSizeViolation(RuntimeError):
    """A trajectory substep produced an unreliable jump probability."""


class DegenerateOutcomeError(RuntimeError):
    """A requested measurement branch or projection has zero weight."""
