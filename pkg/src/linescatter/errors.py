"""Exception hierarchy.

Every error carries an ``exit_code`` used by the CLI:

* 2 -- usage errors (handled by click directly)
* 3 -- numerical-domain errors (invalid physical parameters, resonances)
* 4 -- convergence/accuracy failures
* 5 -- anything else
"""


class LinescatterError(Exception):
    """Base class for all package errors."""

    exit_code = 5


class DomainError(LinescatterError):
    """Input lies outside the numerically supported domain."""

    exit_code = 3


class OutOfBandError(DomainError):
    """Total energy outside the open two-particle band (-4, 4)."""


class BandCenterError(DomainError):
    """Total energy too close to E = 0 where the band-center singularity sits."""


class DegenerateModulusError(DomainError):
    """Elliptic parameter too close to 1 (logarithmic divergence of K)."""


class NonFiniteError(DomainError):
    """A special-function evaluation overflowed or produced non-finite values."""


class SingularSystemError(DomainError):
    """The interaction linear system is numerically singular.

    Signals an interaction resonance at this (E, U, L) combination.
    """


class StatisticsMismatchError(DomainError):
    """In- and out-states carry different particle statistics."""


class ShellDegeneracyError(DomainError):
    """An energy-shell root sits too close to a band edge (vanishing velocity)."""


class WavepacketSupportError(DomainError):
    """Wavepacket support wraps around +-pi or violates the band/center margins."""


class NonPositiveInfidelityError(DomainError):
    """Power-law fit requires strictly positive infidelities."""


class DegenerateFitError(DomainError):
    """Not enough data points to determine the fit."""


class TruncationError(DomainError):
    """The truncated lattice is too small for the requested wavepackets."""


class ConvergenceError(LinescatterError):
    """A numerical procedure failed to reach its accuracy target."""

    exit_code = 4


class QuadratureConvergenceError(ConvergenceError):
    """Successive quadrature refinements did not settle within tolerance."""


class BoundaryLeakError(ConvergenceError):
    """Probability reached the truncated-lattice boundary above tolerance."""


class SeparationError(ConvergenceError):
    """Wavepackets have not fully cleared the interaction region."""
