"""
Exception hierarchy shared by the core and lab packages.
"""


class UpsilonLabError(Exception):
    """Base class for every error raised on purpose by this project."""


class DimensionMismatch(UpsilonLabError, ValueError):
    """Two objects live in spaces of different dimension."""

    def __init__(self, left: int, right: int):
        super().__init__(f"Dimension mismatch: {left} != {right}")
        self.left = left
        self.right = right


class SectorMismatch(UpsilonLabError, ValueError):
    """Total masses differ, so no coupling exists and the distance is infinite."""

    def __init__(self, left: int, right: int):
        super().__init__(f"Configurations of mass {left} and {right} lie in different sectors")
        self.left = left
        self.right = right


class OracleTooLarge(UpsilonLabError, ValueError):
    """Brute-force enumeration refused above the configured mass cap."""


class NotLipschitzOnA(UpsilonLabError, ValueError):
    """Sample values violate the requested Lipschitz constant."""


class InvalidTestFunction(UpsilonLabError, ValueError):
    """A test function failed its construction-time validation."""


class NumericalFailure(UpsilonLabError, RuntimeError):
    """A numerical routine (e.g. an eigenvalue solver) did not converge."""


class ChainStuck(UpsilonLabError, RuntimeError):
    """An MCMC chain accepted (almost) nothing during burn-in."""


class StepTooLarge(UpsilonLabError, RuntimeError):
    """The drift displacement of one step exceeds the allowed fraction of the window."""


class NoDistanceCertificate(UpsilonLabError, ValueError):
    """No certified lower bound on the set-to-set distance is known for this pair."""


class InsufficientPaths(UpsilonLabError, RuntimeError):
    """Too few hits at time t to take a logarithm honestly."""

    def __init__(self, t: float, hits: int):
        super().__init__(f"Insufficient paths at t={t!r}: only {hits} hits")
        self.t = t
        self.hits = hits


class BoundaryContamination(UpsilonLabError, ValueError):
    """The starting configuration is too close to a reflecting wall."""
