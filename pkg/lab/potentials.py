"""
Free potentials Phi and radial pair potentials Psi with their gradients.

Values may be +inf (hard core). Gradients are only used for the drift of the
particle dynamics, so the derivative of a step potential is taken as zero.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from core.models import as_points

# ============================================================================
# FREE POTENTIALS
# ============================================================================


class FreePotential(ABC):
    """One-body potential Phi: R^d -> R with a vectorized gradient."""

    name: str

    @abstractmethod
    def __call__(self, xs: np.ndarray) -> np.ndarray:
        """Values at points of shape (k, d), shape (k,)."""

    @abstractmethod
    def gradient(self, xs: np.ndarray) -> np.ndarray:
        """Gradients at points of shape (k, d), shape (k, d)."""

    @property
    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroFree(FreePotential):
    name: str = "zero"

    def __call__(self, xs):
        return np.zeros(len(as_points(xs)))

    def gradient(self, xs):
        return np.zeros_like(as_points(xs))

    @property
    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class Harmonic(FreePotential):
    """Phi(x) = strength/2 * |x - center|^2"""

    strength: float
    center: tuple[float, ...]
    name: str = "harmonic"

    def __call__(self, xs):
        diff = as_points(xs, len(self.center)) - np.array(self.center)
        return 0.5 * self.strength * np.einsum("ij,ij->i", diff, diff)

    def gradient(self, xs):
        return self.strength * (as_points(xs, len(self.center)) - np.array(self.center))


@dataclass(frozen=True)
class Linear(FreePotential):
    """Phi(x) = coefficients . x"""

    coefficients: tuple[float, ...]
    name: str = "linear"

    def __call__(self, xs):
        return as_points(xs, len(self.coefficients)) @ np.array(self.coefficients)

    def gradient(self, xs):
        pts = as_points(xs, len(self.coefficients))
        return np.broadcast_to(np.array(self.coefficients), pts.shape).copy()


@dataclass(frozen=True)
class PeriodicWell(FreePotential):
    """Phi(x) = strength * sum_k (1 - cos(2 pi x_k / period)); compatible with a torus of that period."""

    strength: float
    period: float
    name: str = "periodic_well"

    def __call__(self, xs):
        pts = as_points(xs)
        return self.strength * (1.0 - np.cos(2 * np.pi * pts / self.period)).sum(axis=1)

    def gradient(self, xs):
        pts = as_points(xs)
        omega = 2 * np.pi / self.period
        return self.strength * omega * np.sin(omega * pts)


# ============================================================================
# PAIR POTENTIALS
# ============================================================================


class PairPotential(ABC):
    """Symmetric pair potential Psi(x, y) = psi(|x - y|)."""

    name: str

    @abstractmethod
    def radial(self, r: np.ndarray) -> np.ndarray:
        """psi(r), possibly +inf."""

    @abstractmethod
    def radial_derivative(self, r: np.ndarray) -> np.ndarray:
        """psi'(r) where finite; zero across jumps."""

    @property
    def is_zero(self) -> bool:
        return False

    def __call__(self, x, ys) -> np.ndarray:
        """Psi(x, y_j) for every row y_j of ys."""
        x = as_points(x)[0]
        ys = as_points(ys, len(x))
        return self.radial(np.linalg.norm(ys - x, axis=1))

    def gradient(self, x, ys) -> np.ndarray:
        """Sum over j of the gradient of Psi(., y_j) at x."""
        x = as_points(x)[0]
        ys = as_points(ys, len(x))
        diff = x - ys
        r = np.linalg.norm(diff, axis=1)
        scale = np.where(r > 0, self.radial_derivative(r) / np.where(r > 0, r, 1.0), 0.0)
        return (scale[:, None] * diff).sum(axis=0)

    def interaction_gradients(self, xs: np.ndarray) -> np.ndarray:
        """For every row x_i, the sum over j != i of grad_1 Psi(x_i, x_j)."""
        xs = as_points(xs)
        diff = xs[:, None, :] - xs[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        safe = np.where(r > 0, r, 1.0)
        scale = np.where(r > 0, self.radial_derivative(r) / safe, 0.0)
        return np.einsum("ij,ijk->ik", scale, diff)

    def pair_energy(self, xs: np.ndarray) -> float:
        """Sum over unordered pairs of distinct rows (coincident rows count at r = 0)."""
        xs = as_points(xs)
        if len(xs) < 2:
            return 0.0
        return float(self.radial(pdist(xs)).sum())


@dataclass(frozen=True)
class ZeroPair(PairPotential):
    name: str = "zero"

    def radial(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def radial_derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    @property
    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True)
class HardCore(PairPotential):
    """+inf closer than radius, 0 otherwise."""

    radius: float
    name: str = "hard_core"

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.radius, np.inf, 0.0)

    def radial_derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class Strauss(PairPotential):
    """Constant penalty strength for pairs closer than radius."""

    strength: float
    radius: float
    name: str = "strauss"

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.radius, self.strength, 0.0)

    def radial_derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True)
class GaussianRepulsion(PairPotential):
    """psi(r) = strength * exp(-r^2 / (2 scale^2))"""

    strength: float
    scale: float
    name: str = "gaussian"

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.strength * np.exp(-(r**2) / (2 * self.scale**2))

    def radial_derivative(self, r):
        r = np.asarray(r, dtype=float)
        return -self.strength * r / self.scale**2 * np.exp(-(r**2) / (2 * self.scale**2))


@dataclass(frozen=True)
class LinearDistance(PairPotential):
    """psi(r) = strength * r"""

    strength: float = 1.0
    name: str = "linear_distance"

    def radial(self, r):
        return self.strength * np.asarray(r, dtype=float)

    def radial_derivative(self, r):
        return np.full_like(np.asarray(r, dtype=float), self.strength)
