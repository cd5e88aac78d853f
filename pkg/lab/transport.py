"""
Exact L2-transportation distance between finite configurations.

Every distance here reduces to a dense min-cost assignment on squared
Euclidean costs between expanded atoms, solved with
scipy.optimize.linear_sum_assignment.
"""

import itertools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from config import DISTANCE_TOLERANCE, ORACLE_MASS_CAP
from core.errors import DimensionMismatch, NotLipschitzOnA, OracleTooLarge, SectorMismatch
from core.models import Configuration, ExtendedDistance, LabeledSequence, Matching, Window
from core.point_config import restrict_open

logger = logging.getLogger(__name__)


def _check_dim(left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatch(left, right)


def _cost_matrix(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    return cdist(xs, ys, "sqeuclidean")


def _solve(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(cost[rows, cols].sum())


# ============================================================================
# DISTANCE AND MATCHING
# ============================================================================


def d_upsilon(gamma: Configuration, eta: Configuration) -> ExtendedDistance:
    """L2-transportation distance; Infinite when the total masses differ."""
    _check_dim(gamma.dim, eta.dim)
    if gamma.mass != eta.mass:
        return ExtendedDistance.infinite()
    if gamma.mass == 0:
        return ExtendedDistance.finite(0.0)
    _, _, cost = _solve(_cost_matrix(gamma.expanded(), eta.expanded()))
    return ExtendedDistance.finite(math.sqrt(max(cost, 0.0)))


def optimal_matching(gamma: Configuration, eta: Configuration) -> Matching:
    """Optimal pairing of gamma's expanded atoms with eta's.

    Raises SectorMismatch when the masses differ, since no coupling exists.
    """
    _check_dim(gamma.dim, eta.dim)
    if gamma.mass != eta.mass:
        raise SectorMismatch(gamma.mass, eta.mass)
    if gamma.mass == 0:
        return Matching((), 0.0)
    rows, cols, cost = _solve(_cost_matrix(gamma.expanded(), eta.expanded()))
    return Matching(tuple((int(i), int(j)) for i, j in zip(rows, cols)), max(cost, 0.0))


def brute_force_distance(gamma: Configuration, eta: Configuration, cap: int = ORACLE_MASS_CAP) -> ExtendedDistance:
    """Minimum over all bijections by explicit enumeration (oracle for d_upsilon)."""
    _check_dim(gamma.dim, eta.dim)
    if max(gamma.mass, eta.mass) > cap:
        raise OracleTooLarge(f"Mass {max(gamma.mass, eta.mass)} exceeds the oracle cap {cap}")
    if gamma.mass != eta.mass:
        return ExtendedDistance.infinite()
    n = gamma.mass
    if n == 0:
        return ExtendedDistance.finite(0.0)
    cost = _cost_matrix(gamma.expanded(), eta.expanded())
    perms = np.array(list(itertools.permutations(range(n))))
    totals = cost[np.arange(n), perms].sum(axis=1)
    return ExtendedDistance.finite(math.sqrt(max(float(totals.min()), 0.0)))


def pairwise_distances(configs: Sequence[Configuration]) -> np.ndarray:
    """Symmetric matrix of d_upsilon values, math.inf across sectors."""
    n = len(configs)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = d_upsilon(configs[i], configs[j]).as_float()
    return out


def align_to_labeling(x: LabeledSequence, eta: Configuration) -> LabeledSequence:
    """Reorder eta's expanded atoms so that y[p] is the optimal partner of x[p]."""
    _check_dim(x.dim, eta.dim)
    if len(x) != eta.mass:
        raise SectorMismatch(len(x), eta.mass)
    if len(x) == 0:
        return LabeledSequence(np.zeros((0, eta.dim)), eta.dim)
    ys = eta.expanded()
    rows, cols, _ = _solve(_cost_matrix(x.points, ys))
    order = np.empty(len(x), dtype=int)
    order[rows] = cols
    return LabeledSequence(ys[order], eta.dim)


# ============================================================================
# DISTANCES TO LAMBDA SETS
# ============================================================================


def rho_gamma_U(eta: Configuration, gamma: Configuration, U: Window) -> ExtendedDistance:
    """Distance from eta to {zeta : zeta_U = gamma_U} for an open window U.

    Each atom of eta either covers one atom of gamma_U or escapes to the
    closed complement of U. Every atom of gamma_U must be covered, so the
    distance is Infinite when eta has fewer atoms than gamma_U.
    """
    _check_dim(eta.dim, gamma.dim)
    _check_dim(eta.dim, U.dim)
    targets = restrict_open(gamma, U).expanded()
    n, k = eta.mass, len(targets)
    if n < k:
        return ExtendedDistance.infinite()
    if n == 0:
        return ExtendedDistance.finite(0.0)
    xs = eta.expanded()
    escape = U.distance_to_complement(xs) ** 2
    cost = np.empty((n, n))
    cost[:, :k] = _cost_matrix(xs, targets) if k else 0.0
    cost[:, k:] = escape[:, None]
    _, _, total = _solve(cost)
    return ExtendedDistance.finite(math.sqrt(max(total, 0.0)))


def lambda_set_distance(gamma: Configuration, eta: Configuration, U: Window) -> float:
    """Exact distance between {zeta : zeta_U = gamma_U} and {xi : xi_U = eta_U}.

    Atoms inside U either pair with each other or leave through the boundary;
    mass outside U is free on both sides, so the distance is always finite.
    """
    _check_dim(gamma.dim, eta.dim)
    _check_dim(gamma.dim, U.dim)
    xs = restrict_open(gamma, U).expanded()
    ys = restrict_open(eta, U).expanded()
    a, b = len(xs), len(ys)
    if a + b == 0:
        return 0.0
    cost = np.zeros((a + b, b + a))
    if a and b:
        cost[:a, :b] = _cost_matrix(xs, ys)
    if a:
        cost[:a, b:] = (U.distance_to_complement(xs) ** 2)[:, None]
    if b:
        cost[a:, :b] = (U.distance_to_complement(ys) ** 2)[None, :]
    _, _, total = _solve(cost)
    return math.sqrt(max(total, 0.0))


# ============================================================================
# BATCHED FORMS (stacks of equal-size particle arrays)
# ============================================================================

PERMUTATION_BATCH_CAP = 6
_BATCH_ROWS = 10_000


def batched_assignment_cost(cost: np.ndarray) -> np.ndarray:
    """Minimal assignment cost of every square matrix in a (P, n, n) stack."""
    n_batch, n, _ = cost.shape
    if n == 0:
        return np.zeros(n_batch)
    if n > PERMUTATION_BATCH_CAP:
        return np.array([_solve(c)[2] for c in cost])
    perms = np.array(list(itertools.permutations(range(n))))
    rows = np.arange(n)[None, :]
    out = np.empty(n_batch)
    for start in range(0, n_batch, _BATCH_ROWS):
        block = cost[start : start + _BATCH_ROWS]
        out[start : start + len(block)] = block[:, rows, perms].sum(axis=2).min(axis=1)
    return out


def _stacked_sqdist(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Squared distances between each stacked row set and a fixed point set, shape (P, n, k)."""
    diff = xs[:, :, None, :] - ys[None, None, :, :]
    return np.einsum("pikd,pikd->pik", diff, diff)


def batched_d_upsilon(xs: np.ndarray, center: Configuration) -> np.ndarray:
    """d_upsilon from each particle array in a (P, n, d) stack to center; inf across sectors."""
    n_batch, n, dim = xs.shape
    _check_dim(dim, center.dim)
    if n != center.mass:
        return np.full(n_batch, np.inf)
    cost = _stacked_sqdist(xs, center.expanded())
    return np.sqrt(np.maximum(batched_assignment_cost(cost), 0.0))


def batched_rho_gamma_U(xs: np.ndarray, gamma: Configuration, U: Window) -> np.ndarray:
    """rho_gamma_U for each particle array in a (P, n, d) stack."""
    n_batch, n, dim = xs.shape
    _check_dim(dim, gamma.dim)
    targets = restrict_open(gamma, U).expanded()
    k = len(targets)
    if n < k:
        return np.full(n_batch, np.inf)
    if n == 0:
        return np.zeros(n_batch)
    escape = U.distance_to_complement(xs.reshape(-1, dim)).reshape(n_batch, n) ** 2
    cost = np.empty((n_batch, n, n))
    if k:
        cost[:, :, :k] = _stacked_sqdist(xs, targets)
    cost[:, :, k:] = escape[:, :, None]
    return np.sqrt(np.maximum(batched_assignment_cost(cost), 0.0))


# ============================================================================
# MCSHANE EXTENSIONS
# ============================================================================


@dataclass(frozen=True)
class McShaneExtension:
    """Upper or lower L-Lipschitz extension of finitely many sampled values.

    Sample values are checked to be L-Lipschitz among themselves (within each
    sector) at construction.
    """

    configs: tuple[Configuration, ...]
    values: tuple[float, ...]
    lip: float
    side: Literal["upper", "lower"] = "upper"

    def __post_init__(self):
        if not self.configs:
            raise ValueError("McShane extension needs at least one sample")
        if len(self.configs) != len(self.values):
            raise ValueError(f"Got {len(self.configs)} samples but {len(self.values)} values")
        if not self.lip > 0:
            raise ValueError(f"Lipschitz constant must be positive, got {self.lip}")
        if self.side not in ("upper", "lower"):
            raise ValueError(f"side must be 'upper' or 'lower', got {self.side!r}")
        dist = pairwise_distances(self.configs)
        vals = np.asarray(self.values, dtype=float)
        gaps = np.abs(vals[:, None] - vals[None, :])
        finite = np.isfinite(dist)
        violation = gaps[finite] - self.lip * dist[finite]
        if violation.size and violation.max() > DISTANCE_TOLERANCE:
            raise NotLipschitzOnA(
                f"Sample values violate the Lipschitz constant {self.lip} by {float(violation.max())!r}"
            )

    def __call__(self, query: Configuration) -> float:
        vals = np.asarray(self.values, dtype=float)
        dist = np.array([d_upsilon(query, a).as_float() for a in self.configs])
        finite = np.isfinite(dist)
        if self.side == "upper":
            cap = float(vals.max())
            if not finite.any():
                return cap
            return min(cap, float((vals[finite] + self.lip * dist[finite]).min()))
        floor = float(vals.min())
        if not finite.any():
            return floor
        return max(floor, float((vals[finite] - self.lip * dist[finite]).max()))


def mcshane_extend(
    samples: Sequence[tuple[Configuration, float]],
    lip: float,
    query: Configuration,
    side: Literal["upper", "lower"] = "upper",
) -> float:
    """Evaluate the upper or lower McShane extension of the samples at query."""
    configs = tuple(c for c, _ in samples)
    values = tuple(float(v) for _, v in samples)
    return McShaneExtension(configs, values, lip, side)(query)
