"""
Event sets of configurations: membership, exact distance from a configuration
to an event, and certified lower bounds on the distance between two events.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np

from core.errors import NoDistanceCertificate
from core.models import Ball, Box, Configuration, ExtendedDistance, Window
from core.point_config import ConcentrationMode, count, in_concentration_set, restrict_open
from lab.transport import (
    batched_d_upsilon,
    batched_rho_gamma_U,
    d_upsilon,
    lambda_set_distance,
    rho_gamma_U,
)


@dataclass(frozen=True)
class WholeSpace:
    kind: Literal["whole_space"] = field(default="whole_space", init=False)

    def contains(self, gamma: Configuration) -> bool:
        return True

    @property
    def is_open(self) -> bool:
        return True


@dataclass(frozen=True)
class Concentration:
    """{gamma : gamma(E) = n}, {>= n} or {<= n}"""

    region: Window
    n: int
    mode: ConcentrationMode = ConcentrationMode.EQ
    kind: Literal["concentration"] = field(default="concentration", init=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"n must be nonnegative, got {self.n}")
        object.__setattr__(self, "mode", ConcentrationMode(self.mode))

    def contains(self, gamma: Configuration) -> bool:
        return in_concentration_set(gamma, self.region, self.n, self.mode)

    @property
    def is_open(self) -> bool:
        # the count in a closed set can only drop under small moves
        return self.mode is ConcentrationMode.LEQ and isinstance(self.region, Ball)


@dataclass(frozen=True)
class LambdaSet:
    """{eta : eta_U = gamma_U} for an open window U (a closed set of configurations)."""

    gamma_ref: Configuration
    U: Window
    kind: Literal["lambda_set"] = field(default="lambda_set", init=False)

    def contains(self, gamma: Configuration) -> bool:
        return restrict_open(gamma, self.U) == restrict_open(self.gamma_ref, self.U)

    @property
    def is_open(self) -> bool:
        return False

    @property
    def fixed_part(self) -> Configuration:
        return restrict_open(self.gamma_ref, self.U)


@dataclass(frozen=True)
class DistanceBall:
    """Open ball {eta : d(eta, center) < radius}."""

    center: Configuration
    radius: float
    kind: Literal["distance_ball"] = field(default="distance_ball", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def contains(self, gamma: Configuration) -> bool:
        return d_upsilon(gamma, self.center).as_float() < self.radius

    @property
    def is_open(self) -> bool:
        return True


@dataclass(frozen=True)
class RhoBall:
    """Open neighbourhood {eta : rho_{gamma_ref,U}(eta) < radius} of a Lambda set."""

    gamma_ref: Configuration
    U: Window
    radius: float
    kind: Literal["rho_ball"] = field(default="rho_ball", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    def contains(self, gamma: Configuration) -> bool:
        return rho_gamma_U(gamma, self.gamma_ref, self.U).as_float() < self.radius

    @property
    def is_open(self) -> bool:
        return True


@dataclass(frozen=True)
class Custom:
    predicate: Callable[[Configuration], bool]
    name: str = "custom"
    open_set: bool = False
    kind: Literal["custom"] = field(default="custom", init=False)

    def contains(self, gamma: Configuration) -> bool:
        return bool(self.predicate(gamma))

    @property
    def is_open(self) -> bool:
        return self.open_set


EventSet = Union[WholeSpace, Concentration, LambdaSet, DistanceBall, RhoBall, Custom]


# ============================================================================
# DISTANCE FROM A CONFIGURATION TO AN EVENT
# ============================================================================


def _move_in_cost(gamma: Configuration, region: Window, needed: int) -> ExtendedDistance:
    """Cheapest way to bring `needed` outside units of mass into the closure of the region."""
    xs = gamma.expanded()
    outside = xs[~region.contains(xs)]
    if needed > len(outside):
        return ExtendedDistance.infinite()
    costs = np.sort(region.distance_to(outside) ** 2)[:needed]
    return ExtendedDistance.finite(math.sqrt(float(costs.sum())))


def _move_out_cost(gamma: Configuration, region: Window, excess: int) -> ExtendedDistance:
    """Cheapest way to push `excess` inside units of mass out of the region."""
    xs = gamma.expanded()
    inside = xs[region.contains(xs)]
    costs = np.sort(region.distance_to_complement(inside) ** 2)[:excess]
    return ExtendedDistance.finite(math.sqrt(float(costs.sum())))


def distance_to_event(gamma: Configuration, event: EventSet) -> ExtendedDistance:
    """Exact d(gamma, event) for every kind except Custom."""
    if isinstance(event, WholeSpace):
        return ExtendedDistance.finite(0.0)
    if isinstance(event, Concentration):
        k = count(gamma, event.region)
        short, excess = max(event.n - k, 0), max(k - event.n, 0)
        if event.mode is ConcentrationMode.GEQ or (event.mode is ConcentrationMode.EQ and short):
            return _move_in_cost(gamma, event.region, short)
        if event.mode is ConcentrationMode.LEQ or (event.mode is ConcentrationMode.EQ and excess):
            return _move_out_cost(gamma, event.region, excess)
        return ExtendedDistance.finite(0.0)
    if isinstance(event, LambdaSet):
        return rho_gamma_U(gamma, event.gamma_ref, event.U)
    if isinstance(event, DistanceBall):
        d = d_upsilon(gamma, event.center)
        return d if not d.is_finite else ExtendedDistance.finite(max(d.value - event.radius, 0.0))
    if isinstance(event, RhoBall):
        rho = rho_gamma_U(gamma, event.gamma_ref, event.U)
        return rho if not rho.is_finite else ExtendedDistance.finite(max(rho.value - event.radius, 0.0))
    raise NoDistanceCertificate(f"No distance formula for event kind {event.kind!r}")


# ============================================================================
# CERTIFIED LOWER BOUNDS ON SET-TO-SET DISTANCES
# ============================================================================


def _nested_gap(inner: Window, outer: Window) -> float | None:
    """Distance from the inner window to the complement of the outer one, None unless nested."""
    if isinstance(inner, Box) and isinstance(outer, Box):
        lo_gap = inner.lo_array - outer.lo_array
        hi_gap = outer.hi_array - inner.hi_array
        if np.any(lo_gap < 0) or np.any(hi_gap < 0):
            return None
        return float(min(lo_gap.min(), hi_gap.min()))
    if isinstance(inner, Ball) and isinstance(outer, Ball):
        gap = outer.radius - float(np.linalg.norm(inner.center_array - outer.center_array)) - inner.radius
        return gap if gap >= 0 else None
    return None


def _as_concentration(event: EventSet) -> EventSet:
    if isinstance(event, LambdaSet) and event.fixed_part.mass == 0:
        return Concentration(event.U, 0, ConcentrationMode.EQ)
    return event


def _upper_capped(event: Concentration) -> bool:
    return event.mode in (ConcentrationMode.LEQ, ConcentrationMode.EQ)


def _lower_capped(event: Concentration) -> bool:
    return event.mode in (ConcentrationMode.GEQ, ConcentrationMode.EQ)


def _concentration_bound(sparse: Concentration, dense: Concentration) -> float | None:
    """At most n1 in E1 versus at least n2 > n1 in E2 inside E1."""
    if not (_upper_capped(sparse) and _lower_capped(dense) and dense.n > sparse.n):
        return None
    gap = _nested_gap(dense.region, sparse.region)
    if gap is None:
        return None
    return math.sqrt(dense.n - sparse.n) * gap


def _ordered_bound(a: EventSet, b: EventSet) -> ExtendedDistance | None:
    if isinstance(a, LambdaSet) and isinstance(b, LambdaSet) and a.U == b.U:
        return ExtendedDistance.finite(lambda_set_distance(a.gamma_ref, b.gamma_ref, a.U))
    if isinstance(a, RhoBall) and isinstance(b, RhoBall) and a.U == b.U:
        d = lambda_set_distance(a.gamma_ref, b.gamma_ref, a.U)
        return ExtendedDistance.finite(max(d - a.radius - b.radius, 0.0))
    if isinstance(a, LambdaSet) and isinstance(b, RhoBall) and a.U == b.U:
        d = lambda_set_distance(a.gamma_ref, b.gamma_ref, a.U)
        return ExtendedDistance.finite(max(d - b.radius, 0.0))
    if isinstance(a, DistanceBall) and isinstance(b, DistanceBall):
        d = d_upsilon(a.center, b.center)
        if not d.is_finite:
            # open balls never leave their sector
            return d
        return ExtendedDistance.finite(max(d.value - a.radius - b.radius, 0.0))
    a, b = _as_concentration(a), _as_concentration(b)
    if isinstance(a, Concentration) and isinstance(b, Concentration):
        bound = _concentration_bound(a, b)
        if bound is not None:
            return ExtendedDistance.finite(bound)
    return None


def distance_lower_bound(a: EventSet, b: EventSet) -> ExtendedDistance:
    """A certified lower bound on inf d(gamma, eta) over gamma in a, eta in b."""
    for first, second in ((a, b), (b, a)):
        bound = _ordered_bound(first, second)
        if bound is not None:
            return bound
    raise NoDistanceCertificate(f"No distance certificate for the pair ({a.kind}, {b.kind})")


# ============================================================================
# BATCHED MEMBERSHIP
# ============================================================================


def contains_batch(event: EventSet, xs: np.ndarray) -> np.ndarray:
    """Membership of every particle array in a (P, n, d) stack."""
    n_batch, n, dim = xs.shape
    if isinstance(event, WholeSpace):
        return np.ones(n_batch, dtype=bool)
    if isinstance(event, Concentration):
        counts = event.region.contains(xs.reshape(-1, dim)).reshape(n_batch, n).sum(axis=1)
        if event.mode is ConcentrationMode.EQ:
            return counts == event.n
        if event.mode is ConcentrationMode.GEQ:
            return counts >= event.n
        return counts <= event.n
    if isinstance(event, DistanceBall):
        return batched_d_upsilon(xs, event.center) < event.radius
    if isinstance(event, RhoBall):
        return batched_rho_gamma_U(xs, event.gamma_ref, event.U) < event.radius
    return np.array([event.contains(Configuration.from_points(x, dim)) for x in xs], dtype=bool)
