from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import DimensionMismatch


def as_points(points, dim: int | None = None) -> np.ndarray:
    """Coerce a point or a stack of points to a float array of shape (k, d)."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        width = dim if dim is not None else (arr.shape[-1] if arr.ndim == 2 else 1)
        return np.zeros((0, width))
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if dim is None or arr.shape[0] == dim else arr.reshape(-1, 1)
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatch(arr.shape[1], dim)
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


############################################
#                                          #
#   Value types                            #
#                                          #
############################################


@dataclass(frozen=True, eq=False)
class Configuration:
    """Finite multiset of points in R^d, stored as merged atoms with multiplicities.

    Atoms are kept in lexicographic coordinate order with no repeated rows, so
    two configurations are equal exactly when their arrays are equal.
    """

    points: np.ndarray
    multiplicities: np.ndarray
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.points.shape != (len(self.multiplicities), self.dim):
            raise ValueError(f"points shape {self.points.shape} does not match {len(self.multiplicities)} atoms")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("Configuration coordinates must be finite")
        if np.any(self.multiplicities < 1):
            raise ValueError("Multiplicities must be positive integers")

    @classmethod
    def empty(cls, dim: int) -> Configuration:
        return cls(_frozen(np.zeros((0, dim))), _frozen(np.zeros(0, dtype=np.int64)), dim)

    @classmethod
    def from_atoms(cls, points, multiplicities, dim: int | None = None) -> Configuration:
        """Build a configuration, merging atoms with identical coordinates."""
        pts = as_points(points, dim)
        if dim is None:
            dim = pts.shape[1] if pts.size else 1
        mult = np.asarray(multiplicities, dtype=np.int64).reshape(-1)
        if len(mult) != len(pts):
            raise ValueError(f"Got {len(pts)} points but {len(mult)} multiplicities")
        if len(pts) == 0:
            return cls.empty(dim)
        if np.any(mult < 1):
            raise ValueError("Multiplicities must be positive integers")
        # -0.0 + 0.0 == +0.0, so signed zeros merge
        unique, inverse = np.unique(pts.reshape(-1, dim) + 0.0, axis=0, return_inverse=True)
        counts = np.zeros(len(unique), dtype=np.int64)
        np.add.at(counts, inverse.reshape(-1), mult)
        return cls(_frozen(unique), _frozen(counts), dim)

    @classmethod
    def from_points(cls, points, dim: int | None = None) -> Configuration:
        """One unit of mass per listed point."""
        pts = as_points(points, dim)
        return cls.from_atoms(pts, np.ones(len(pts), dtype=np.int64), dim)

    @property
    def mass(self) -> int:
        return int(self.multiplicities.sum())

    @property
    def n_atoms(self) -> int:
        return len(self.multiplicities)

    def expanded(self) -> np.ndarray:
        """Points repeated according to multiplicity, shape (mass, d)."""
        return np.repeat(self.points, self.multiplicities, axis=0)

    def atoms(self) -> Iterator[tuple[np.ndarray, int]]:
        for x, m in zip(self.points, self.multiplicities):
            yield x, int(m)

    def with_point(self, x) -> Configuration:
        """This configuration plus one unit of mass at x."""
        x = as_points(x, self.dim)
        return Configuration.from_atoms(
            np.vstack([self.points, x]), np.concatenate([self.multiplicities, [1]]), self.dim
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.multiplicities, other.multiplicities)
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.points.tobytes(), self.multiplicities.tobytes()))

    def __repr__(self) -> str:
        atoms = ", ".join(f"{tuple(float(c) for c in x)}x{m}" for x, m in self.atoms())
        return f"Configuration(dim={self.dim}, {{{atoms}}})"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; membership is half-open [lo, hi) per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    kind: Literal["box"] = field(default="box", init=False)

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise ValueError(f"Box bounds must have equal positive length, got {lo} and {hi}")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"Box requires lo < hi on every axis, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_array(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_array(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi_array - self.lo_array))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi_array - self.lo_array))

    def bounding_box(self) -> Box:
        return self

    def contains(self, points) -> np.ndarray:
        pts = as_points(points, self.dim)
        return np.all((pts >= self.lo_array) & (pts < self.hi_array), axis=1)

    def contains_open(self, points) -> np.ndarray:
        pts = as_points(points, self.dim)
        return np.all((pts > self.lo_array) & (pts < self.hi_array), axis=1)

    def distance_to(self, points) -> np.ndarray:
        """Euclidean distance to the closed box."""
        pts = as_points(points, self.dim)
        return np.linalg.norm(pts - np.clip(pts, self.lo_array, self.hi_array), axis=1)

    def distance_to_complement(self, points) -> np.ndarray:
        """Distance to the closed complement of the open box; zero outside it."""
        pts = as_points(points, self.dim)
        margin = np.minimum(pts - self.lo_array, self.hi_array - pts).min(axis=1)
        return np.maximum(margin, 0.0)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo_array + (self.hi_array - self.lo_array) * rng.random((n, self.dim))


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball."""

    center: tuple[float, ...]
    radius: float
    kind: Literal["ball"] = field(default="ball", init=False)

    def __post_init__(self):
        center = tuple(float(v) for v in np.atleast_1d(self.center))
        if not center:
            raise ValueError("Ball center must have at least one coordinate")
        if not self.radius > 0:
            raise ValueError(f"Ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center)

    @property
    def volume(self) -> float:
        d = self.dim
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius**d

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounding_box(self) -> Box:
        c = self.center_array
        return Box(tuple(c - self.radius), tuple(c + self.radius))

    def _norms(self, points) -> np.ndarray:
        pts = as_points(points, self.dim)
        return np.linalg.norm(pts - self.center_array, axis=1)

    def contains(self, points) -> np.ndarray:
        return self._norms(points) <= self.radius

    def contains_open(self, points) -> np.ndarray:
        return self._norms(points) < self.radius

    def distance_to(self, points) -> np.ndarray:
        return np.maximum(self._norms(points) - self.radius, 0.0)

    def distance_to_complement(self, points) -> np.ndarray:
        return np.maximum(self.radius - self._norms(points), 0.0)

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        direction = rng.standard_normal((n, self.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radii = self.radius * rng.random(n) ** (1.0 / self.dim)
        return self.center_array + direction * radii[:, None]


Window = Union[Box, Ball]


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    """Ordered, finite list of points (an element of the N-fold product space)."""

    points: np.ndarray
    dim: int

    def __post_init__(self):
        pts = as_points(self.points, self.dim)
        if not np.all(np.isfinite(pts)):
            raise ValueError("LabeledSequence coordinates must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def from_points(cls, points, dim: int | None = None) -> LabeledSequence:
        pts = as_points(points, dim)
        return cls(pts, dim if dim is not None else pts.shape[1])

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabeledSequence):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash((self.dim, self.points.tobytes()))


@total_ordering
@dataclass(frozen=True)
class ExtendedDistance:
    """A nonnegative real or the distinguished value Infinite (value is None)."""

    value: float | None = None

    def __post_init__(self):
        if self.value is not None:
            if math.isnan(self.value) or math.isinf(self.value) or self.value < 0:
                raise ValueError(f"Finite distances must be nonnegative reals, got {self.value}")
            object.__setattr__(self, "value", float(self.value))

    @classmethod
    def finite(cls, value: float) -> ExtendedDistance:
        return cls(float(value))

    @classmethod
    def infinite(cls) -> ExtendedDistance:
        return cls(None)

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def as_float(self) -> float:
        """Float view for numerical formulas; Infinite maps to math.inf."""
        return math.inf if self.value is None else self.value

    def squared(self) -> ExtendedDistance:
        return self if self.value is None else ExtendedDistance(self.value**2)

    def __add__(self, other: ExtendedDistance | float) -> ExtendedDistance:
        other = other if isinstance(other, ExtendedDistance) else ExtendedDistance(float(other))
        if self.value is None or other.value is None:
            return ExtendedDistance.infinite()
        return ExtendedDistance(self.value + other.value)

    __radd__ = __add__

    def __lt__(self, other: ExtendedDistance | float) -> bool:
        other_value = other.as_float() if isinstance(other, ExtendedDistance) else float(other)
        return self.as_float() < other_value

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ExtendedDistance):
            return self.value == other.value
        if isinstance(other, (int, float)):
            return self.as_float() == float(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.value)

    def to_json(self) -> float | str:
        return "inf" if self.value is None else self.value

    def __repr__(self) -> str:
        return "ExtendedDistance(Infinite)" if self.value is None else f"ExtendedDistance({self.value!r})"


@dataclass(frozen=True)
class Matching:
    """Bijective pairing of expanded atoms with its squared-distance cost."""

    pairs: tuple[tuple[int, int], ...]
    cost: float

    @property
    def distance(self) -> float:
        return math.sqrt(self.cost)

    def to_json(self) -> list[list[int]]:
        return [[i, j] for i, j in self.pairs]


############################################
#                                          #
#   Pydantic models for JSON files         #
#                                          #
############################################


class AtomModel(BaseModel):
    """One atom of a configuration file"""

    model_config = ConfigDict(extra="forbid")

    x: list[float] = Field(description="Coordinates")
    m: int = Field(1, ge=1, description="Multiplicity")


class ConfigurationFile(BaseModel):
    """Configuration JSON file: {"dim": d, "atoms": [{"x": [..], "m": k}, ...]}"""

    model_config = ConfigDict(extra="forbid")

    dim: int = Field(ge=1, description="Dimension of the base space")
    atoms: list[AtomModel] = Field(default_factory=list, description="Atoms with multiplicities")

    @model_validator(mode="after")
    def _check_dims(self):
        for atom in self.atoms:
            if len(atom.x) != self.dim:
                raise ValueError(f"Atom {atom.x} has {len(atom.x)} coordinates, expected {self.dim}")
        return self


class BoxSpec(BaseModel):
    """Half-open box window"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["box"] = "box"
    lo: list[float] = Field(min_length=1, description="Lower corner")
    hi: list[float] = Field(min_length=1, description="Upper corner")

    def build(self) -> Box:
        return Box(tuple(self.lo), tuple(self.hi))


class BallSpec(BaseModel):
    """Closed ball window"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["ball"] = "ball"
    center: list[float] = Field(min_length=1, description="Center")
    radius: float = Field(gt=0, description="Radius")

    def build(self) -> Ball:
        return Ball(tuple(self.center), self.radius)


WindowSpec = Annotated[Union[BoxSpec, BallSpec], Field(discriminator="kind")]
