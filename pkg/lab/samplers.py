"""
Samplers for reference point-process laws on finite windows, and Monte Carlo
checks of the Poisson identities (Mecke, Laplace functional, tightness).
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import Literal, Union

import numpy as np
from scipy import stats
from scipy.special import gammainc

from config import (
    MCMC_BURN_IN,
    MCMC_MOVE_SCALE_FRACTION,
    MCMC_PROPOSAL_MIX,
    MCMC_THINNING,
    MECKE_STRATA,
    QUADRATURE_NODES,
    STUCK_ACCEPTANCE,
)
from core.errors import ChainStuck, NumericalFailure
from core.models import Box, Configuration, Window
from core.point_config import ConcentrationMode, count
from lab.parallel import RngLike, make_rng, mean_and_stderr, run_chunked
from lab.potentials import FreePotential, PairPotential, ZeroFree, ZeroPair

logger = logging.getLogger(__name__)

Density = Callable[[np.ndarray], np.ndarray]


def midpoint_grid(box: Box, nodes_per_axis: int) -> tuple[np.ndarray, float]:
    """Cell midpoints of a regular grid on the box and the volume of one cell."""
    axes = [
        lo + (np.arange(nodes_per_axis) + 0.5) * (hi - lo) / nodes_per_axis for lo, hi in zip(box.lo, box.hi)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts, box.volume / nodes_per_axis**box.dim


def _box_intersection_volume(a: Box, b: Box) -> float:
    lo = np.maximum(a.lo_array, b.lo_array)
    hi = np.minimum(a.hi_array, b.hi_array)
    return float(np.prod(np.clip(hi - lo, 0.0, None)))


############################################
#                                          #
#   Intensity measures                     #
#                                          #
############################################


@dataclass(frozen=True)
class IntensityMeasure:
    """Reference measure m = intensity * density(x) dx restricted to a window.

    density=None means the constant 1. A non-constant density needs an upper
    bound for rejection sampling.
    """

    window: Window
    intensity: float = 1.0
    density: Density | None = None
    density_bound: float | None = None
    nodes: int = QUADRATURE_NODES
    _base_mass: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.intensity > 0 and math.isfinite(self.intensity)):
            raise ValueError(f"intensity must be a positive finite number, got {self.intensity}")
        if self.density is None:
            base = self.window.volume
        else:
            if self.density_bound is None or not self.density_bound > 0:
                raise ValueError("A density needs a positive density_bound for rejection sampling")
            pts, cell = midpoint_grid(self.window.bounding_box(), self.nodes)
            inside = self.window.contains(pts)
            values = np.asarray(self.density(pts), dtype=float)
            if np.any(values[inside] < 0):
                raise ValueError("density must be nonnegative on the window")
            if np.any(values[inside] > self.density_bound * (1 + 1e-12)):
                raise ValueError(f"density exceeds its declared bound {self.density_bound}")
            base = float(values[inside].sum() * cell)
        if not (base > 0 and math.isfinite(base)):
            raise ValueError(f"Total mass must be positive and finite, got {base}")
        object.__setattr__(self, "_base_mass", base)

    @classmethod
    def uniform(cls, window: Window, intensity: float = 1.0) -> "IntensityMeasure":
        return cls(window, intensity)

    @classmethod
    def with_density(cls, window: Window, density: Density, bound: float, intensity: float = 1.0):
        return cls(window, intensity, density, bound)

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def total_mass(self) -> float:
        return self.intensity * self._base_mass

    def scaled(self, s: float) -> "IntensityMeasure":
        return replace(self, intensity=self.intensity * s)

    def density_at(self, xs: np.ndarray) -> np.ndarray:
        """Density of m with respect to Lebesgue measure (intensity included), zero off the window."""
        inside = self.window.contains(xs).astype(float)
        base = np.ones(len(inside)) if self.density is None else np.asarray(self.density(xs), dtype=float)
        return self.intensity * base * inside

    def integrate(self, g: Callable[[np.ndarray], np.ndarray]) -> float:
        """Midpoint quadrature of the integral of g dm over the window."""
        pts, cell = midpoint_grid(self.window.bounding_box(), self.nodes)
        weights = self.density_at(pts) * cell
        mask = weights > 0
        if not mask.any():
            return 0.0
        return float(np.dot(np.asarray(g(pts[mask]), dtype=float), weights[mask]))

    def mass_of(self, region: Window) -> float:
        """m(region), exact for a constant density on boxes, quadrature otherwise."""
        if self.density is None and isinstance(region, Box) and isinstance(self.window, Box):
            return self.intensity * _box_intersection_volume(region, self.window)
        return self.integrate(lambda xs: region.contains(xs).astype(float))

    def sample_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n i.i.d. points from m / total_mass."""
        if self.density is None:
            return self.window.sample_uniform(rng, n)
        chunks, need = [], n
        while need > 0:
            batch = max(2 * need, 16)
            cand = self.window.sample_uniform(rng, batch)
            keep = cand[rng.random(batch) * self.density_bound < self.density(cand)][:need]
            chunks.append(keep)
            need -= len(keep)
        return np.vstack(chunks) if chunks else np.zeros((0, self.dim))


############################################
#                                          #
#   Point-process models                   #
#                                          #
############################################


@dataclass(frozen=True)
class MCMCParams:
    burn_in: int = MCMC_BURN_IN
    thinning: int = MCMC_THINNING
    proposal_mix: tuple[float, float, float] = MCMC_PROPOSAL_MIX
    move_scale: float | None = None  # None -> fraction of the window diameter

    def __post_init__(self):
        if self.burn_in < 1 or self.thinning < 1:
            raise ValueError(f"burn_in and thinning must be >= 1, got {self.burn_in}, {self.thinning}")
        mix = tuple(float(p) for p in self.proposal_mix)
        if len(mix) != 3 or min(mix) < 0 or abs(sum(mix) - 1.0) > 1e-12:
            raise ValueError(f"proposal_mix must be three nonnegative probabilities summing to 1, got {mix}")
        if mix[0] == 0 or mix[1] == 0:
            raise ValueError("Birth and death proposals must both have positive probability")
        if self.move_scale is not None and not self.move_scale > 0:
            raise ValueError(f"move_scale must be positive, got {self.move_scale}")
        object.__setattr__(self, "proposal_mix", mix)


@dataclass(frozen=True)
class PoissonModel:
    m: IntensityMeasure
    kind: Literal["poisson"] = field(default="poisson", init=False)

    @property
    def dim(self) -> int:
        return self.m.dim

    @property
    def window(self) -> Window:
        return self.m.window


@dataclass(frozen=True)
class MixedPoissonModel:
    """Poisson with random intensity s*m, s drawn from a finitely supported law."""

    m: IntensityMeasure
    levy_values: tuple[float, ...]
    levy_weights: tuple[float, ...]
    kind: Literal["mixed_poisson"] = field(default="mixed_poisson", init=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.levy_values)
        weights = tuple(float(w) for w in self.levy_weights)
        if not values or len(values) != len(weights):
            raise ValueError("levy_values and levy_weights must be nonempty and of equal length")
        if min(values) <= 0 or min(weights) <= 0:
            raise ValueError("Levy atoms and weights must be positive")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"Levy weights must sum to 1, got {sum(weights)}")
        object.__setattr__(self, "levy_values", values)
        object.__setattr__(self, "levy_weights", weights)

    @property
    def dim(self) -> int:
        return self.m.dim

    @property
    def window(self) -> Window:
        return self.m.window


@dataclass(frozen=True)
class GibbsModel:
    """Finite-volume Gibbs law with density proportional to exp(-H) against Poisson(m)."""

    m: IntensityMeasure
    phi: FreePotential = field(default_factory=ZeroFree)
    psi: PairPotential = field(default_factory=ZeroPair)
    mcmc: MCMCParams = field(default_factory=MCMCParams)
    kind: Literal["gibbs"] = field(default="gibbs", init=False)

    def __post_init__(self):
        # spot check of symmetry on random pairs
        rng = np.random.default_rng(0)
        xs = self.m.window.sample_uniform(rng, 10)
        ys = self.m.window.sample_uniform(rng, 10)
        for x, y in zip(xs, ys):
            a, b = self.psi(x, y[None])[0], self.psi(y, x[None])[0]
            if not (a == b or abs(a - b) <= 1e-12 * max(1.0, abs(a))):
                raise ValueError(f"Pair potential {self.psi.name} is not symmetric")

    @property
    def dim(self) -> int:
        return self.m.dim

    @property
    def window(self) -> Window:
        return self.m.window


@dataclass(frozen=True)
class GinibreModel:
    """Eigenvalues of an n x n matrix with i.i.d. standard complex Gaussian entries."""

    n: int
    kind: Literal["ginibre"] = field(default="ginibre", init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Ginibre size must be >= 1, got {self.n}")

    @property
    def dim(self) -> int:
        return 2

    @property
    def window(self) -> None:
        return None


@dataclass(frozen=True)
class BinomialModel:
    """Exactly n i.i.d. points from m / total_mass (Poisson conditioned on n points)."""

    m: IntensityMeasure
    n: int
    kind: Literal["binomial"] = field(default="binomial", init=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"Binomial size must be >= 0, got {self.n}")

    @property
    def dim(self) -> int:
        return self.m.dim

    @property
    def window(self) -> Window:
        return self.m.window


PointProcessModel = Union[PoissonModel, MixedPoissonModel, GibbsModel, GinibreModel, BinomialModel]


############################################
#                                          #
#   Exact samplers                         #
#                                          #
############################################


def sample_poisson(m: IntensityMeasure, rng: RngLike = None) -> Configuration:
    rng = make_rng(rng)
    n = int(rng.poisson(m.total_mass))
    return Configuration.from_points(m.sample_points(rng, n), m.dim)


def sample_mixed_poisson(model: MixedPoissonModel, rng: RngLike = None) -> Configuration:
    rng = make_rng(rng)
    s = model.levy_values[int(rng.choice(len(model.levy_values), p=model.levy_weights))]
    return sample_poisson(model.m.scaled(s), rng)


def sample_binomial(model: BinomialModel, rng: RngLike = None) -> Configuration:
    rng = make_rng(rng)
    return Configuration.from_points(model.m.sample_points(rng, model.n), model.dim)


def sample_ginibre(n: int, rng: RngLike = None) -> Configuration:
    """Ginibre eigenvalues as n simple points in R^2."""
    if n < 1:
        raise ValueError(f"Ginibre size must be >= 1, got {n}")
    rng = make_rng(rng)
    matrix = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    try:
        eigenvalues = np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"Eigenvalue solver failed for Ginibre matrix of size {n}: {e}") from e
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalFailure(f"Non-finite eigenvalues for Ginibre matrix of size {n}")
    return Configuration.from_points(np.column_stack([eigenvalues.real, eigenvalues.imag]), 2)


def ginibre_disk_expectation(n: int, radius: float = 1.0) -> float:
    """Expected number of size-n Ginibre eigenvalues in the centered disk of the given radius."""
    k = np.arange(1, n + 1)
    return float(gammainc(k, radius**2).sum())


############################################
#                                          #
#   Gibbs birth-death-move chain           #
#                                          #
############################################


def hamiltonian(gamma: Configuration, phi: FreePotential, psi: PairPotential) -> float:
    """Sum of m_x Phi(x) plus Psi over unordered pairs of distinct expanded atoms."""
    if gamma.mass == 0:
        return 0.0
    free = 0.0 if phi.is_zero else float(np.dot(phi(gamma.points), gamma.multiplicities))
    if math.isinf(free):
        return free
    pair = 0.0 if psi.is_zero else psi.pair_energy(gamma.expanded())
    return free + pair


class GibbsChain:
    """Birth-death-move Metropolis-Hastings chain started from the empty configuration."""

    def __init__(self, model: GibbsModel, rng: RngLike = None):
        self.model = model
        self.rng = make_rng(rng)
        self.points = np.zeros((0, model.dim))
        self.proposed = 0
        self.accepted = 0
        self._cum = np.cumsum(model.mcmc.proposal_mix)
        self._p_birth, self._p_death, _ = model.mcmc.proposal_mix
        self._mass = model.m.total_mass
        self._move_scale = model.mcmc.move_scale or MCMC_MOVE_SCALE_FRACTION * model.window.diameter

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0

    def state(self) -> Configuration:
        return Configuration.from_points(self.points, self.model.dim)

    def _local_energy(self, x: np.ndarray, others: np.ndarray) -> float:
        energy = 0.0 if self.model.phi.is_zero else float(self.model.phi(x[None, :])[0])
        if not self.model.psi.is_zero and len(others):
            energy += float(self.model.psi(x, others).sum())
        return energy

    def _accept(self, log_ratio: float) -> bool:
        return self.rng.random() < math.exp(min(log_ratio, 0.0))

    def step(self) -> None:
        rng = self.rng
        move = min(int(np.searchsorted(self._cum, rng.random(), side="right")), 2)
        n = len(self.points)
        self.proposed += 1

        if move == 0:
            x = self.model.m.sample_points(rng, 1)[0]
            dh = self._local_energy(x, self.points)
            log_ratio = -dh + math.log(self._mass / (n + 1)) + math.log(self._p_death / self._p_birth)
            if self._accept(log_ratio):
                self.points = np.vstack([self.points, x])
                self.accepted += 1
            return

        if n == 0:
            return
        i = int(rng.integers(n))
        others = np.delete(self.points, i, axis=0)

        if move == 1:
            dh = -self._local_energy(self.points[i], others)
            log_ratio = -dh + math.log(n / self._mass) + math.log(self._p_birth / self._p_death)
            if self._accept(log_ratio):
                self.points = others
                self.accepted += 1
            return

        x_old = self.points[i]
        x_new = x_old + self._move_scale * rng.standard_normal(self.model.dim)
        if not self.model.window.contains(x_new[None, :])[0]:
            return
        dh = self._local_energy(x_new, others) - self._local_energy(x_old, others)
        dens = self.model.m.density_at(np.vstack([x_new, x_old]))
        if dens[0] <= 0:
            return
        log_ratio = -dh + math.log(dens[0] / dens[1])
        if self._accept(log_ratio):
            self.points = self.points.copy()
            self.points[i] = x_new
            self.accepted += 1

    def run(self, steps: int) -> None:
        for _ in range(steps):
            self.step()


def run_gibbs_chain(model: GibbsModel, n_samples: int, rng: RngLike = None) -> list[Configuration]:
    """Burn in, then retain n_samples states separated by the thinning interval."""
    chain = GibbsChain(model, rng)
    chain.run(model.mcmc.burn_in)
    if chain.acceptance_rate < STUCK_ACCEPTANCE:
        raise ChainStuck(
            f"Acceptance rate {chain.acceptance_rate:.2e} over {model.mcmc.burn_in} burn-in steps "
            f"is below {STUCK_ACCEPTANCE}"
        )
    logger.info("Gibbs burn-in done: acceptance %.3f, %d points", chain.acceptance_rate, len(chain.points))
    samples = []
    for _ in range(n_samples):
        chain.run(model.mcmc.thinning)
        samples.append(chain.state())
    return samples


def sample_gibbs(model: GibbsModel, rng: RngLike = None) -> Configuration:
    return run_gibbs_chain(model, 1, rng)[0]


def sample_model(model: PointProcessModel, rng: RngLike = None) -> Configuration:
    """One draw from any model."""
    if isinstance(model, PoissonModel):
        return sample_poisson(model.m, rng)
    if isinstance(model, MixedPoissonModel):
        return sample_mixed_poisson(model, rng)
    if isinstance(model, GibbsModel):
        return sample_gibbs(model, rng)
    if isinstance(model, GinibreModel):
        return sample_ginibre(model.n, rng)
    if isinstance(model, BinomialModel):
        return sample_binomial(model, rng)
    raise TypeError(f"Unknown model type: {type(model).__name__}")


def sample_many(model: PointProcessModel, n_samples: int, rng: RngLike = None, workers: int = 1) -> list[Configuration]:
    """n_samples draws; a Gibbs model runs one thinned chain per worker."""
    if isinstance(model, GibbsModel):
        return run_chunked(lambda g, k: run_gibbs_chain(model, k, g) if k else [], n_samples, rng, workers)
    return run_chunked(lambda g, k: [sample_model(model, g) for _ in range(k)], n_samples, rng, workers)


def _group_by_count(points: np.ndarray, counts: np.ndarray, dim: int) -> dict[int, np.ndarray]:
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    groups = {}
    for c in np.unique(counts):
        starts = offsets[counts == c]
        groups[int(c)] = points[starts[:, None] + np.arange(int(c))[None, :]].reshape(len(starts), int(c), dim)
    return groups


def sample_particle_groups(
    model: PointProcessModel, n_samples: int, rng: RngLike = None
) -> dict[int, np.ndarray]:
    """n_samples draws as particle arrays, grouped by size: {n: array (P_n, n, d)}.

    Poisson-type and binomial models are drawn fully vectorized; other models
    go through sample_many.
    """
    rng = make_rng(rng)
    dim = model.dim
    if isinstance(model, BinomialModel):
        return {model.n: model.m.sample_points(rng, n_samples * model.n).reshape(n_samples, model.n, dim)}
    if isinstance(model, (PoissonModel, MixedPoissonModel)):
        mass = np.full(n_samples, model.m.total_mass)
        if isinstance(model, MixedPoissonModel):
            picks = rng.choice(len(model.levy_values), size=n_samples, p=model.levy_weights)
            mass = mass * np.asarray(model.levy_values)[picks]
        counts = rng.poisson(mass).astype(np.int64)
        points = model.m.sample_points(rng, int(counts.sum()))
        return _group_by_count(points, counts, dim)
    configs = sample_many(model, n_samples, rng)
    counts = np.array([c.mass for c in configs], dtype=np.int64)
    points = np.vstack([c.expanded() for c in configs] + [np.zeros((0, dim))])
    return _group_by_count(points, counts, dim)


def counts_in(samples: Sequence[Configuration], region: Window) -> np.ndarray:
    return np.array([count(gamma, region) for gamma in samples], dtype=np.int64)


############################################
#                                          #
#   Poisson identities                     #
#                                          #
############################################


@dataclass(frozen=True)
class IdentityCheck:
    """Two Monte Carlo sides of an identity; stderr refers to their difference."""

    lhs: float
    rhs: float
    stderr: float
    lhs_stderr: float
    rhs_stderr: float
    n_samples: int

    def passed(self, sigmas: float = 3.0) -> bool:
        return abs(self.lhs - self.rhs) <= sigmas * self.stderr + 1e-12

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "stderr": self.stderr,
            "lhs_stderr": self.lhs_stderr,
            "rhs_stderr": self.rhs_stderr,
            "n_samples": self.n_samples,
        }


class MeckeFunctional(ABC):
    """u(gamma, x), evaluated for a batch of points x with gamma fixed."""

    name: str = "functional"

    @abstractmethod
    def value(self, gamma: Configuration, xs: np.ndarray) -> np.ndarray: ...

    def value_added(self, gamma: Configuration, xs: np.ndarray) -> np.ndarray:
        """u(gamma + delta_x, x) for every row x."""
        return np.array([self.value(gamma.with_point(x), x[None, :])[0] for x in xs])


@dataclass(frozen=True)
class ZeroFunctional(MeckeFunctional):
    name: str = "zero"

    def value(self, gamma, xs):
        return np.zeros(len(xs))

    def value_added(self, gamma, xs):
        return np.zeros(len(xs))


@dataclass(frozen=True)
class IndicatorFunctional(MeckeFunctional):
    """1_E(x)"""

    region: Window
    name: str = "indicator"

    def value(self, gamma, xs):
        return self.region.contains(xs).astype(float)

    def value_added(self, gamma, xs):
        return self.value(gamma, xs)


@dataclass(frozen=True)
class CountEqualsFunctional(MeckeFunctional):
    """1_E(x) * 1{gamma(E) = k}"""

    region: Window
    k: int
    name: str = "count_equals"

    def value(self, gamma, xs):
        inside = self.region.contains(xs)
        return (inside & (count(gamma, self.region) == self.k)).astype(float)

    def value_added(self, gamma, xs):
        inside = self.region.contains(xs)
        return (inside & (count(gamma, self.region) + 1 == self.k)).astype(float)


@dataclass(frozen=True)
class CountWeightedFunctional(MeckeFunctional):
    """1_E(x) * gamma(E)"""

    region: Window
    name: str = "count_weighted"

    def value(self, gamma, xs):
        return self.region.contains(xs) * float(count(gamma, self.region))

    def value_added(self, gamma, xs):
        inside = self.region.contains(xs)
        return inside * float(count(gamma, self.region) + 1)


@dataclass(frozen=True)
class IsolatedPointFunctional(MeckeFunctional):
    """1_E(x) * 1{no other unit of mass within radius of x}"""

    region: Window
    radius: float
    name: str = "isolated_point"

    def _neighbours(self, gamma: Configuration, xs: np.ndarray) -> np.ndarray:
        if gamma.mass == 0:
            return np.zeros(len(xs), dtype=np.int64)
        dist = np.linalg.norm(xs[:, None, :] - gamma.points[None, :, :], axis=2)
        return ((dist <= self.radius) * gamma.multiplicities[None, :]).sum(axis=1)

    def value(self, gamma, xs):
        # x itself is an atom of gamma here and counts once
        return (self.region.contains(xs) & (self._neighbours(gamma, xs) == 1)).astype(float)

    def value_added(self, gamma, xs):
        return (self.region.contains(xs) & (self._neighbours(gamma, xs) == 0)).astype(float)


@dataclass(frozen=True)
class GaussianDecayFunctional(MeckeFunctional):
    """exp(-|x - center|^2 / 2) * exp(-rate * gamma(E)) for x in the window E."""

    region: Window
    center: tuple[float, ...]
    rate: float = 0.5
    name: str = "gaussian_decay"

    def _bump(self, xs):
        diff = xs - np.array(self.center)
        return np.exp(-0.5 * np.einsum("ij,ij->i", diff, diff)) * self.region.contains(xs)

    def value(self, gamma, xs):
        return self._bump(xs) * math.exp(-self.rate * count(gamma, self.region))

    def value_added(self, gamma, xs):
        shift = self.region.contains(xs).astype(float)
        return self._bump(xs) * np.exp(-self.rate * (count(gamma, self.region) + shift))


def _stratified_points(m: IntensityMeasure, rng: np.random.Generator, strata: int) -> tuple[np.ndarray, np.ndarray]:
    """One uniform point per grid cell of the window's bounding box, with dm weights."""
    box = m.window.bounding_box()
    per_axis = max(1, round(strata ** (1.0 / box.dim)))
    corners, cell = midpoint_grid(box, per_axis)
    width = (box.hi_array - box.lo_array) / per_axis
    pts = corners + (rng.random(corners.shape) - 0.5) * width
    return pts, m.density_at(pts) * cell


def check_mecke(
    m: IntensityMeasure,
    u: MeckeFunctional,
    n_samples: int,
    rng: RngLike = None,
    workers: int = 1,
    strata: int = MECKE_STRATA,
) -> IdentityCheck:
    """Compare E[sum over x in gamma of u(gamma, x)] with E[integral of u(gamma + delta_x, x) dm(x)] under Poisson(m)."""

    def chunk(g: np.random.Generator, k: int) -> list[tuple[float, float]]:
        rows = []
        for _ in range(k):
            gamma = sample_poisson(m, g)
            lhs = float(u.value(gamma, gamma.expanded()).sum()) if gamma.mass else 0.0
            pts, weights = _stratified_points(m, g, strata)
            rhs = float(np.dot(u.value_added(gamma, pts), weights))
            rows.append((lhs, rhs))
        return rows

    rows = np.array(run_chunked(chunk, n_samples, rng, workers), dtype=float).reshape(-1, 2)
    lhs, lhs_se = mean_and_stderr(rows[:, 0])
    rhs, rhs_se = mean_and_stderr(rows[:, 1])
    _, diff_se = mean_and_stderr(rows[:, 0] - rows[:, 1])
    logger.info("Mecke check %s: lhs=%.6g rhs=%.6g stderr=%.3g", u.name, lhs, rhs, diff_se)
    return IdentityCheck(lhs, rhs, diff_se, lhs_se, rhs_se, n_samples)


class LaplaceFunction(ABC):
    """Bounded nonnegative f whose Laplace functional E[exp(f*gamma)] is checked."""

    name: str = "laplace"

    @abstractmethod
    def __call__(self, xs: np.ndarray) -> np.ndarray: ...

    def log_laplace(self, m: IntensityMeasure) -> float:
        """Integral of (e^f - 1) dm."""
        return m.integrate(lambda xs: np.expm1(self(xs)))


@dataclass(frozen=True)
class ConstantOnRegion(LaplaceFunction):
    """c * 1_E"""

    region: Window
    c: float
    name: str = "constant_on_region"

    def __call__(self, xs):
        return self.c * self.region.contains(xs)

    def log_laplace(self, m):
        return math.expm1(self.c) * m.mass_of(self.region)


@dataclass(frozen=True)
class GaussianBumpLaplace(LaplaceFunction):
    """height * exp(-|x - center|^2 / (2 scale^2))"""

    center: tuple[float, ...]
    height: float
    scale: float
    name: str = "gaussian_bump"

    def __call__(self, xs):
        diff = np.asarray(xs) - np.array(self.center)
        return self.height * np.exp(-np.einsum("ij,ij->i", diff, diff) / (2 * self.scale**2))


@dataclass(frozen=True)
class CallableLaplace(LaplaceFunction):
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "callable"

    def __call__(self, xs):
        return np.asarray(self.fn(xs), dtype=float)


def check_laplace(
    m: IntensityMeasure, f: LaplaceFunction | Callable, n_samples: int, rng: RngLike = None, workers: int = 1
) -> IdentityCheck:
    """Empirical E[exp(f*gamma)] against exp(integral of (e^f - 1) dm) under Poisson(m)."""
    if not isinstance(f, LaplaceFunction):
        f = CallableLaplace(f)

    def chunk(g: np.random.Generator, k: int) -> list[float]:
        out = []
        for _ in range(k):
            gamma = sample_poisson(m, g)
            if gamma.mass == 0:
                out.append(1.0)
                continue
            values = f(gamma.points)
            if np.any(values < 0):
                raise ValueError(f"Laplace function {f.name} must be nonnegative")
            out.append(math.exp(float(np.dot(values, gamma.multiplicities))))
        return out

    empirical, se = mean_and_stderr(run_chunked(chunk, n_samples, rng, workers))
    closed_form = math.exp(f.log_laplace(m))
    logger.info("Laplace check %s: empirical=%.6g closed_form=%.6g", f.name, empirical, closed_form)
    return IdentityCheck(empirical, closed_form, se, se, 0.0, n_samples)


############################################
#                                          #
#   Concentration and tightness            #
#                                          #
############################################


def poisson_concentration_probability(m: IntensityMeasure, region: Window, n: int, mode: ConcentrationMode) -> float:
    """Exact Poisson(m) probability of {gamma(E) = n}, {>= n} or {<= n}."""
    lam = m.mass_of(region)
    mode = ConcentrationMode(mode)
    if mode is ConcentrationMode.EQ:
        return float(stats.poisson.pmf(n, lam))
    if mode is ConcentrationMode.GEQ:
        return float(stats.poisson.sf(n - 1, lam))
    return float(stats.poisson.cdf(n, lam))


def _tail_at_least(model: PointProcessModel, region: Window, n: int) -> float | None:
    """Exact P(gamma(E) >= n) when a closed form is known."""
    if n <= 0:
        return 1.0
    if isinstance(model, PoissonModel):
        return float(gammainc(n, model.m.mass_of(region)))
    if isinstance(model, MixedPoissonModel):
        lam = model.m.mass_of(region)
        return float(sum(w * gammainc(n, s * lam) for s, w in zip(model.levy_values, model.levy_weights)))
    if isinstance(model, BinomialModel):
        p = model.m.mass_of(region) / model.m.total_mass
        return float(stats.binom.sf(n - 1, model.n, p))
    return None


@dataclass(frozen=True)
class TightnessRow:
    n: int
    empirical: float
    stderr: float
    exact: float | None
    exact_strict: float | None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "empirical": self.empirical,
            "stderr": self.stderr,
            "exact": self.exact,
            "exact_strict": self.exact_strict,
        }


def tightness_profile(
    model: PointProcessModel,
    region: Window,
    n_max: int,
    n_samples: int,
    rng: RngLike = None,
    workers: int = 1,
) -> list[TightnessRow]:
    """n * P(gamma(E) >= n) for n = 0..n_max, empirical and (when known) exact.

    exact_strict is n * P(gamma(E) >= n + 1).
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    counts = counts_in(sample_many(model, n_samples, rng, workers), region)
    rows = []
    for n in range(n_max + 1):
        p = float(np.mean(counts >= n))
        se = n * math.sqrt(p * (1 - p) / len(counts)) if len(counts) else 0.0
        tail, strict = _tail_at_least(model, region, n), _tail_at_least(model, region, n + 1)
        rows.append(
            TightnessRow(
                n=n,
                empirical=n * p,
                stderr=se,
                exact=None if tail is None else n * tail,
                exact_strict=None if strict is None else n * strict,
            )
        )
    return rows
