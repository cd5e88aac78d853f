"""
Finite-volume interacting Brownian particles and the Monte Carlo estimators
built on them: semigroup pairings, Gaussian upper bounds, short-time
(Varadhan) asymptotics, square fields, Rademacher checks and stationarity.

The dynamics has generator 1/2 Laplacian plus drift: every particle moves by
drift_sign * (-1/2 grad Phi - 1/2 sum grad_1 Psi) dt + sqrt(dt) N(0, I) and is
then folded back into the geometry.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from scipy import stats

from config import (
    BOUNDARY_SIGMAS,
    DEFAULT_DT,
    DT_PER_TMIN,
    MIN_HITS,
    SIGMA_GATE,
    SIGNIFICANCE,
    STEP_DRIFT_FRACTION,
)
from core.errors import BoundaryContamination, InsufficientPaths, NoDistanceCertificate, StepTooLarge
from core.models import Box, Configuration, Window
from lab.cylinder import CylinderFunction, eval_cylinder_batch
from lab.events import (
    Concentration,
    EventSet,
    contains_batch,
    distance_lower_bound,
    distance_to_event,
)
from lab.parallel import RngLike, make_rng, mean_and_stderr, run_chunked, spawn_generators
from lab.samplers import (
    GibbsModel,
    GinibreModel,
    PointProcessModel,
    PoissonModel,
    poisson_concentration_probability,
    sample_many,
    sample_particle_groups,
)
from lab.transport import batched_rho_gamma_U, d_upsilon, rho_gamma_U

logger = logging.getLogger(__name__)

MAX_CONDITIONING_ROUNDS = 1000


############################################
#                                          #
#   Geometry and dynamics                  #
#                                          #
############################################


@dataclass(frozen=True)
class ReflectingBox:
    window: Box
    kind: Literal["reflecting_box"] = field(default="reflecting_box", init=False)

    def fold(self, xs: np.ndarray) -> np.ndarray:
        lo, hi = self.window.lo_array, self.window.hi_array
        length = hi - lo
        y = np.mod(xs - lo, 2 * length)
        return lo + np.where(y > length, 2 * length - y, y)


@dataclass(frozen=True)
class Torus:
    period: tuple[float, ...]
    origin: tuple[float, ...] | None = None
    kind: Literal["torus"] = field(default="torus", init=False)

    def __post_init__(self):
        period = tuple(float(p) for p in np.atleast_1d(self.period))
        if not period or min(period) <= 0:
            raise ValueError(f"Torus periods must be positive, got {period}")
        origin = (0.0,) * len(period) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(period):
            raise ValueError("Torus origin and period must have the same length")
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "origin", origin)

    @property
    def window(self) -> Box:
        return Box(self.origin, tuple(o + p for o, p in zip(self.origin, self.period)))

    def fold(self, xs: np.ndarray) -> np.ndarray:
        lo = np.array(self.origin)
        return lo + np.mod(xs - lo, np.array(self.period))


Geometry = Union[ReflectingBox, Torus]


@dataclass(frozen=True)
class DiffusionSpec:
    """Particle dynamics: initial law `model`, drift from a Gibbs model's potentials, geometry and time step."""

    model: PointProcessModel
    geometry: Geometry
    dt: float = DEFAULT_DT
    horizon: float = 1.0
    drift_sign: float = 1.0

    def __post_init__(self):
        if isinstance(self.model, GinibreModel):
            raise ValueError("Ginibre has no finite-window dynamics here; use a Poisson, binomial or Gibbs model")
        if not (self.dt > 0 and self.horizon > 0):
            raise ValueError(f"dt and horizon must be positive, got {self.dt}, {self.horizon}")
        if self.dt > 1e-2 * self.horizon:
            raise ValueError(f"dt={self.dt} exceeds 1% of the horizon {self.horizon}")
        if self.geometry.window.dim != self.model.dim:
            raise ValueError("Geometry and model dimensions differ")

    @property
    def dim(self) -> int:
        return self.model.dim

    def steps_for(self, t: float) -> int:
        """Number of steps reaching time t exactly."""
        if t < 0 or t > self.horizon * (1 + 1e-12):
            raise ValueError(f"t={t} must lie in [0, horizon={self.horizon}]")
        ratio = t / self.dt
        steps = round(ratio)
        if abs(ratio - steps) > 1e-9:
            raise ValueError(f"t={t} is not an integer multiple of dt={self.dt}")
        return int(steps)


def _drift(xs: np.ndarray, spec: DiffusionSpec) -> np.ndarray:
    """Drift for a (P, n, d) stack of particle arrays."""
    model = spec.model
    if not isinstance(model, GibbsModel) or xs.shape[1] == 0:
        return np.zeros_like(xs)
    n_batch, n, dim = xs.shape
    drift = np.zeros_like(xs)
    if not model.phi.is_zero:
        drift -= 0.5 * model.phi.gradient(xs.reshape(-1, dim)).reshape(xs.shape)
    if not model.psi.is_zero and n > 1:
        diff = xs[:, :, None, :] - xs[:, None, :, :]
        r = np.linalg.norm(diff, axis=3)
        safe = np.where(r > 0, r, 1.0)
        scale = np.where(r > 0, model.psi.radial_derivative(r) / safe, 0.0)
        drift -= 0.5 * np.einsum("pij,pijk->pik", scale, diff)
    return spec.drift_sign * drift


def advance(xs: np.ndarray, spec: DiffusionSpec, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Euler-Maruyama for n_steps on a (P, n, d) stack; particle counts never change."""
    if xs.size == 0 or n_steps == 0:
        return xs.copy()
    limit = STEP_DRIFT_FRACTION * spec.geometry.window.diameter
    sqrt_dt = math.sqrt(spec.dt)
    is_free = not isinstance(spec.model, GibbsModel) or (spec.model.phi.is_zero and spec.model.psi.is_zero)
    for _ in range(n_steps):
        if is_free:
            moved = xs + sqrt_dt * rng.standard_normal(xs.shape)
        else:
            displacement = _drift(xs, spec) * spec.dt
            largest = float(np.linalg.norm(displacement, axis=2).max())
            if largest > limit:
                raise StepTooLarge(f"Drift displacement {largest:.3g} exceeds {limit:.3g}; reduce dt")
            moved = xs + displacement + sqrt_dt * rng.standard_normal(xs.shape)
        xs = spec.geometry.fold(moved)
    return xs


def step(state: Configuration, spec: DiffusionSpec, rng: RngLike = None) -> Configuration:
    """One Euler-Maruyama step of every expanded atom."""
    if state.mass < 1:
        raise ValueError("step needs at least one particle")
    xs = advance(state.expanded()[None, :, :], spec, 1, make_rng(rng))
    return Configuration.from_points(xs[0], state.dim)


def simulate(state: Configuration, t: float, spec: DiffusionSpec, rng: RngLike = None) -> Configuration:
    xs = advance(state.expanded()[None, :, :], spec, spec.steps_for(t), make_rng(rng))
    return Configuration.from_points(xs[0], state.dim)


def _check_margin(gamma: Configuration, window: Box, t_max: float) -> None:
    margin = BOUNDARY_SIGMAS * math.sqrt(t_max)
    if gamma.mass and float(window.distance_to_complement(gamma.points).min()) < margin:
        raise BoundaryContamination(f"An atom lies closer than {margin:.3g} to the boundary of {window}")


############################################
#                                          #
#   Semigroup estimates                    #
#                                          #
############################################


@dataclass(frozen=True)
class SemigroupEstimate:
    t: float
    estimate: float
    stderr: float
    hits: int
    paths: int
    mass_estimate: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "hits": self.hits,
            "paths": self.paths,
            "mass_estimate": self.mass_estimate,
        }


def _plain_chunk(xi, lam, t, spec):
    n_steps = spec.steps_for(t)

    def chunk(g: np.random.Generator, k: int) -> list[tuple[int, int, int]]:
        in_lam = hits = 0
        groups = sample_particle_groups(spec.model, k, g)
        for n in sorted(groups):
            start = groups[n][contains_batch(lam, groups[n])]
            in_lam += len(start)
            if len(start):
                hits += int(contains_batch(xi, advance(start, spec, n_steps, g)).sum())
        return [(k, in_lam, hits)]

    return chunk


def _conditioned_chunk(xi, lam, t, spec):
    n_steps = spec.steps_for(t)

    def chunk(g: np.random.Generator, k: int) -> list[tuple[int, int, int]]:
        draws = in_lam = accepted = hits = 0
        batch = max(k, 16)
        for _ in range(MAX_CONDITIONING_ROUNDS):
            if accepted >= k:
                break
            groups = sample_particle_groups(spec.model, batch, g)
            draws += batch
            for n in sorted(groups):
                inside = groups[n][contains_batch(lam, groups[n])]
                in_lam += len(inside)
                start = inside[: k - accepted]
                accepted += len(start)
                if len(start):
                    hits += int(contains_batch(xi, advance(start, spec, n_steps, g)).sum())
        return [(draws, in_lam, accepted, hits)]

    return chunk


def semigroup_estimate(
    xi: EventSet,
    lam: EventSet,
    t: float,
    spec: DiffusionSpec,
    n_paths: int,
    rng: RngLike = None,
    workers: int = 1,
    mode: Literal["plain", "conditioned"] = "plain",
) -> SemigroupEstimate:
    """Estimate of the pairing of 1_Lambda and P_t 1_Xi under the initial law.

    plain: n_paths initial draws, average of 1_Lambda(start) * 1_Xi(end).
    conditioned: draw until n_paths starts fall in Lambda, then multiply the
    estimated mass of Lambda by the conditional hit frequency.
    """
    if mode == "plain":
        rows = run_chunked(_plain_chunk(xi, lam, t, spec), n_paths, rng, workers)
        draws = sum(r[0] for r in rows)
        in_lam = sum(r[1] for r in rows)
        hits = sum(r[2] for r in rows)
        p = hits / draws if draws else 0.0
        return SemigroupEstimate(t, p, math.sqrt(p * (1 - p) / draws) if draws else 0.0, hits, draws, in_lam / max(draws, 1))
    if mode != "conditioned":
        raise ValueError(f"Unknown semigroup mode {mode!r}")

    rows = run_chunked(_conditioned_chunk(xi, lam, t, spec), n_paths, rng, workers)
    draws = sum(r[0] for r in rows)
    in_lam = sum(r[1] for r in rows)
    accepted = sum(r[2] for r in rows)
    hits = sum(r[3] for r in rows)
    if accepted == 0:
        raise InsufficientPaths(t, 0)
    mass = in_lam / draws
    p = hits / accepted
    var = p**2 * mass * (1 - mass) / draws + mass**2 * p * (1 - p) / accepted
    return SemigroupEstimate(t, mass * p, math.sqrt(var), hits, accepted, mass)


def estimate_mass(event: EventSet, model: PointProcessModel, n_samples: int, rng: RngLike = None) -> tuple[float, float]:
    """mu(event) with its standard error; exact for Poisson concentration events."""
    if isinstance(model, PoissonModel) and isinstance(event, Concentration):
        return poisson_concentration_probability(model.m, event.region, event.n, event.mode), 0.0
    groups = sample_particle_groups(model, n_samples, rng)
    inside = sum(int(contains_batch(event, xs).sum()) for xs in groups.values())
    p = inside / n_samples
    return p, math.sqrt(p * (1 - p) / n_samples)


############################################
#                                          #
#   Gaussian upper bound                   #
#                                          #
############################################


@dataclass(frozen=True)
class GaussianBoundRow:
    t: float
    estimate: float
    stderr: float
    upper: float
    bound: float
    violated: bool

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "upper": self.upper,
            "bound": self.bound,
            "violated": self.violated,
        }


@dataclass(frozen=True)
class GaussianBoundReport:
    rows: list[GaussianBoundRow]
    distance_lower_bound: float
    mass_1: float
    mass_2: float

    @property
    def passed(self) -> bool:
        return not any(row.violated for row in self.rows)


def gaussian_bound_check(
    lam1: EventSet,
    lam2: EventSet,
    t_grid: Sequence[float],
    spec: DiffusionSpec,
    n_paths: int,
    rng: RngLike = None,
    workers: int = 1,
) -> GaussianBoundReport:
    """Compare the pairing of Lambda_1 and Lambda_2 at each t with sqrt(mu1 mu2) exp(-d^2 / 2t)."""
    d = distance_lower_bound(lam1, lam2).as_float()
    gens = spawn_generators(rng, len(t_grid) + 2)
    mass_1, _ = estimate_mass(lam1, spec.model, n_paths, gens[0])
    mass_2, _ = estimate_mass(lam2, spec.model, n_paths, gens[1])
    rows = []
    for t, g in zip(t_grid, gens[2:]):
        est = semigroup_estimate(lam2, lam1, t, spec, n_paths, g, workers)
        bound = 0.0 if math.isinf(d) else math.sqrt(mass_1 * mass_2) * math.exp(-(d**2) / (2 * t))
        violated = est.estimate - SIGMA_GATE * est.stderr > bound
        if violated:
            logger.warning("Gaussian bound violated at t=%g: %.3g > %.3g", t, est.estimate, bound)
        rows.append(GaussianBoundRow(t, est.estimate, est.stderr, est.estimate + SIGMA_GATE * est.stderr, bound, violated))
    return GaussianBoundReport(rows, d, mass_1, mass_2)


############################################
#                                          #
#   Short-time asymptotics                 #
#                                          #
############################################


def _basis(t: np.ndarray, basis: str) -> np.ndarray:
    if basis == "linear":
        return np.column_stack([np.ones_like(t), t])
    if basis == "gaussian_tail":
        return np.column_stack([np.ones_like(t), t, t * np.log(t)])
    raise ValueError(f"Unknown extrapolation basis {basis!r}")


def extrapolate_to_zero(
    t: Sequence[float], values: Sequence[float], stderrs: Sequence[float], basis: str = "linear"
) -> tuple[float, float]:
    """Least-squares intercept at t = 0 and its standard error."""
    t_arr = np.asarray(t, dtype=float)
    design = _basis(t_arr, basis)
    if len(t_arr) < design.shape[1]:
        raise ValueError(f"Basis {basis!r} needs at least {design.shape[1]} times, got {len(t_arr)}")
    weights = np.linalg.pinv(design)[0]
    intercept = float(weights @ np.asarray(values, dtype=float))
    stderr = float(math.sqrt(np.sum((weights * np.asarray(stderrs, dtype=float)) ** 2)))
    return intercept, stderr


@dataclass(frozen=True)
class VaradhanRow:
    t: float
    value: float
    stderr: float
    estimate: float
    hits: int

    def to_dict(self) -> dict:
        return {"t": self.t, "value": self.value, "stderr": self.stderr, "estimate": self.estimate, "hits": self.hits}


@dataclass(frozen=True)
class VaradhanReport:
    rows: list[VaradhanRow]
    intercept: float
    intercept_stderr: float
    basis: str
    reference: float | None
    xi_open: bool

    def passed(self, tolerance: float) -> bool:
        if self.reference is None:
            return True
        return abs(self.intercept - self.reference) <= tolerance * self.reference + SIGMA_GATE * self.intercept_stderr


def varadhan_reference(xi: EventSet, lam: EventSet, model: PointProcessModel, n_samples: int, rng: RngLike = None) -> float | None:
    """Smallest squared distance to Xi over initial-law samples that fall in Lambda."""
    groups = sample_particle_groups(model, n_samples, rng)
    best = math.inf
    for n in sorted(groups):
        for xs in groups[n][contains_batch(lam, groups[n])]:
            d = distance_to_event(Configuration.from_points(xs, model.dim), xi).as_float()
            best = min(best, d * d)
    return None if math.isinf(best) else best


def varadhan_profile(
    xi: EventSet,
    lam: EventSet,
    t_grid: Sequence[float],
    spec: DiffusionSpec,
    n_paths: int,
    rng: RngLike = None,
    workers: int = 1,
    mode: Literal["plain", "conditioned"] = "plain",
    basis: str = "linear",
    reference_samples: int = 2000,
) -> VaradhanReport:
    """-2t log T_t over a decreasing t grid, extrapolated to t = 0."""
    t_grid = [float(t) for t in t_grid]
    if any(b >= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError(f"t_grid must be strictly decreasing, got {t_grid}")
    if not xi.is_open:
        logger.warning("Xi of kind %s is not open; the profile is informational only", xi.kind)
    gens = spawn_generators(rng, len(t_grid) + 1)
    rows = []
    for t, g in zip(t_grid, gens[1:]):
        est = semigroup_estimate(xi, lam, t, spec, n_paths, g, workers, mode)
        if est.hits < MIN_HITS:
            raise InsufficientPaths(t, est.hits)
        value = -2 * t * math.log(est.estimate)
        rows.append(VaradhanRow(t, value, 2 * t * est.stderr / est.estimate, est.estimate, est.hits))
        logger.info("Varadhan t=%g: %.6g (%d hits)", t, value, est.hits)
    intercept, se = extrapolate_to_zero([r.t for r in rows], [r.value for r in rows], [r.stderr for r in rows], basis)
    try:
        reference = varadhan_reference(xi, lam, spec.model, reference_samples, gens[0])
    except NoDistanceCertificate as e:
        logger.info("No Varadhan reference: %s", e)
        reference = None
    return VaradhanReport(rows, intercept, se, basis, reference, xi.is_open)


############################################
#                                          #
#   Square field and Rademacher            #
#                                          #
############################################


@dataclass(frozen=True)
class CarreDuChampEstimate:
    value: float
    stderr: float
    rows: list[tuple[float, float, float]]

    def to_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "rows": [list(r) for r in self.rows]}


def _variance_ratio(values_fn, gamma: Configuration, t: float, spec: DiffusionSpec, n_paths: int, g) -> tuple[float, float]:
    start = np.repeat(gamma.expanded()[None, :, :], n_paths, axis=0)
    end = advance(start, spec, spec.steps_for(t), g)
    base = values_fn(start[:1])[0]
    return mean_and_stderr((values_fn(end) - base) ** 2 / t)


def carre_du_champ_mc(
    u: "CylinderFunction | LipschitzFunction",
    gamma: Configuration,
    t_grid: Sequence[float],
    spec: DiffusionSpec,
    n_paths: int,
    rng: RngLike = None,
) -> CarreDuChampEstimate:
    """E[(u(X_t) - u(gamma))^2] / t on a grid of t, extrapolated linearly to t = 0.

    u is a cylinder function or any function with a batched evaluation over (n, k, d) arrays.
    A one-element grid returns the estimate at that t.
    """
    t_grid = [float(t) for t in t_grid]
    _check_margin(gamma, spec.geometry.window, max(t_grid))
    if isinstance(u, CylinderFunction):
        if not u.inner:
            return CarreDuChampEstimate(0.0, 0.0, [(t, 0.0, 0.0) for t in t_grid])

        def values_fn(xs: np.ndarray) -> np.ndarray:
            return eval_cylinder_batch(u, xs)

    else:
        values_fn = u.batch
    gens = spawn_generators(rng, len(t_grid))
    rows = []
    for t, g in zip(t_grid, gens):
        mean, se = _variance_ratio(values_fn, gamma, t, spec, n_paths, g)
        rows.append((t, mean, se))
    if len(rows) == 1:
        return CarreDuChampEstimate(rows[0][1], rows[0][2], rows)
    value, se = extrapolate_to_zero([r[0] for r in rows], [r[1] for r in rows], [r[2] for r in rows])
    return CarreDuChampEstimate(value, se, rows)


@dataclass(frozen=True)
class RhoCutoff:
    """scale * min(rho_{gamma_ref,U}, cap); Lipschitz with constant scale."""

    gamma_ref: Configuration
    U: Window
    cap: float
    scale: float = 1.0
    kind: Literal["rho_gamma_U"] = field(default="rho_gamma_U", init=False)

    @property
    def lip(self) -> float:
        return abs(self.scale)

    def __call__(self, gamma: Configuration) -> float:
        return self.scale * min(rho_gamma_U(gamma, self.gamma_ref, self.U).as_float(), self.cap)

    def batch(self, xs: np.ndarray) -> np.ndarray:
        return self.scale * np.minimum(batched_rho_gamma_U(xs, self.gamma_ref, self.U), self.cap)


@dataclass(frozen=True)
class ConstantFunction:
    value: float = 0.0
    kind: Literal["constant"] = field(default="constant", init=False)

    @property
    def lip(self) -> float:
        return 0.0

    def __call__(self, gamma: Configuration) -> float:
        return self.value

    def batch(self, xs: np.ndarray) -> np.ndarray:
        return np.full(len(xs), self.value)


LipschitzFunction = Union[RhoCutoff, ConstantFunction]


@dataclass(frozen=True)
class RademacherReport:
    lip: float
    max_ratio: float
    n_pairs_used: int
    max_square_field: float
    square_fields: list[float]

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.lip + 1e-9 and self.max_square_field <= self.lip**2 * 1.1

    def to_dict(self) -> dict:
        return {
            "lip": self.lip,
            "max_ratio": self.max_ratio,
            "n_pairs_used": self.n_pairs_used,
            "max_square_field": self.max_square_field,
            "passed": self.passed,
        }


def rademacher_check(
    u: LipschitzFunction,
    spec: DiffusionSpec,
    n_pairs: int,
    rng: RngLike = None,
    workers: int = 1,
    n_configs: int = 50,
    n_paths: int = 10_000,
    t: float = 0.002,
) -> RademacherReport:
    """(a) pairwise ratios |u(g) - u(e)| / d(g, e) on sampled pairs; (b) carre_du_champ_mc at a single t for sampled configurations.

    Configurations closer than BOUNDARY_SIGMAS * sqrt(t) to the walls are skipped in (b).
    """
    gen_pairs, gen_configs, gen_paths = spawn_generators(rng, 3)
    samples = sample_many(spec.model, 2 * n_pairs, gen_pairs, workers)
    max_ratio, used = 0.0, 0
    for a, b in zip(samples[::2], samples[1::2]):
        d = d_upsilon(a, b).as_float()
        if not math.isfinite(d) or d == 0:
            continue
        used += 1
        max_ratio = max(max_ratio, abs(u(a) - u(b)) / d)

    window = spec.geometry.window
    margin = BOUNDARY_SIGMAS * math.sqrt(t)
    candidates = sample_many(spec.model, 4 * n_configs, gen_configs)
    usable = [
        c for c in candidates if c.mass and float(window.distance_to_complement(c.points).min()) >= margin
    ][:n_configs]
    path_gens = spawn_generators(gen_paths, max(len(usable), 1))
    fields = [carre_du_champ_mc(u, c, [t], spec, n_paths, g).value for c, g in zip(usable, path_gens)]
    logger.info("Rademacher: max ratio %.6g over %d pairs, %d square fields", max_ratio, used, len(fields))
    return RademacherReport(u.lip, max_ratio, used, max(fields, default=0.0), fields)


############################################
#                                          #
#   Stationarity                           #
#                                          #
############################################


@dataclass(frozen=True)
class StationarityRow:
    window: int
    test: str
    statistic: float
    p_value: float
    p_adjusted: float

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "p_adjusted": self.p_adjusted,
        }


@dataclass(frozen=True)
class StationarityReport:
    rows: list[StationarityRow]
    significance: float = SIGNIFICANCE

    @property
    def passed(self) -> bool:
        return all(row.p_adjusted > self.significance for row in self.rows)


def _count_table_test(before: np.ndarray, after: np.ndarray) -> tuple[float, float]:
    """Chi-square test of homogeneity on count histograms, sparse tail bins merged."""
    top = int(max(before.max(initial=0), after.max(initial=0)))
    table = np.array([np.bincount(before, minlength=top + 1), np.bincount(after, minlength=top + 1)])
    # merge bins from the right until every expected frequency is at least 5
    while table.shape[1] > 2:
        expected = table.sum(axis=0) / 2
        if expected[-1] >= 5:
            break
        table = np.column_stack([table[:, :-2], table[:, -2:].sum(axis=1)])
    if table.shape[1] < 2 or np.any(table.sum(axis=0) == 0):
        return 0.0, 1.0
    if np.array_equal(table[0], table[1]):
        return 0.0, 1.0
    statistic, p_value, _, _ = stats.chi2_contingency(table, correction=False)
    return float(statistic), float(p_value)


def stationarity_test(
    spec: DiffusionSpec,
    horizon: float,
    statistics: Sequence[Window],
    n_chains: int,
    rng: RngLike = None,
    workers: int = 1,
    test: Literal["chi2", "ks"] = "chi2",
) -> StationarityReport:
    """Two-sample tests of window counts at time 0 against time horizon, Bonferroni-corrected."""
    if not isinstance(spec.geometry, Torus):
        raise ValueError("Stationarity is only asserted on a torus")
    if not statistics:
        raise ValueError("At least one statistic window is required")
    n_steps = 0 if horizon == 0 else spec.steps_for(horizon)

    def chunk(g: np.random.Generator, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        groups = sample_particle_groups(spec.model, k, g)
        for n in sorted(groups):
            start = groups[n]
            end = advance(start, spec, n_steps, g)
            for x0, x1 in zip(start, end):
                out.append((x0, x1))
        return out

    pairs = run_chunked(chunk, n_chains, rng, workers)
    rows = []
    for idx, region in enumerate(statistics):
        before = np.array([int(region.contains(x0).sum()) for x0, _ in pairs], dtype=np.int64)
        after = np.array([int(region.contains(x1).sum()) for _, x1 in pairs], dtype=np.int64)
        if test == "ks":
            if np.array_equal(before, after):
                statistic, p_value = 0.0, 1.0
            else:
                result = stats.ks_2samp(before, after)
                statistic, p_value = float(result.statistic), float(result.pvalue)
        else:
            statistic, p_value = _count_table_test(before, after)
        rows.append(StationarityRow(idx, test, statistic, p_value, min(1.0, p_value * len(statistics))))
    report = StationarityReport(rows)
    logger.info("Stationarity over %d chains: %s", n_chains, "pass" if report.passed else "fail")
    return report


def default_dt(t_min: float) -> float:
    return min(DEFAULT_DT, t_min / DT_PER_TMIN)

