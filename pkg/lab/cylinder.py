"""
Cylinder functions u = F(f_1*gamma, ..., f_k*gamma), their square fields and
Lipschitz diagnostics.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from config import FD_PROBES, FD_SEED, FD_STEP, FD_TOLERANCE, KINK_WIDTH
from core.errors import DimensionMismatch, InvalidTestFunction
from core.models import Box, Configuration, Window, as_points
from lab.parallel import RngLike, make_rng, mean_and_stderr
from lab.samplers import IntensityMeasure, PointProcessModel, sample_many
from lab.transport import d_upsilon

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]


def _central_differences(fn: VectorField, pts: np.ndarray, h: float) -> np.ndarray:
    """Central finite-difference gradient of a batched scalar function, shape (k, d)."""
    out = np.empty_like(pts)
    for axis in range(pts.shape[1]):
        step = np.zeros(pts.shape[1])
        step[axis] = h
        out[:, axis] = (np.asarray(fn(pts + step)) - np.asarray(fn(pts - step))) / (2 * h)
    return out


def _check_gradient(name: str, fn: VectorField, grad: VectorField, pts: np.ndarray, lip: float) -> None:
    fd = _central_differences(fn, pts, FD_STEP)
    analytic = np.asarray(grad(pts), dtype=float).reshape(pts.shape)
    err = float(np.abs(analytic - fd).max()) if len(pts) else 0.0
    if err > FD_TOLERANCE:
        raise InvalidTestFunction(f"{name}: gradient differs from finite differences by {err:.3e}")
    norms = np.linalg.norm(analytic, axis=1)
    if len(norms) and norms.max() > lip + 1e-9:
        raise InvalidTestFunction(f"{name}: gradient norm {norms.max():.6g} exceeds declared Lipschitz constant {lip}")


############################################
#                                          #
#   Test functions                         #
#                                          #
############################################


@dataclass(frozen=True)
class SmoothTestFunction:
    """Compactly supported C^1 function on R^d with a user-supplied gradient.

    Construction checks the gradient against central finite differences on
    random points, the Lipschitz bound, and vanishing outside the support.
    """

    value: VectorField
    gradient: VectorField
    support: Window
    lip_const: float
    name: str = "f"
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.lip_const < 0:
            raise InvalidTestFunction(f"{self.name}: Lipschitz constant must be nonnegative")
        if self.validate:
            self._validate()

    @property
    def dim(self) -> int:
        return self.support.dim

    def __call__(self, xs) -> np.ndarray:
        return np.asarray(self.value(as_points(xs, self.dim)), dtype=float)

    def grad(self, xs) -> np.ndarray:
        pts = as_points(xs, self.dim)
        return np.asarray(self.gradient(pts), dtype=float).reshape(pts.shape)

    def _validate(self) -> None:
        rng = np.random.default_rng(FD_SEED)
        box = self.support.bounding_box()
        inside = box.sample_uniform(rng, FD_PROBES)
        _check_gradient(self.name, self.value, self.gradient, inside, self.lip_const)

        size = box.hi_array - box.lo_array
        wide = Box(tuple(box.lo_array - 0.5 * size), tuple(box.hi_array + 0.5 * size))
        probes = wide.sample_uniform(rng, 4 * FD_PROBES)
        outside = probes[~self.support.contains(probes)]
        if len(outside):
            vals = np.abs(np.asarray(self.value(outside))).max()
            grads = np.abs(np.asarray(self.gradient(outside))).max()
            if vals > 1e-12 or grads > 1e-12:
                raise InvalidTestFunction(f"{self.name}: nonzero value or gradient outside the declared support")


@dataclass(frozen=True)
class OuterFunction:
    """Smooth F: R^k -> R with gradient, declared sup|F| and Lipschitz constant."""

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    arity: int
    sup_bound: float
    lip_const: float
    name: str = "F"
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.arity < 1:
            raise InvalidTestFunction(f"{self.name}: arity must be >= 1")
        if self.validate:
            rng = np.random.default_rng(FD_SEED)
            pts = rng.uniform(-5.0, 5.0, size=(FD_PROBES, self.arity))

            def batched_value(a):
                return np.array([self.value(row) for row in a])

            def batched_grad(a):
                return np.array([self.gradient(row) for row in a])

            _check_gradient(self.name, batched_value, batched_grad, pts, self.lip_const)

    def __call__(self, a) -> float:
        return float(self.value(np.asarray(a, dtype=float)))

    def grad(self, a) -> np.ndarray:
        return np.asarray(self.gradient(np.asarray(a, dtype=float)), dtype=float).reshape(self.arity)


@dataclass(frozen=True)
class CylinderFunction:
    """u(gamma) = outer(f_1*gamma, ..., f_k*gamma); with k = 0 it is the constant."""

    outer: OuterFunction | None
    inner: tuple[SmoothTestFunction, ...] = ()
    constant: float = 0.0
    name: str = "u"

    def __post_init__(self):
        object.__setattr__(self, "inner", tuple(self.inner))
        if self.inner:
            if self.outer is None or self.outer.arity != len(self.inner):
                raise ValueError(f"{self.name}: outer arity must equal the number of inner functions")
            dims = {f.dim for f in self.inner}
            if len(dims) != 1:
                raise DimensionMismatch(min(dims), max(dims))

    @classmethod
    def constant_function(cls, c: float, name: str = "constant") -> "CylinderFunction":
        return cls(None, (), float(c), name)

    @property
    def k(self) -> int:
        return len(self.inner)

    @property
    def dim(self) -> int | None:
        return self.inner[0].dim if self.inner else None

    def support_box(self) -> Box | None:
        """Smallest box containing every inner support."""
        if not self.inner:
            return None
        boxes = [f.support.bounding_box() for f in self.inner]
        lo = np.min([b.lo_array for b in boxes], axis=0)
        hi = np.max([b.hi_array for b in boxes], axis=0)
        return Box(tuple(lo), tuple(hi))

    def __call__(self, gamma: Configuration) -> float:
        return eval_cylinder(self, gamma)


# ============================================================================
# EVALUATION AND SQUARE FIELDS
# ============================================================================


def eval_star(f: SmoothTestFunction, gamma: Configuration) -> float:
    """f*gamma = sum over atoms of m_x f(x)."""
    if gamma.dim != f.dim:
        raise DimensionMismatch(gamma.dim, f.dim)
    if gamma.n_atoms == 0:
        return 0.0
    return float(np.dot(f(gamma.points), gamma.multiplicities))


def star_values(u: CylinderFunction, gamma: Configuration) -> np.ndarray:
    return np.array([eval_star(f, gamma) for f in u.inner])


def eval_cylinder(u: CylinderFunction, gamma: Configuration) -> float:
    if not u.inner:
        return u.constant
    return u.outer(star_values(u, gamma)) + u.constant


def eval_cylinder_batch(u: CylinderFunction, xs: np.ndarray) -> np.ndarray:
    """u at every particle array of a (P, n, d) stack (unit mass per row)."""
    n_batch, n, dim = xs.shape
    if not u.inner:
        return np.full(n_batch, u.constant)
    flat = xs.reshape(-1, dim)
    stars = np.stack([f(flat).reshape(n_batch, n).sum(axis=1) for f in u.inner], axis=1)
    return np.array([u.outer(row) for row in stars]) + u.constant


def _inner_gradients(u: CylinderFunction, gamma: Configuration) -> np.ndarray:
    """Gradients of the inner functions at every atom, shape (k, n_atoms, d)."""
    return np.stack([f.grad(gamma.points) for f in u.inner])


def square_field_base(f: SmoothTestFunction, g: SmoothTestFunction, x) -> float:
    """grad f(x) . grad g(x)"""
    return float(np.dot(f.grad(x)[0], g.grad(x)[0]))


def square_field_lifted(u: CylinderFunction, v: CylinderFunction, gamma: Configuration) -> float:
    """Chain-rule form: sum_ij dF_i dG_j * (grad f_i . grad g_j)*gamma."""
    if not u.inner or not v.inner or gamma.n_atoms == 0:
        return 0.0
    a = u.outer.grad(star_values(u, gamma))
    b = v.outer.grad(star_values(v, gamma))
    df = _inner_gradients(u, gamma)
    dg = _inner_gradients(v, gamma)
    gram = np.einsum("ixd,jxd,x->ij", df, dg, gamma.multiplicities.astype(float))
    return float(a @ gram @ b)


def square_field_atomwise(u: CylinderFunction, v: CylinderFunction, gamma: Configuration) -> float:
    """Per-atom form: relocate each atom's full mass to y and differentiate in y at y = x.

    The derivative of y -> u(gamma with x's mass moved to y) is
    m_x * sum_i dF_i * grad f_i(x); the contributions are weighted by 1/m_x.
    """
    if not u.inner or not v.inner or gamma.n_atoms == 0:
        return 0.0
    a = u.outer.grad(star_values(u, gamma))
    b = v.outer.grad(star_values(v, gamma))
    df = _inner_gradients(u, gamma)
    dg = _inner_gradients(v, gamma)
    total = 0.0
    for idx, mass in enumerate(gamma.multiplicities):
        grad_u = mass * (a @ df[:, idx, :])
        grad_v = mass * (b @ dg[:, idx, :])
        total += float(grad_u @ grad_v) / mass
    return total


def local_lipschitz_bound(u: CylinderFunction, n: int) -> float:
    """sqrt(n) * sqrt(2k) * Lip(F) * max_i Lip(f_i), valid for configurations with at most n atoms in the support box."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if not u.inner:
        return 0.0
    c_u = math.sqrt(2) * math.sqrt(u.k) * u.outer.lip_const * max(f.lip_const for f in u.inner)
    return math.sqrt(n) * c_u


def slope_estimate(
    u: CylinderFunction,
    gamma: Configuration,
    radii: Sequence[float],
    probes_per_radius: int = 50,
    rng: RngLike = None,
) -> float:
    """Largest observed |u(gamma) - u(eta)| / d(gamma, eta) over probes eta near gamma, at the smallest radius.

    Probes move every atom (with its full multiplicity) by a random vector,
    plus one probe along the configuration gradient of u, scaled so that
    sqrt(sum_x m_x |v_x|^2) = r.
    """
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError(f"radii must be positive and strictly decreasing, got {radii}")
    if not u.inner or gamma.n_atoms == 0:
        return 0.0
    rng = make_rng(rng)
    base = eval_cylinder(u, gamma)
    weights = np.sqrt(gamma.multiplicities.astype(float))[:, None]
    a = u.outer.grad(star_values(u, gamma))
    grad_dir = np.einsum("i,ixd->xd", a, _inner_gradients(u, gamma))

    estimate = 0.0
    for r in radii:
        directions = [rng.standard_normal(gamma.points.shape) for _ in range(probes_per_radius)]
        directions.append(grad_dir)
        estimate = 0.0
        for v in directions:
            norm = float(np.linalg.norm(weights * v))
            if norm == 0:
                continue
            eta = Configuration.from_atoms(gamma.points + v * (r / norm), gamma.multiplicities, gamma.dim)
            dist = d_upsilon(gamma, eta).as_float()
            if dist > 0:
                estimate = max(estimate, abs(eval_cylinder(u, eta) - base) / dist)
        logger.debug("Slope estimate at radius %.3g: %.6g", r, estimate)
    return estimate


@dataclass(frozen=True)
class EnergyEstimate:
    estimate: float
    stderr: float
    n_samples: int

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr, "n_samples": self.n_samples}


def energy_monte_carlo(
    u: CylinderFunction,
    v: CylinderFunction,
    model: PointProcessModel,
    n_samples: int,
    rng: RngLike = None,
    workers: int = 1,
) -> EnergyEstimate:
    """Monte Carlo mean of the lifted square field under the model, symmetric in (u, v)."""
    samples = sample_many(model, n_samples, rng, workers)
    values = [0.5 * (square_field_lifted(u, v, c) + square_field_lifted(v, u, c)) for c in samples]
    estimate, stderr = mean_and_stderr(values)
    return EnergyEstimate(estimate, stderr, n_samples)


def base_energy_quadrature(f: SmoothTestFunction, m: IntensityMeasure) -> float:
    """Integral of |grad f|^2 dm by midpoint quadrature."""
    return m.integrate(lambda xs: np.einsum("ij,ij->i", f.grad(xs), f.grad(xs)))


############################################
#                                          #
#   Built-in shapes                        #
#                                          #
############################################


def _bump_profile(q: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - q)) for q < 1, else 0 (q = r^2 / R^2)."""
    out = np.zeros_like(q)
    mask = q < 1
    out[mask] = np.exp(1.0 - 1.0 / (1.0 - q[mask]))
    return out


def _bump_radial_lipschitz(height: float, radius: float) -> float:
    r = np.linspace(0.0, radius, 20001, endpoint=False)
    q = (r / radius) ** 2
    slope = _bump_profile(q) * (2 * r / radius**2) / (1 - q) ** 2
    return float(height * slope.max() * (1 + 1e-6))


def smooth_bump(center: Sequence[float], radius: float, height: float = 1.0, name: str = "bump") -> SmoothTestFunction:
    """height * exp(1 - 1/(1 - |x - c|^2/R^2)) inside the ball, zero outside; equals height at c."""
    c = np.asarray(center, dtype=float)

    def value(xs):
        q = np.einsum("ij,ij->i", xs - c, xs - c) / radius**2
        return height * _bump_profile(q)

    def gradient(xs):
        diff = xs - c
        q = np.einsum("ij,ij->i", diff, diff) / radius**2
        psi = _bump_profile(q)
        scale = np.zeros_like(q)
        mask = q < 1
        scale[mask] = -psi[mask] * 2.0 / (radius**2 * (1 - q[mask]) ** 2)
        return height * scale[:, None] * diff

    box = Box(tuple(c - radius), tuple(c + radius))
    return SmoothTestFunction(value, gradient, box, _bump_radial_lipschitz(height, radius), name)


def coordinate_bump(center: Sequence[float], radius: float, axis: int = 0, name: str = "coordinate_bump") -> SmoothTestFunction:
    """(x_axis - c_axis) times the unit bump: gradient e_axis at the center."""
    c = np.asarray(center, dtype=float)
    bump = smooth_bump(center, radius, 1.0)
    if not 0 <= axis < len(c):
        raise ValueError(f"axis {axis} out of range for dimension {len(c)}")

    def value(xs):
        return (xs[:, axis] - c[axis]) * bump.value(xs)

    def gradient(xs):
        g = (xs[:, axis] - c[axis])[:, None] * bump.gradient(xs)
        g[:, axis] += bump.value(xs)
        return g

    return SmoothTestFunction(value, gradient, bump.support, 1.0 + radius * bump.lip_const, name)


def _smoothed_abs(t: np.ndarray, width: float) -> np.ndarray:
    """|t| with a C^2 quartic blend on |t| < width."""
    inner = 3 * width / 8 + 3 * t**2 / (4 * width) - t**4 / (8 * width**3)
    return np.where(np.abs(t) < width, inner, np.abs(t))


def _smoothed_abs_derivative(t: np.ndarray, width: float) -> np.ndarray:
    inner = 3 * t / (2 * width) - t**3 / (2 * width**3)
    return np.where(np.abs(t) < width, inner, np.sign(t))


def kinked_function(
    kinks: Sequence[tuple[float, float]], support: Box, width: float = KINK_WIDTH, name: str = "tent"
) -> SmoothTestFunction:
    """Piecewise-linear function on R, sum of (jump/2) * |x - position|, smoothed at each kink.

    The jumps (slope changes) must sum to zero, as must jump * position, so the
    function vanishes far away.
    """
    positions = np.array([p for p, _ in kinks], dtype=float)
    jumps = np.array([j for _, j in kinks], dtype=float)
    if abs(jumps.sum()) > 1e-12 or abs((jumps * positions).sum()) > 1e-12:
        raise InvalidTestFunction(f"{name}: kinks do not describe a compactly supported function")
    if support.dim != 1:
        raise DimensionMismatch(support.dim, 1)
    gaps = np.diff(np.sort(positions))
    if len(gaps) and gaps.min() <= 2 * width:
        raise InvalidTestFunction(f"{name}: kinks closer than the smoothing width")

    # slopes between kinks; the smoothed slope stays between neighbours
    order = np.argsort(positions)
    slopes = np.concatenate([[0.0], np.cumsum(jumps[order])])
    lip = float(np.abs(slopes).max())

    def value(xs):
        t = np.asarray(xs, dtype=float)[:, :1] - positions[None, :]
        return (0.5 * jumps[None, :] * _smoothed_abs(t, width)).sum(axis=1)

    def gradient(xs):
        t = np.asarray(xs, dtype=float)[:, :1] - positions[None, :]
        return (0.5 * jumps[None, :] * _smoothed_abs_derivative(t, width)).sum(axis=1)[:, None]

    return SmoothTestFunction(value, gradient, support, lip, name)


NONLIP_TENT_KINKS = ((-3.0, -1.0), (-2.5, 2.0), (-1.0, -2.0), (0.0, 2.0), (1.0, -2.0), (2.5, 2.0), (3.0, -1.0))


def nonlip_tent(width: float = KINK_WIDTH) -> SmoothTestFunction:
    """Even tent on [-3, 3]: 1 at +-1, 0 at 0 and +-2, -1/2 at +-2.5, with f = 2 - |x| on 1 <= |x| <= 2.5."""
    return kinked_function(NONLIP_TENT_KINKS, Box((-3.1,), (3.1,)), width, "nonlip_tent")


def arctan_outer(scale: float = 1.0) -> OuterFunction:
    return OuterFunction(
        lambda a: math.atan(scale * a[0]),
        lambda a: np.array([scale / (1 + (scale * a[0]) ** 2)]),
        1,
        math.pi / 2,
        abs(scale),
        "arctan",
    )


def linear_outer(weights: Sequence[float]) -> OuterFunction:
    w = np.asarray(weights, dtype=float)
    return OuterFunction(lambda a: float(w @ a), lambda a: w.copy(), len(w), math.inf, float(np.linalg.norm(w)), "linear")


def tanh_outer(weights: Sequence[float]) -> OuterFunction:
    w = np.asarray(weights, dtype=float)
    return OuterFunction(
        lambda a: math.tanh(float(w @ a)),
        lambda a: w / math.cosh(float(w @ a)) ** 2,
        len(w),
        1.0,
        float(np.linalg.norm(w)),
        "tanh",
    )


def gaussian_outer(arity: int) -> OuterFunction:
    return OuterFunction(
        lambda a: math.exp(-0.5 * float(a @ a)),
        lambda a: -a * math.exp(-0.5 * float(a @ a)),
        arity,
        1.0,
        math.exp(-0.5),
        "gaussian",
    )


@dataclass(frozen=True)
class NonLipschitzInstance:
    u: CylinderFunction
    gamma: Configuration
    lower_bound: float


def nonlip_example(epsilon: float, n: int, width: float = KINK_WIDTH) -> NonLipschitzInstance:
    """arctan of the tent functional, with n points where the tent is at most epsilon.

    The square field at gamma is at least n / (1 + epsilon^2 n^2)^2.
    """
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    f = nonlip_tent(width)
    u = CylinderFunction(arctan_outer(), (f,), name="nonlip_tent")
    lo = 2.0 - epsilon + min(epsilon / 2, 2 * width)
    gamma = Configuration.from_points(np.linspace(lo, 2.0, n)[:, None], 1)
    return NonLipschitzInstance(u, gamma, n / (1 + epsilon**2 * n**2) ** 2)
