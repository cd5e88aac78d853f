"""
Named built-ins with pydantic parameter schemas.

Every schema carries a `kind` discriminator and a `build()` method returning the
runtime object, so run configs can declare models, events and functions by
name and parameters.
"""

from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import KINK_WIDTH, MCMC_BURN_IN, MCMC_PROPOSAL_MIX, MCMC_THINNING
from core.models import BallSpec, Box, BoxSpec, ConfigurationFile, WindowSpec
from core.point_config import ConcentrationMode, configuration_from_model
from lab import cylinder, events, potentials, samplers
from lab.diffusion_lab import ConstantFunction, DiffusionSpec, ReflectingBox, RhoCutoff, Torus, default_dt


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid")


############################################
#                                          #
#   Test and outer functions               #
#                                          #
############################################


class BumpSpec(_Spec):
    """Smooth bump exp(1 - 1/(1 - r^2/R^2)) scaled by height"""

    kind: Literal["bump"] = "bump"
    center: list[float] = Field(min_length=1)
    radius: float = Field(1.5, ge=1.5, description="Support radius")
    height: float = Field(1.0, gt=0, le=2)

    def build(self) -> cylinder.SmoothTestFunction:
        return cylinder.smooth_bump(self.center, self.radius, self.height)


class CoordinateBumpSpec(_Spec):
    """(x_axis - c_axis) times the unit bump"""

    kind: Literal["coordinate_bump"] = "coordinate_bump"
    center: list[float] = Field(min_length=1)
    radius: float = Field(1.5, ge=1.5)
    axis: int = Field(0, ge=0)

    def build(self) -> cylinder.SmoothTestFunction:
        return cylinder.coordinate_bump(self.center, self.radius, self.axis)


class NonlipTentSpec(_Spec):
    """Smoothed tent on [-3, 3] behind the non-Lipschitz cylinder function"""

    kind: Literal["nonlip_tent"] = "nonlip_tent"
    width: float = Field(KINK_WIDTH, gt=0, le=0.2, description="Half-width of the smoothing at each kink")

    def build(self) -> cylinder.SmoothTestFunction:
        return cylinder.nonlip_tent(self.width)


class KinkedSpec(_Spec):
    """Piecewise-linear function on R given by (position, slope change) kinks"""

    kind: Literal["kinked"] = "kinked"
    kinks: list[tuple[float, float]] = Field(min_length=2)
    lo: float
    hi: float
    width: float = Field(KINK_WIDTH, gt=0)

    def build(self) -> cylinder.SmoothTestFunction:
        return cylinder.kinked_function(self.kinks, Box((self.lo,), (self.hi,)), self.width)


TestFunctionSpec = Annotated[
    Union[BumpSpec, CoordinateBumpSpec, NonlipTentSpec, KinkedSpec], Field(discriminator="kind")
]


class LinearOuterSpec(_Spec):
    """F(a) = w . a"""

    kind: Literal["linear"] = "linear"
    weights: list[float] = Field(min_length=1)

    def build(self) -> cylinder.OuterFunction:
        return cylinder.linear_outer(self.weights)


class ArctanOuterSpec(_Spec):
    """F(a) = arctan(scale * a)"""

    kind: Literal["arctan"] = "arctan"
    scale: float = 1.0

    def build(self) -> cylinder.OuterFunction:
        return cylinder.arctan_outer(self.scale)


class TanhOuterSpec(_Spec):
    """F(a) = tanh(w . a)"""

    kind: Literal["tanh"] = "tanh"
    weights: list[float] = Field(min_length=1)

    def build(self) -> cylinder.OuterFunction:
        return cylinder.tanh_outer(self.weights)


class GaussianOuterSpec(_Spec):
    """F(a) = exp(-|a|^2 / 2)"""

    kind: Literal["gaussian"] = "gaussian"
    arity: int = Field(1, ge=1)

    def build(self) -> cylinder.OuterFunction:
        return cylinder.gaussian_outer(self.arity)


OuterSpec = Annotated[
    Union[LinearOuterSpec, ArctanOuterSpec, TanhOuterSpec, GaussianOuterSpec], Field(discriminator="kind")
]


class CylinderSpec(_Spec):
    """u = F(f_1*gamma, ..., f_k*gamma) + constant; no inner functions means the constant"""

    outer: OuterSpec | None = None
    inner: list[TestFunctionSpec] = Field(default_factory=list)
    constant: float = 0.0
    name: str = "u"

    def build(self) -> cylinder.CylinderFunction:
        if not self.inner:
            return cylinder.CylinderFunction.constant_function(self.constant, self.name)
        if self.outer is None:
            raise ValueError(f"{self.name}: an outer function is required with inner functions")
        inner = tuple(f.build() for f in self.inner)
        return cylinder.CylinderFunction(self.outer.build(), inner, self.constant, self.name)


############################################
#                                          #
#   Measures, potentials and models        #
#                                          #
############################################


class IntensitySpec(_Spec):
    """Reference measure: intensity times Lebesgue on the window, optionally restricted to a union of windows"""

    window: WindowSpec
    intensity: float = Field(1.0, gt=0)
    support: list[WindowSpec] | None = Field(None, description="Density is the indicator of the union of these")

    def build(self) -> samplers.IntensityMeasure:
        window = self.window.build()
        if not self.support:
            return samplers.IntensityMeasure.uniform(window, self.intensity)
        parts = [s.build() for s in self.support]

        def density(xs):
            return np.any([p.contains(xs) for p in parts], axis=0).astype(float)

        return samplers.IntensityMeasure.with_density(window, density, 1.0, self.intensity)


class ZeroFreeSpec(_Spec):
    """No free potential"""

    kind: Literal["zero"] = "zero"

    def build(self) -> potentials.FreePotential:
        return potentials.ZeroFree()


class HarmonicSpec(_Spec):
    """strength/2 * |x - center|^2"""

    kind: Literal["harmonic"] = "harmonic"
    strength: float = Field(gt=0)
    center: list[float] = Field(min_length=1)

    def build(self) -> potentials.FreePotential:
        return potentials.Harmonic(self.strength, tuple(self.center))


class LinearFreeSpec(_Spec):
    """Linear potential <coefficients, x>"""

    kind: Literal["linear"] = "linear"
    coefficients: list[float] = Field(min_length=1)

    def build(self) -> potentials.FreePotential:
        return potentials.Linear(tuple(self.coefficients))


class PeriodicWellSpec(_Spec):
    """strength * sum_k (1 - cos(2 pi x_k / period)); fits a torus of that period"""

    kind: Literal["periodic_well"] = "periodic_well"
    strength: float
    period: float = Field(gt=0)

    def build(self) -> potentials.FreePotential:
        return potentials.PeriodicWell(self.strength, self.period)


FreePotentialSpec = Annotated[
    Union[ZeroFreeSpec, HarmonicSpec, LinearFreeSpec, PeriodicWellSpec], Field(discriminator="kind")
]


class ZeroPairSpec(_Spec):
    """No pair interaction"""

    kind: Literal["zero"] = "zero"

    def build(self) -> potentials.PairPotential:
        return potentials.ZeroPair()


class HardCoreSpec(_Spec):
    """Infinite energy below the core radius, zero above"""

    kind: Literal["hard_core"] = "hard_core"
    radius: float = Field(gt=0)

    def build(self) -> potentials.PairPotential:
        return potentials.HardCore(self.radius)


class StraussSpec(_Spec):
    """strength below the interaction radius, zero above"""

    kind: Literal["strauss"] = "strauss"
    strength: float = Field(ge=0)
    radius: float = Field(gt=0)

    def build(self) -> potentials.PairPotential:
        return potentials.Strauss(self.strength, self.radius)


class GaussianRepulsionSpec(_Spec):
    """strength * exp(-r^2 / (2 scale^2))"""

    kind: Literal["gaussian"] = "gaussian"
    strength: float
    scale: float = Field(gt=0)

    def build(self) -> potentials.PairPotential:
        return potentials.GaussianRepulsion(self.strength, self.scale)


class LinearDistanceSpec(_Spec):
    """strength * r"""

    kind: Literal["linear_distance"] = "linear_distance"
    strength: float = 1.0

    def build(self) -> potentials.PairPotential:
        return potentials.LinearDistance(self.strength)


PairPotentialSpec = Annotated[
    Union[ZeroPairSpec, HardCoreSpec, StraussSpec, GaussianRepulsionSpec, LinearDistanceSpec],
    Field(discriminator="kind"),
]


class MCMCSpec(_Spec):
    burn_in: int = Field(MCMC_BURN_IN, ge=1)
    thinning: int = Field(MCMC_THINNING, ge=1)
    proposal_mix: tuple[float, float, float] = MCMC_PROPOSAL_MIX
    move_scale: float | None = Field(None, gt=0)

    def build(self) -> samplers.MCMCParams:
        return samplers.MCMCParams(self.burn_in, self.thinning, self.proposal_mix, self.move_scale)


class PoissonSpec(_Spec):
    """Poisson point process with intensity measure m"""

    kind: Literal["poisson"] = "poisson"
    m: IntensitySpec

    def build(self) -> samplers.PoissonModel:
        return samplers.PoissonModel(self.m.build())


class MixedPoissonSpec(_Spec):
    """Poisson with intensity s*m, s drawn from a finite law"""

    kind: Literal["mixed_poisson"] = "mixed_poisson"
    m: IntensitySpec
    levy_values: list[float] = Field(min_length=1)
    levy_weights: list[float] = Field(min_length=1)

    def build(self) -> samplers.MixedPoissonModel:
        return samplers.MixedPoissonModel(self.m.build(), tuple(self.levy_values), tuple(self.levy_weights))


class GibbsSpec(_Spec):
    """Finite-volume Gibbs law exp(-H) d(Poisson), sampled by birth-death-move Metropolis-Hastings"""

    kind: Literal["gibbs"] = "gibbs"
    m: IntensitySpec
    phi: FreePotentialSpec = Field(default_factory=ZeroFreeSpec)
    psi: PairPotentialSpec = Field(default_factory=ZeroPairSpec)
    mcmc: MCMCSpec = Field(default_factory=MCMCSpec)

    def build(self) -> samplers.GibbsModel:
        return samplers.GibbsModel(self.m.build(), self.phi.build(), self.psi.build(), self.mcmc.build())


class GinibreSpec(_Spec):
    """Eigenvalues of an n x n complex Ginibre matrix"""

    kind: Literal["ginibre"] = "ginibre"
    n: int = Field(ge=1)

    def build(self) -> samplers.GinibreModel:
        return samplers.GinibreModel(self.n)


class BinomialSpec(_Spec):
    """Exactly n i.i.d. points from m normalised"""

    kind: Literal["binomial"] = "binomial"
    m: IntensitySpec
    n: int = Field(ge=0)

    def build(self) -> samplers.BinomialModel:
        return samplers.BinomialModel(self.m.build(), self.n)


ModelSpec = Annotated[
    Union[PoissonSpec, MixedPoissonSpec, GibbsSpec, GinibreSpec, BinomialSpec], Field(discriminator="kind")
]


############################################
#                                          #
#   Event sets and Lipschitz functions     #
#                                          #
############################################


class WholeSpaceSpec(_Spec):
    """Every configuration"""

    kind: Literal["whole_space"] = "whole_space"

    def build(self) -> events.WholeSpace:
        return events.WholeSpace()


class ConcentrationSpec(_Spec):
    """{gamma(E) = n}, {>= n} or {<= n}"""

    kind: Literal["concentration"] = "concentration"
    region: WindowSpec
    n: int = Field(ge=0)
    mode: ConcentrationMode = ConcentrationMode.EQ

    def build(self) -> events.Concentration:
        return events.Concentration(self.region.build(), self.n, self.mode)


class LambdaSetSpec(_Spec):
    """{eta : eta_U = gamma_U} for an open window U"""

    kind: Literal["lambda_set"] = "lambda_set"
    gamma_ref: ConfigurationFile
    U: WindowSpec

    def build(self) -> events.LambdaSet:
        return events.LambdaSet(configuration_from_model(self.gamma_ref), self.U.build())


class DistanceBallSpec(_Spec):
    """Open ball of configurations around a center"""

    kind: Literal["distance_ball"] = "distance_ball"
    center: ConfigurationFile
    radius: float = Field(gt=0)

    def build(self) -> events.DistanceBall:
        return events.DistanceBall(configuration_from_model(self.center), self.radius)


class RhoBallSpec(_Spec):
    """Open neighbourhood {rho_{gamma,U} < radius} of a Lambda set"""

    kind: Literal["rho_ball"] = "rho_ball"
    gamma_ref: ConfigurationFile
    U: WindowSpec
    radius: float = Field(gt=0)

    def build(self) -> events.RhoBall:
        return events.RhoBall(configuration_from_model(self.gamma_ref), self.U.build(), self.radius)


EventSpec = Annotated[
    Union[WholeSpaceSpec, ConcentrationSpec, LambdaSetSpec, DistanceBallSpec, RhoBallSpec],
    Field(discriminator="kind"),
]


class RhoCutoffSpec(_Spec):
    """scale * min(rho_{gamma_ref,U}, cap): Lipschitz with constant |scale|"""

    kind: Literal["rho_gamma_U"] = "rho_gamma_U"
    gamma_ref: ConfigurationFile
    U: WindowSpec
    cap: float = Field(1.0, gt=0)
    scale: float = 1.0

    def build(self) -> RhoCutoff:
        return RhoCutoff(configuration_from_model(self.gamma_ref), self.U.build(), self.cap, self.scale)


class ConstantLipschitzSpec(_Spec):
    """A constant function (Lipschitz constant 0)"""

    kind: Literal["constant"] = "constant"
    value: float = 0.0

    def build(self) -> ConstantFunction:
        return ConstantFunction(self.value)


LipschitzSpec = Annotated[Union[RhoCutoffSpec, ConstantLipschitzSpec], Field(discriminator="kind")]


############################################
#                                          #
#   Identity-check functionals             #
#                                          #
############################################


class ZeroFunctionalSpec(_Spec):
    """The zero functional"""

    kind: Literal["zero"] = "zero"

    def build(self) -> samplers.MeckeFunctional:
        return samplers.ZeroFunctional()


class IndicatorFunctionalSpec(_Spec):
    """1_E(x)"""

    kind: Literal["indicator"] = "indicator"
    region: WindowSpec

    def build(self) -> samplers.MeckeFunctional:
        return samplers.IndicatorFunctional(self.region.build())


class CountEqualsSpec(_Spec):
    """1_E(x) * 1{gamma(E) = k}"""

    kind: Literal["count_equals"] = "count_equals"
    region: WindowSpec
    k: int = Field(ge=0)

    def build(self) -> samplers.MeckeFunctional:
        return samplers.CountEqualsFunctional(self.region.build(), self.k)


class CountWeightedSpec(_Spec):
    """1_E(x) * gamma(E)"""

    kind: Literal["count_weighted"] = "count_weighted"
    region: WindowSpec

    def build(self) -> samplers.MeckeFunctional:
        return samplers.CountWeightedFunctional(self.region.build())


class IsolatedPointSpec(_Spec):
    """1_E(x) * 1{x has no other point within radius}"""

    kind: Literal["isolated_point"] = "isolated_point"
    region: WindowSpec
    radius: float = Field(gt=0)

    def build(self) -> samplers.MeckeFunctional:
        return samplers.IsolatedPointFunctional(self.region.build(), self.radius)


class GaussianDecaySpec(_Spec):
    """Gaussian in x damped by exp(-rate * gamma(E))"""

    kind: Literal["gaussian_decay"] = "gaussian_decay"
    region: WindowSpec
    center: list[float] = Field(min_length=1)
    rate: float = Field(0.5, ge=0)

    def build(self) -> samplers.MeckeFunctional:
        return samplers.GaussianDecayFunctional(self.region.build(), tuple(self.center), self.rate)


MeckeSpec = Annotated[
    Union[
        ZeroFunctionalSpec, IndicatorFunctionalSpec, CountEqualsSpec, CountWeightedSpec, IsolatedPointSpec, GaussianDecaySpec
    ],
    Field(discriminator="kind"),
]


class ConstantOnRegionSpec(_Spec):
    """c * 1_E"""

    kind: Literal["constant_on_region"] = "constant_on_region"
    region: WindowSpec
    c: float = Field(ge=0)

    def build(self) -> samplers.LaplaceFunction:
        return samplers.ConstantOnRegion(self.region.build(), self.c)


class GaussianBumpLaplaceSpec(_Spec):
    """height * exp(-|x - center|^2 / (2 scale^2))"""

    kind: Literal["gaussian_bump"] = "gaussian_bump"
    center: list[float] = Field(min_length=1)
    height: float = Field(ge=0)
    scale: float = Field(gt=0)

    def build(self) -> samplers.LaplaceFunction:
        return samplers.GaussianBumpLaplace(tuple(self.center), self.height, self.scale)


LaplaceSpec = Annotated[Union[ConstantOnRegionSpec, GaussianBumpLaplaceSpec], Field(discriminator="kind")]


############################################
#                                          #
#   Dynamics                               #
#                                          #
############################################


class ReflectingBoxSpec(_Spec):
    """Particles reflected at the walls of a box"""

    kind: Literal["reflecting_box"] = "reflecting_box"
    window: BoxSpec

    def build(self) -> ReflectingBox:
        return ReflectingBox(self.window.build())


class TorusSpec(_Spec):
    """Periodic box [origin, origin + period)"""

    kind: Literal["torus"] = "torus"
    period: list[float] = Field(min_length=1)
    origin: list[float] | None = None

    def build(self) -> Torus:
        return Torus(tuple(self.period), None if self.origin is None else tuple(self.origin))


GeometrySpec = Annotated[Union[ReflectingBoxSpec, TorusSpec], Field(discriminator="kind")]


class DiffusionSpecModel(_Spec):
    """Initial law, drift potentials (from a Gibbs model) and geometry of the particle dynamics"""

    model: ModelSpec
    geometry: GeometrySpec
    dt: float | None = Field(None, gt=0, description="Defaults to min(1e-3, t_min / 50)")
    horizon: float = Field(1.0, gt=0)
    drift_sign: float = Field(1.0, description="-1 reverses the drift (negative control)")

    def build(self, t_min: float | None = None) -> DiffusionSpec:
        dt = self.dt if self.dt is not None else default_dt(t_min if t_min is not None else self.horizon)
        return DiffusionSpec(self.model.build(), self.geometry.build(), dt, self.horizon, self.drift_sign)


############################################
#                                          #
#   Catalog                                #
#                                          #
############################################

CATALOG: dict[str, tuple[type[BaseModel], ...]] = {
    "test_functions": (BumpSpec, CoordinateBumpSpec, NonlipTentSpec, KinkedSpec),
    "outer_functions": (LinearOuterSpec, ArctanOuterSpec, TanhOuterSpec, GaussianOuterSpec),
    "models": (PoissonSpec, MixedPoissonSpec, GibbsSpec, GinibreSpec, BinomialSpec),
    "free_potentials": (ZeroFreeSpec, HarmonicSpec, LinearFreeSpec, PeriodicWellSpec),
    "pair_potentials": (ZeroPairSpec, HardCoreSpec, StraussSpec, GaussianRepulsionSpec, LinearDistanceSpec),
    "event_sets": (WholeSpaceSpec, ConcentrationSpec, LambdaSetSpec, DistanceBallSpec, RhoBallSpec),
    "lipschitz_functions": (RhoCutoffSpec, ConstantLipschitzSpec),
    "mecke_functionals": (
        ZeroFunctionalSpec,
        IndicatorFunctionalSpec,
        CountEqualsSpec,
        CountWeightedSpec,
        IsolatedPointSpec,
        GaussianDecaySpec,
    ),
    "laplace_functions": (ConstantOnRegionSpec, GaussianBumpLaplaceSpec),
    "windows": (BoxSpec, BallSpec),
    "geometries": (ReflectingBoxSpec, TorusSpec),
}


def builtin_name(spec: type[BaseModel]) -> str:
    return spec.model_fields["kind"].default


def list_builtins() -> dict[str, dict[str, dict]]:
    """Names, one-line descriptions and JSON schemas of every built-in, by category."""
    catalog = {}
    for category, specs in CATALOG.items():
        catalog[category] = {
            builtin_name(spec): {
                "description": spec.__doc__.strip().splitlines()[0] if spec.__doc__ else "",
                "schema": spec.model_json_schema(),
            }
            for spec in specs
        }
    return catalog
