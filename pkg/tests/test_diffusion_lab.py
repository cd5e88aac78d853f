import math

import numpy as np
import pytest
from scipy import stats

from core.errors import BoundaryContamination, InsufficientPaths, StepTooLarge
from core.models import Box, Configuration
from core.point_config import ConcentrationMode
from lab.cylinder import CylinderFunction, linear_outer, smooth_bump
from lab.diffusion_lab import (
    ConstantFunction,
    DiffusionSpec,
    ReflectingBox,
    RhoCutoff,
    Torus,
    VaradhanReport,
    VaradhanRow,
    advance,
    carre_du_champ_mc,
    default_dt,
    estimate_mass,
    extrapolate_to_zero,
    gaussian_bound_check,
    rademacher_check,
    semigroup_estimate,
    simulate,
    stationarity_test,
    step,
    varadhan_profile,
)
from lab.events import Concentration, DistanceBall, WholeSpace
from lab.potentials import Harmonic, PeriodicWell
from lab.samplers import BinomialModel, GibbsModel, GinibreModel, IntensityMeasure, PoissonModel


def _binomial(lo: float, hi: float, n: int = 1) -> BinomialModel:
    return BinomialModel(IntensityMeasure.uniform(Box((lo,), (hi,))), n)


def _reflecting(lo: float, hi: float) -> ReflectingBox:
    return ReflectingBox(Box((lo,), (hi,)))


# ---------------------------------------------------------------------------
# geometry and dynamics
# ---------------------------------------------------------------------------


def test_reflecting_fold():
    folded = _reflecting(0.0, 1.0).fold(np.array([[1.2], [-0.3], [2.5], [0.4]]))
    np.testing.assert_allclose(folded[:, 0], [0.8, 0.3, 0.5, 0.4], atol=1e-12)


def test_torus_fold_and_window():
    torus = Torus((1.0, 2.0))
    np.testing.assert_allclose(torus.fold(np.array([[-0.25, 2.5]])), [[0.75, 0.5]])
    assert torus.window == Box((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        Torus((0.0,))
    with pytest.raises(ValueError):
        Torus((1.0,), (0.0, 0.0))


def test_diffusion_spec_validation():
    geometry = _reflecting(0.0, 1.0)
    with pytest.raises(ValueError):
        DiffusionSpec(GinibreModel(3), ReflectingBox(Box((0.0, 0.0), (1.0, 1.0))))
    with pytest.raises(ValueError):
        DiffusionSpec(_binomial(0.0, 1.0), geometry, dt=0.1, horizon=1.0)
    with pytest.raises(ValueError):
        DiffusionSpec(_binomial(0.0, 1.0), ReflectingBox(Box((0.0, 0.0), (1.0, 1.0))))


def test_steps_for():
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(0.0, 1.0), dt=0.004, horizon=1.0)
    assert spec.steps_for(0.12) == 30
    assert spec.steps_for(0.0) == 0
    with pytest.raises(ValueError):
        spec.steps_for(0.005)
    with pytest.raises(ValueError):
        spec.steps_for(1.5)


def test_default_dt():
    assert default_dt(1.0) == 1e-3
    assert default_dt(0.01) == pytest.approx(2e-4)


def test_mass_is_conserved():
    m = IntensityMeasure.uniform(Box((0.0,), (2.0,)))
    gibbs = GibbsModel(m, phi=Harmonic(1.0, (1.0,)))
    spec = DiffusionSpec(gibbs, _reflecting(0.0, 2.0), dt=0.001)
    state = Configuration.from_atoms([[0.5], [1.5]], [2, 1], 1)
    assert step(state, spec, rng=0).mass == 3
    end = simulate(state, 0.1, spec, rng=1)
    assert end.mass == 3
    assert np.all((end.points >= 0.0) & (end.points <= 2.0))
    with pytest.raises(ValueError):
        step(Configuration.empty(1), spec)


def test_step_too_large_is_reported():
    m = IntensityMeasure.uniform(Box((0.0,), (1.0,)))
    spec = DiffusionSpec(GibbsModel(m, phi=Harmonic(1e4, (0.5,))), _reflecting(0.0, 1.0), dt=0.001)
    with pytest.raises(StepTooLarge):
        advance(np.full((4, 1, 1), 0.9), spec, 1, np.random.default_rng(0))


@pytest.mark.statistical
def test_free_torus_increments_are_gaussian(rng):
    spec = DiffusionSpec(PoissonModel(IntensityMeasure.uniform(Box((0.0,), (10.0,)))), Torus((10.0,)), dt=1e-3)
    start = rng.uniform(0.0, 10.0, size=(3000, 2, 1))
    end = advance(start, spec, 1, rng)
    increments = (np.mod(end - start + 5.0, 10.0) - 5.0).ravel() / math.sqrt(spec.dt)
    assert stats.kstest(increments, "norm").pvalue > 0.01
    assert abs(increments.var() - 1.0) < 0.1


@pytest.mark.statistical
def test_reflected_particle_becomes_uniform():
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(0.0, 1.0), dt=0.01, horizon=10.0)
    start = np.full((2000, 1, 1), 0.05)
    end = advance(start, spec, spec.steps_for(2.0), np.random.default_rng(3))
    assert stats.kstest(end.ravel(), "uniform").pvalue > 0.01


# ---------------------------------------------------------------------------
# semigroup estimates
# ---------------------------------------------------------------------------


def test_whole_space_pairing_is_one():
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(-2.0, 3.0), dt=0.002)
    est = semigroup_estimate(WholeSpace(), WholeSpace(), 0.1, spec, 500, rng=0)
    assert (est.estimate, est.stderr, est.hits, est.paths) == (1.0, 0.0, 500, 500)


@pytest.mark.statistical
def test_one_particle_pairing_matches_heat_kernel():
    spec = DiffusionSpec(_binomial(0.0, 0.1), _reflecting(-5.0, 5.0), dt=0.005)
    lam = Concentration(Box((0.0,), (0.1,)), 1)
    xi = Concentration(Box((1.0,), (1.1,)), 1)
    t = 0.25
    est = semigroup_estimate(xi, lam, t, spec, 100_000, rng=7, workers=2)
    x0 = (np.arange(2000) + 0.5) / 2000 * 0.1
    sd = math.sqrt(t)
    exact = float(np.mean(stats.norm.cdf((1.1 - x0) / sd) - stats.norm.cdf((1.0 - x0) / sd)))
    assert abs(est.estimate - exact) <= 3 * est.stderr


@pytest.mark.statistical
def test_pairing_is_symmetric_on_the_torus():
    m = IntensityMeasure.uniform(Box((0.0,), (2.0,)))
    spec = DiffusionSpec(PoissonModel(m), Torus((2.0,)), dt=0.005)
    a = Concentration(Box((0.0,), (0.5,)), 1, ConcentrationMode.GEQ)
    b = Concentration(Box((1.0,), (1.5,)), 1, ConcentrationMode.GEQ)
    ab = semigroup_estimate(a, b, 0.2, spec, 40_000, rng=8)
    ba = semigroup_estimate(b, a, 0.2, spec, 40_000, rng=9)
    assert abs(ab.estimate - ba.estimate) <= 3 * math.hypot(ab.stderr, ba.stderr)


@pytest.mark.statistical
def test_conditioned_mode_agrees_with_plain():
    m = IntensityMeasure.uniform(Box((0.0,), (2.0,)))
    spec = DiffusionSpec(PoissonModel(m), Torus((2.0,)), dt=0.005)
    lam = Concentration(Box((0.0,), (0.5,)), 2, ConcentrationMode.GEQ)
    xi = Concentration(Box((0.5,), (1.0,)), 1, ConcentrationMode.GEQ)
    plain = semigroup_estimate(xi, lam, 0.1, spec, 40_000, rng=10)
    conditioned = semigroup_estimate(xi, lam, 0.1, spec, 5_000, rng=11, mode="conditioned")
    assert conditioned.paths == 5_000
    exact_mass = 1 - 1.5 * math.exp(-0.5)
    assert abs(conditioned.mass_estimate - exact_mass) < 0.02
    assert abs(plain.estimate - conditioned.estimate) <= 3 * math.hypot(plain.stderr, conditioned.stderr)


def test_semigroup_is_deterministic():
    spec = DiffusionSpec(_binomial(0.0, 1.0, 2), _reflecting(-1.0, 2.0), dt=0.005)
    xi = Concentration(Box((0.5,), (1.0,)), 1)
    first = semigroup_estimate(xi, WholeSpace(), 0.05, spec, 1000, rng=3, workers=2)
    second = semigroup_estimate(xi, WholeSpace(), 0.05, spec, 1000, rng=3, workers=2)
    assert first == second
    with pytest.raises(ValueError):
        semigroup_estimate(xi, WholeSpace(), 0.05, spec, 10, rng=0, mode="importance")


def test_estimate_mass(poisson_2):
    event = Concentration(Box((0.0,), (1.0,)), 0)
    assert estimate_mass(event, poisson_2, 10, rng=0) == (pytest.approx(math.exp(-1)), 0.0)
    p, se = estimate_mass(WholeSpace(), _binomial(0.0, 1.0), 100, rng=0)
    assert (p, se) == (1.0, 0.0)


# ---------------------------------------------------------------------------
# Gaussian upper bound
# ---------------------------------------------------------------------------


@pytest.mark.statistical
def test_gaussian_bound_holds_for_poisson_concentration_sets():
    m = IntensityMeasure.uniform(Box((0.0,), (4.0,)))
    spec = DiffusionSpec(PoissonModel(m), _reflecting(0.0, 4.0), dt=0.005)
    lam1 = Concentration(Box((0.5,), (3.5,)), 0)
    lam2 = Concentration(Box((1.5,), (2.5,)), 1, ConcentrationMode.GEQ)
    report = gaussian_bound_check(lam1, lam2, [0.1, 0.25], spec, 20_000, rng=12, workers=2)
    assert report.distance_lower_bound == pytest.approx(1.0)
    assert report.mass_1 == pytest.approx(math.exp(-3))
    assert report.mass_2 == pytest.approx(1 - math.exp(-1))
    assert report.passed
    assert [row.t for row in report.rows] == [0.1, 0.25]


def test_gaussian_bound_at_distance_zero_is_the_mass():
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(-3.0, 4.0), dt=0.002)
    ball = DistanceBall(Configuration.from_points([[0.5]], 1), 0.2)
    report = gaussian_bound_check(ball, ball, [0.05], spec, 2000, rng=13)
    assert report.distance_lower_bound == 0.0
    assert report.rows[0].bound == pytest.approx(report.mass_1)
    assert report.passed


# ---------------------------------------------------------------------------
# short-time asymptotics
# ---------------------------------------------------------------------------


def test_extrapolation_is_exact_on_its_basis():
    t = np.array([0.3, 0.2, 0.1])
    intercept, se = extrapolate_to_zero(t, 2.0 + 3.0 * t, [0.01, 0.01, 0.01])
    assert intercept == pytest.approx(2.0)
    assert se > 0
    tail = 1.0 + 0.5 * t - 0.7 * t * np.log(t)
    assert extrapolate_to_zero(t, tail, [0.0] * 3, "gaussian_tail")[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        extrapolate_to_zero(t[:2], [1.0, 1.0], [0.0, 0.0], "gaussian_tail")
    with pytest.raises(ValueError):
        extrapolate_to_zero(t, t, t, "cubic")


def test_varadhan_report_gate():
    rows = [VaradhanRow(0.1, 1.1, 0.01, 1e-3, 100)]
    assert VaradhanReport(rows, 1.05, 0.01, "linear", 1.0, True).passed(0.1)
    assert not VaradhanReport(rows, 1.5, 0.01, "linear", 1.0, True).passed(0.1)
    assert VaradhanReport(rows, 1.5, 0.01, "linear", None, True).passed(0.1)


def test_varadhan_grid_must_decrease():
    spec = DiffusionSpec(_binomial(-0.001, 0.001), _reflecting(-5.0, 5.0), dt=0.004)
    xi = DistanceBall(Configuration.from_points([[3.0]], 1), 2.0)
    with pytest.raises(ValueError):
        varadhan_profile(xi, WholeSpace(), [0.12, 0.2], spec, 100, rng=0)


def test_varadhan_needs_hits():
    spec = DiffusionSpec(_binomial(-0.001, 0.001), _reflecting(-5.0, 5.0), dt=0.004)
    xi = DistanceBall(Configuration.from_points([[4.5]], 1), 0.1)
    with pytest.raises(InsufficientPaths):
        varadhan_profile(xi, WholeSpace(), [0.02, 0.012], spec, 1000, rng=0)


@pytest.mark.slow
@pytest.mark.statistical
def test_one_particle_varadhan_limit():
    spec = DiffusionSpec(_binomial(-0.001, 0.001), _reflecting(-5.0, 5.0), dt=0.004)
    xi = DistanceBall(Configuration.from_points([[3.0]], 1), 2.0)
    report = varadhan_profile(xi, WholeSpace(), [0.2, 0.16, 0.12], spec, 200_000, rng=14, workers=2)
    assert report.xi_open
    assert report.reference == pytest.approx(1.0, abs=0.005)
    assert all(row.hits >= 10 for row in report.rows)
    # rows approach the squared distance from above as t decreases
    values = [row.value for row in report.rows]
    assert values[0] > values[-1] > 1.0
    assert abs(report.intercept - 1.0) <= 0.2 + 3 * report.intercept_stderr


# ---------------------------------------------------------------------------
# square field and Rademacher
# ---------------------------------------------------------------------------


def test_square_field_of_constant_is_zero(config_1d):
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(-5.0, 5.0), dt=0.0005)
    est = carre_du_champ_mc(CylinderFunction.constant_function(1.0), config_1d(0.2), [0.002, 0.001], spec, 100, rng=0)
    assert (est.value, est.stderr) == (0.0, 0.0)


@pytest.mark.statistical
def test_one_particle_square_field_is_the_gradient(config_1d):
    f = smooth_bump((0.0,), 1.5)
    u = CylinderFunction(linear_outer([1.0]), (f,))
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(-5.0, 5.0), dt=0.0005)
    est = carre_du_champ_mc(u, config_1d(0.4), [0.002, 0.001], spec, 20_000, rng=15)
    expected = float(f.grad(np.array([[0.4]]))[0, 0] ** 2)
    assert est.value == pytest.approx(expected, rel=0.1)
    assert len(est.rows) == 2


def test_square_field_rejects_configurations_near_the_wall(config_1d):
    f = smooth_bump((0.0,), 1.5)
    u = CylinderFunction(linear_outer([1.0]), (f,))
    spec = DiffusionSpec(_binomial(0.0, 1.0), _reflecting(-5.0, 5.0), dt=0.0005)
    with pytest.raises(BoundaryContamination):
        carre_du_champ_mc(u, config_1d(4.99), [0.002], spec, 10, rng=0)


def _rademacher_spec() -> DiffusionSpec:
    return DiffusionSpec(_binomial(-1.0, 1.0), _reflecting(-3.0, 3.0))


def _rho(scale: float = 1.0) -> RhoCutoff:
    return RhoCutoff(Configuration.from_points([[0.5]], 1), Box((-2.0,), (2.0,)), 1.0, scale)


def test_rho_cutoff_values(config_1d):
    u = _rho()
    assert u.lip == 1.0
    assert u(config_1d(0.2)) == pytest.approx(0.3)
    assert u(config_1d(-1.5)) == 1.0
    np.testing.assert_allclose(u.batch(np.array([[[0.2]], [[-1.5]]])), [0.3, 1.0])
    assert _rho(-2.0).lip == 2.0


@pytest.mark.statistical
def test_square_field_of_rho_cutoff_at_a_single_time(config_1d):
    # one atom at 0.2, reference atom at 0.5: rho is |x - 0.5| near 0.2, so the square field is 1
    est = carre_du_champ_mc(_rho(), config_1d(0.2), [0.002], _rademacher_spec(), 20_000, rng=19)
    assert len(est.rows) == 1
    assert (est.value, est.stderr) == (est.rows[0][1], est.rows[0][2])
    assert abs(est.value - 1.0) <= 3 * est.stderr
    zero = carre_du_champ_mc(ConstantFunction(2.0), config_1d(0.2), [0.002], _rademacher_spec(), 100, rng=0)
    assert zero.value == 0.0


@pytest.mark.statistical
def test_rademacher_check_passes_for_rho_cutoff():
    report = rademacher_check(_rho(), _rademacher_spec(), 300, rng=16, n_configs=10, n_paths=5000)
    assert report.n_pairs_used == 300
    assert report.max_ratio <= 1.0 + 1e-9
    assert len(report.square_fields) == 10
    assert report.passed


def test_rademacher_constant_function():
    report = rademacher_check(ConstantFunction(2.0), _rademacher_spec(), 50, rng=17, n_configs=3, n_paths=100)
    assert report.max_ratio == 0.0
    assert report.max_square_field == 0.0
    assert report.passed


def test_rademacher_scales_with_the_function():
    spec = _rademacher_spec()
    base = rademacher_check(_rho(), spec, 100, rng=18, n_configs=4, n_paths=500)
    doubled = rademacher_check(_rho(2.0), spec, 100, rng=18, n_configs=4, n_paths=500)
    assert doubled.lip == 2 * base.lip
    assert doubled.max_ratio == 2 * base.max_ratio
    assert doubled.square_fields == [4 * v for v in base.square_fields]


# ---------------------------------------------------------------------------
# stationarity
# ---------------------------------------------------------------------------

WINDOWS = [Box((0.0,), (0.1,)), Box((0.4,), (0.6,)), Box((0.9,), (1.0,))]


def _torus_poisson(intensity: float = 20.0) -> PoissonModel:
    return PoissonModel(IntensityMeasure.uniform(Box((0.0,), (1.0,)), intensity))


def test_zero_horizon_is_trivially_stationary():
    spec = DiffusionSpec(_torus_poisson(), Torus((1.0,)), dt=0.01)
    report = stationarity_test(spec, 0.0, WINDOWS, 200, rng=0)
    assert report.passed
    assert all(row.p_value == 1.0 for row in report.rows)


def test_stationarity_requires_a_torus():
    spec = DiffusionSpec(_torus_poisson(), _reflecting(0.0, 1.0), dt=0.01)
    with pytest.raises(ValueError):
        stationarity_test(spec, 0.5, WINDOWS, 10, rng=0)


@pytest.mark.statistical
@pytest.mark.parametrize("test", ["chi2", "ks"])
def test_poisson_is_stationary_under_free_motion_on_the_torus(test):
    spec = DiffusionSpec(_torus_poisson(), Torus((1.0,)), dt=0.01)
    report = stationarity_test(spec, 0.5, WINDOWS, 1000, rng=19, workers=2, test=test)
    assert len(report.rows) == 3
    assert report.passed


@pytest.mark.slow
def test_reversed_drift_is_detected():
    m = IntensityMeasure.uniform(Box((0.0,), (1.0,)), 20.0)
    gibbs = GibbsModel(m, phi=PeriodicWell(3.0, 1.0))
    spec = DiffusionSpec(gibbs, Torus((1.0,)), dt=0.01, drift_sign=-1.0)
    report = stationarity_test(spec, 1.0, WINDOWS, 500, rng=20)
    assert not report.passed
