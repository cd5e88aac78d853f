import numpy as np
import pytest

from lab.potentials import (
    GaussianRepulsion,
    HardCore,
    Harmonic,
    Linear,
    LinearDistance,
    PeriodicWell,
    Strauss,
    ZeroFree,
    ZeroPair,
)


def _numeric_gradient(fn, xs, h=1e-6):
    grad = np.zeros_like(xs)
    for k in range(xs.shape[1]):
        step = np.zeros(xs.shape[1])
        step[k] = h
        grad[:, k] = (fn(xs + step) - fn(xs - step)) / (2 * h)
    return grad


@pytest.mark.parametrize(
    "phi",
    [Harmonic(2.0, (0.5, -0.5)), Linear((1.0, -3.0)), PeriodicWell(1.5, 2.0), ZeroFree()],
    ids=lambda p: p.name,
)
def test_free_gradients_match_finite_differences(phi, rng):
    xs = rng.normal(size=(20, 2))
    np.testing.assert_allclose(phi.gradient(xs), _numeric_gradient(phi, xs), atol=1e-5)


def test_free_potential_values():
    assert Harmonic(2.0, (1.0,))(np.array([[3.0]]))[0] == pytest.approx(4.0)
    assert PeriodicWell(1.0, 1.0)(np.array([[0.5]]))[0] == pytest.approx(2.0)
    assert ZeroFree().is_zero and not Linear((1.0,)).is_zero


def test_step_potentials():
    r = np.array([0.05, 0.1, 0.5])
    np.testing.assert_array_equal(HardCore(0.1).radial(r), [np.inf, 0.0, 0.0])
    np.testing.assert_array_equal(Strauss(2.0, 0.1).radial(r), [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(HardCore(0.1).radial_derivative(r), 0.0)


@pytest.mark.parametrize("psi", [GaussianRepulsion(1.5, 0.4), LinearDistance(0.7)], ids=lambda p: p.name)
def test_pair_gradient_matches_finite_differences(psi, rng):
    ys = rng.normal(size=(4, 2))
    x = rng.normal(size=(1, 2))
    numeric = _numeric_gradient(lambda z: np.array([psi(p, ys).sum() for p in z]), x)[0]
    np.testing.assert_allclose(psi.gradient(x[0], ys), numeric, atol=1e-5)


def test_interaction_gradients_sum_over_the_others(rng):
    psi = GaussianRepulsion(1.0, 0.5)
    xs = rng.normal(size=(5, 2))
    grads = psi.interaction_gradients(xs)
    for i in range(5):
        np.testing.assert_allclose(grads[i], psi.gradient(xs[i], np.delete(xs, i, axis=0)), atol=1e-12)
    # equal and opposite forces
    np.testing.assert_allclose(grads.sum(axis=0), 0.0, atol=1e-12)


def test_pair_energy():
    xs = np.array([[0.0], [1.0], [3.0]])
    assert LinearDistance(1.0).pair_energy(xs) == pytest.approx(1.0 + 3.0 + 2.0)
    assert HardCore(0.5).pair_energy(np.array([[0.0], [0.2]])) == np.inf
    assert ZeroPair().pair_energy(xs) == 0.0
    assert LinearDistance(1.0).pair_energy(xs[:1]) == 0.0
