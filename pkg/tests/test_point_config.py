import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import DimensionMismatch
from core.models import Ball, Box, Configuration, ConfigurationFile, LabeledSequence
from core.point_config import (
    ConcentrationMode,
    canonical_label,
    configuration_from_json,
    configuration_to_json,
    count,
    in_concentration_set,
    load_configuration,
    restrict,
    save_configuration,
    superpose,
    truncate,
    unlabel,
)


@pytest.fixture
def gamma():
    """{0.5 x1, 2.0 x3}"""
    return Configuration.from_atoms([[0.5], [2.0]], [1, 3], 1)


def test_from_points_merges_duplicates(config_1d):
    g = config_1d(1.0, 0.0, 0.0)
    assert g.mass == 3
    assert g.n_atoms == 2
    np.testing.assert_array_equal(g.points, [[0.0], [1.0]])
    np.testing.assert_array_equal(g.multiplicities, [2, 1])


def test_equality_ignores_input_order(config_1d):
    assert config_1d(0.0, 1.0, 1.0) == config_1d(1.0, 0.0, 1.0)
    assert config_1d(0.0, 1.0) != config_1d(0.0, 1.0, 1.0)
    assert hash(config_1d(2.0, 3.0)) == hash(config_1d(3.0, 2.0))


def test_signed_zeros_merge():
    g = Configuration.from_points([[0.0], [-0.0]], 1)
    assert g.n_atoms == 1
    assert g.mass == 2


def test_invalid_configurations_rejected():
    with pytest.raises(ValueError):
        Configuration.from_atoms([[0.0]], [0], 1)
    with pytest.raises(ValueError):
        Configuration.from_points([[np.nan]], 1)
    with pytest.raises(DimensionMismatch):
        Configuration.from_points([[0.0, 1.0]], 1)


def test_count(gamma):
    assert count(gamma, Box((0.0,), (1.0,))) == 1
    assert count(Configuration.empty(1), Box((0.0,), (1.0,))) == 0
    assert count(Configuration.from_atoms([[0.0]], [2], 1), Ball((0.0,), 1.0)) == 2


def test_box_is_half_open(config_1d):
    g = config_1d(0.0, 0.5, 1.0)
    assert count(g, Box((0.0,), (1.0,))) == 2
    # adjacent boxes partition the mass
    assert count(g, Box((0.0,), (0.5,))) + count(g, Box((0.5,), (1.5,))) == 3


def test_count_dimension_mismatch(gamma):
    with pytest.raises(DimensionMismatch):
        count(gamma, Box((0.0, 0.0), (1.0, 1.0)))


def test_restrict(gamma):
    assert restrict(gamma, Box((0.0,), (1.0,))) == Configuration.from_points([[0.5]], 1)
    assert restrict(gamma, Box((-10.0,), (10.0,))) == gamma
    assert restrict(Configuration.empty(1), Box((0.0,), (1.0,))) == Configuration.empty(1)


def test_superpose(config_1d):
    assert superpose(config_1d(0.0), config_1d(0.0)) == Configuration.from_atoms([[0.0]], [2], 1)
    assert superpose(config_1d(0.0, 1.0), Configuration.empty(1)) == config_1d(0.0, 1.0)
    assert superpose(config_1d(0.0, 1.0), config_1d(1.0)) == Configuration.from_atoms([[0.0], [1.0]], [1, 2], 1)


def test_count_is_additive_and_monotone(rng):
    inner, outer = Box((0.2, 0.2), (0.6, 0.7)), Box((0.0, 0.0), (1.0, 1.0))
    for _ in range(50):
        g = Configuration.from_points(rng.random((rng.integers(0, 8), 2)), 2)
        e = Configuration.from_points(rng.random((rng.integers(0, 8), 2)), 2)
        assert count(g, inner) <= count(g, outer)
        assert count(superpose(g, e), inner) == count(g, inner) + count(e, inner)


@pytest.mark.parametrize(
    "k, n, mode, expected",
    [(3, 3, ConcentrationMode.EQ, True), (0, 0, ConcentrationMode.GEQ, True), (5, 3, ConcentrationMode.LEQ, False)],
)
def test_in_concentration_set(k, n, mode, expected):
    g = Configuration.from_atoms([[0.5]], [k], 1) if k else Configuration.empty(1)
    assert in_concentration_set(g, Box((0.0,), (1.0,)), n, mode) is expected


def test_unlabel():
    x = LabeledSequence.from_points([[0.0], [1.0], [0.0]], 1)
    assert unlabel(x) == Configuration.from_atoms([[0.0], [1.0]], [2, 1], 1)
    assert unlabel(LabeledSequence(np.zeros((0, 1)), 1)) == Configuration.empty(1)


def test_unlabel_is_permutation_invariant(rng):
    for _ in range(100):
        pts = rng.integers(0, 4, size=(rng.integers(1, 7), 2)).astype(float)
        perm = rng.permutation(len(pts))
        assert unlabel(LabeledSequence(pts, 2)) == unlabel(LabeledSequence(pts[perm], 2))


def test_truncate():
    x = LabeledSequence.from_points([[1.0], [2.0], [3.0]], 1)
    assert truncate(x, 2) == LabeledSequence.from_points([[1.0], [2.0]], 1)
    assert truncate(truncate(x, 2), 5) == truncate(x, 2)
    assert truncate(truncate(x, 3), 1) == truncate(x, 1)
    with pytest.raises(ValueError):
        truncate(x, 0)


def test_canonical_label(config_1d):
    assert canonical_label(config_1d(3.0, 1.0)) == LabeledSequence.from_points([[1.0], [3.0]], 1)
    assert canonical_label(Configuration.from_atoms([[0.0]], [2], 1)) == LabeledSequence.from_points([[0.0], [0.0]], 1)
    # equal distance to the anchor: lexicographic tie-break
    assert canonical_label(config_1d(1.0, -1.0)).points[:, 0].tolist() == [-1.0, 1.0]


def test_canonical_label_is_right_inverse_of_unlabel(rng):
    for _ in range(100):
        pts = rng.integers(-3, 4, size=(rng.integers(0, 8), 2)).astype(float)
        g = Configuration.from_points(pts, 2)
        anchor = rng.normal(size=2)
        assert unlabel(canonical_label(g, anchor)) == g


def test_json_round_trip(tmp_path):
    g = Configuration.from_atoms([[0.25, -1.0], [3.0, 0.1]], [2, 1], 2)
    assert configuration_from_json(configuration_to_json(g)) == g
    path = tmp_path / "gamma.json"
    save_configuration(g, path)
    assert load_configuration(path) == g


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_configuration(tmp_path / "missing.json")


def test_configuration_file_rejects_unknown_keys_and_bad_dims():
    with pytest.raises(ValidationError):
        ConfigurationFile.model_validate({"dim": 1, "atoms": [], "extra": 1})
    with pytest.raises(ValidationError):
        ConfigurationFile.model_validate({"dim": 2, "atoms": [{"x": [0.0]}]})
    with pytest.raises(ValidationError):
        ConfigurationFile.model_validate({"dim": 1, "atoms": [{"x": [0.0], "m": 0}]})


def test_windows_validate_bounds():
    with pytest.raises(ValueError):
        Box((1.0,), (0.0,))
    with pytest.raises(ValueError):
        Ball((0.0,), 0.0)
