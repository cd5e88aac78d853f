import pytest

from core.errors import NoDistanceCertificate
from core.models import Ball, Box, Configuration
from core.point_config import ConcentrationMode
from lab.events import (
    Concentration,
    Custom,
    DistanceBall,
    LambdaSet,
    RhoBall,
    WholeSpace,
    contains_batch,
    distance_lower_bound,
    distance_to_event,
)
from lab.transport import d_upsilon

E = Box((0.0,), (1.0,))
U = Box((-2.0,), (2.0,))


def test_membership(config_1d):
    assert WholeSpace().contains(config_1d())
    assert Concentration(E, 2).contains(config_1d(0.1, 0.9, 4.0))
    assert not Concentration(E, 2, ConcentrationMode.LEQ).contains(config_1d(0.1, 0.2, 0.3))
    assert LambdaSet(config_1d(0.0, 5.0), U).contains(config_1d(0.0, -7.0))
    assert not LambdaSet(config_1d(0.0), U).contains(config_1d(0.0, 1.0))
    assert DistanceBall(config_1d(0.0), 1.0).contains(config_1d(0.5))
    assert not DistanceBall(config_1d(0.0), 1.0).contains(config_1d(1.0))
    assert RhoBall(config_1d(0.0), U, 0.5).contains(config_1d(0.3))
    assert Custom(lambda g: g.mass == 2).contains(config_1d(1.0, 2.0))


def test_openness():
    assert WholeSpace().is_open
    assert Concentration(Ball((0.0,), 1.0), 2, ConcentrationMode.LEQ).is_open
    assert not Concentration(E, 2, ConcentrationMode.LEQ).is_open
    assert not Concentration(Ball((0.0,), 1.0), 2, ConcentrationMode.GEQ).is_open
    assert not LambdaSet(Configuration.empty(1), U).is_open
    assert DistanceBall(Configuration.empty(1), 1.0).is_open
    assert RhoBall(Configuration.empty(1), U, 1.0).is_open
    assert Custom(lambda g: True, open_set=True).is_open


def test_invalid_events():
    with pytest.raises(ValueError):
        Concentration(E, -1)
    with pytest.raises(ValueError):
        DistanceBall(Configuration.empty(1), 0.0)
    with pytest.raises(ValueError):
        RhoBall(Configuration.empty(1), U, -1.0)


# ---------------------------------------------------------------------------
# distance to an event
# ---------------------------------------------------------------------------


def test_distance_to_concentration(config_1d):
    assert distance_to_event(config_1d(0.5, 3.0), Concentration(E, 2)).value == pytest.approx(2.0)
    assert distance_to_event(config_1d(0.5, 3.0), Concentration(E, 2, ConcentrationMode.GEQ)).value == pytest.approx(2.0)
    assert distance_to_event(config_1d(0.2, 0.5), Concentration(E, 1)).value == pytest.approx(0.2)
    assert distance_to_event(config_1d(0.2, 0.5), Concentration(E, 1, ConcentrationMode.LEQ)).value == pytest.approx(0.2)
    assert distance_to_event(config_1d(0.2, 0.5), Concentration(E, 2)).value == 0.0
    assert not distance_to_event(config_1d(0.5), Concentration(E, 3)).is_finite


def test_distance_to_balls_and_lambda_sets(config_1d):
    assert distance_to_event(config_1d(3.0), DistanceBall(config_1d(0.0), 1.0)).value == pytest.approx(2.0)
    assert not distance_to_event(config_1d(3.0, 4.0), DistanceBall(config_1d(0.0), 1.0)).is_finite
    assert distance_to_event(config_1d(1.0), RhoBall(config_1d(0.0), U, 0.5)).value == pytest.approx(0.5)
    assert distance_to_event(config_1d(1.0), LambdaSet(config_1d(0.0), U)).value == pytest.approx(1.0)
    assert distance_to_event(config_1d(1.0), WholeSpace()).value == 0.0
    with pytest.raises(NoDistanceCertificate):
        distance_to_event(config_1d(1.0), Custom(lambda g: True))


def test_distance_to_concentration_vanishes_exactly_on_the_set(rng):
    event = Concentration(E, 2)
    for _ in range(100):
        gamma = Configuration.from_points(rng.uniform(-1, 2, size=(int(rng.integers(2, 5)), 1)), 1)
        d = distance_to_event(gamma, event)
        assert d.is_finite
        if event.contains(gamma):
            assert d.value == 0.0
        else:
            assert d.value > 0.0


# ---------------------------------------------------------------------------
# lower bounds between events
# ---------------------------------------------------------------------------


def test_concentration_bound():
    sparse = Concentration(Box((0.5,), (3.5,)), 0)
    dense = Concentration(Box((1.5,), (2.5,)), 1, ConcentrationMode.GEQ)
    assert distance_lower_bound(sparse, dense).value == pytest.approx(1.0)
    assert distance_lower_bound(dense, sparse).value == pytest.approx(1.0)
    two = Concentration(Box((1.5,), (2.5,)), 4, ConcentrationMode.GEQ)
    assert distance_lower_bound(sparse, two).value == pytest.approx(2.0)


def test_empty_lambda_set_is_a_concentration_set(config_1d):
    empty_u = LambdaSet(config_1d(), Box((0.5,), (3.5,)))
    dense = Concentration(Box((1.5,), (2.5,)), 1, ConcentrationMode.GEQ)
    assert distance_lower_bound(empty_u, dense).value == pytest.approx(1.0)


def test_ball_and_lambda_bounds(config_1d):
    assert distance_lower_bound(DistanceBall(config_1d(0.0), 1.0), DistanceBall(config_1d(3.0), 1.0)).value == pytest.approx(1.0)
    assert not distance_lower_bound(DistanceBall(config_1d(0.0), 1.0), DistanceBall(config_1d(0.0, 3.0), 1.0)).is_finite
    assert distance_lower_bound(LambdaSet(config_1d(0.0), U), LambdaSet(config_1d(0.5), U)).value == pytest.approx(0.5)
    assert distance_lower_bound(RhoBall(config_1d(0.0), U, 0.2), RhoBall(config_1d(1.0), U, 0.3)).value == pytest.approx(
        0.5
    )
    assert distance_lower_bound(RhoBall(config_1d(1.0), U, 0.2), LambdaSet(config_1d(0.0), U)).value == pytest.approx(0.8)


def test_uncertified_pairs_raise(config_1d):
    with pytest.raises(NoDistanceCertificate):
        distance_lower_bound(Custom(lambda g: True), WholeSpace())
    with pytest.raises(NoDistanceCertificate):
        distance_lower_bound(Concentration(E, 1), Concentration(Box((5.0,), (6.0,)), 1))


def test_lower_bounds_hold_on_members(rng):
    a = DistanceBall(Configuration.from_points([[0.0], [1.0]], 1), 0.5)
    b = RhoBall(Configuration.from_points([[1.5]], 1), U, 0.3)
    c = RhoBall(Configuration.from_points([[-1.5]], 1), U, 0.3)
    pairs = [(a, DistanceBall(Configuration.from_points([[0.0], [4.0]], 1), 0.5)), (b, c)]
    for first, second in pairs:
        bound = distance_lower_bound(first, second).as_float()
        members_a, members_b = [], []
        while len(members_a) < 30 or len(members_b) < 30:
            gamma = Configuration.from_points(rng.uniform(-3, 5, size=(2, 1)), 1)
            if first.contains(gamma):
                members_a.append(gamma)
            if second.contains(gamma):
                members_b.append(gamma)
        for g in members_a[:30]:
            for h in members_b[:30]:
                assert d_upsilon(g, h).as_float() >= bound - 1e-9


# ---------------------------------------------------------------------------
# batched membership
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "event",
    [
        WholeSpace(),
        Concentration(E, 1),
        Concentration(E, 1, ConcentrationMode.GEQ),
        Concentration(E, 1, ConcentrationMode.LEQ),
        DistanceBall(Configuration.from_points([[0.0], [1.0]], 1), 1.0),
        RhoBall(Configuration.from_points([[0.5]], 1), U, 0.7),
        LambdaSet(Configuration.empty(1), Box((3.0,), (4.0,))),
        Custom(lambda g: g.points.min() < 0.0 if g.mass else False),
    ],
    ids=lambda e: e.kind,
)
def test_contains_batch_matches_scalar(event, rng):
    xs = rng.uniform(-1.5, 2.5, size=(200, 2, 1))
    batch = contains_batch(event, xs)
    scalar = [event.contains(Configuration.from_points(x, 1)) for x in xs]
    assert batch.tolist() == scalar
