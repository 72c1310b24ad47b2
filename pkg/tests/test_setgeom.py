import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppalab.exceptions import DimensionError, EmptySetError, RepresentationError
from ppalab.setgeom import (Box, Empty, FinitePoints, HalfLine1D, IntervalUnion1D, Singleton,
                            SolutionSet, contains, distance, excess, extreme_structure,
                            from_intervals, intersect_ball, intervals_1d, minkowski_sum,
                            project, same_set, scale_set, set_distance)


def grid_points(box, n=201):
    axes = [np.linspace(a, b, n) for a, b in zip(box.lo, box.hi)]
    return np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, box.dim)


def brute_distance(x, s):
    """Distance by projecting onto each convex piece in closed form."""
    if isinstance(s, FinitePoints):
        return np.min(np.linalg.norm(s.points - x, axis=1))
    if isinstance(s, Box):
        return np.linalg.norm(x - np.clip(x, s.lo, s.hi))
    raise TypeError(s)


def test_distance_examples():
    assert distance([0.5], Box([0], [1])) == 0.0
    assert distance([2.0], Box([0], [1])) == 1.0
    assert distance([1.0], HalfLine1D(0.0, -1)) == 1.0


def test_project_examples():
    assert project([2.0], Box([-1], [1]))[0] == 1.0
    assert project([-5.0], HalfLine1D(-1.0, 1))[0] == -1.0
    np.testing.assert_array_equal(project([3.0, 2.0], Box([0, 0], [1, 5])), [1.0, 2.0])


def test_project_ties():
    # equidistant points: the lowest index wins
    assert project([0.0, 0.0], FinitePoints([[1, 0], [-1, 0]]))[0] == 1.0
    # gap midpoint in 1D goes to the smaller coordinate
    assert project([0.0], IntervalUnion1D([(-3, -1), (1, 3)]))[0] == -1.0


def test_excess_examples():
    assert excess(Box([0], [1]), Box([-1], [2])) == 0.0
    assert excess(Box([0], [1]), Empty()) == math.inf
    assert excess(Box([-1], [1]), Singleton([1.0])) == 2.0


def test_excess_conventions():
    assert excess(Empty(), Singleton([0.0])) == 0.0
    assert excess(Empty(), Empty()) == math.inf
    assert excess(HalfLine1D(0, 1), Box([0], [1])) == math.inf
    assert excess(HalfLine1D(0, 1), HalfLine1D(-1, 1)) == 0.0
    _, why = excess(Singleton([0.0]), Empty(), detail=True)
    assert why == "empty-target"
    _, why = excess(HalfLine1D(0, 1), Singleton([0.0]), detail=True)
    assert why == "unbounded"


def test_excess_1d_gap_midpoint():
    # the worst point of [0, 10] against {0} u {10} sits halfway
    d = FinitePoints([[0.0], [10.0]])
    assert excess(Box([0], [10]), d) == pytest.approx(5.0)
    assert excess(Box([0], [10]), IntervalUnion1D([(-1, 2), (8, 12)])) == pytest.approx(3.0)


@pytest.mark.parametrize("target", [
    Box([0.0, 0.0], [1.0, 0.5]),
    Singleton([2.0, -1.0]),
    FinitePoints([[0.0, 0.0], [1.0, 1.0], [-1.0, 0.5]]),
    FinitePoints([[3.0, 3.0]]),
])
def test_box_excess_against_dense_grid(target):
    src = Box([-1.0, -1.0], [1.5, 1.0])
    pts = grid_points(src)
    grid = max(brute_distance(p, target if not isinstance(target, Singleton)
                              else FinitePoints([target.point])) for p in pts)
    exact = excess(src, target)
    h = np.linalg.norm((src.hi - src.lo) / 200)
    assert grid <= exact + 1e-12
    assert exact <= grid + h


def test_interval_helpers_roundtrip():
    assert isinstance(from_intervals([(0, 1)]), Box)
    assert isinstance(from_intervals([(2, 2)]), Singleton)
    assert isinstance(from_intervals([(1, 1), (3, 3)]), FinitePoints)
    assert isinstance(from_intervals([(0, math.inf)]), HalfLine1D)
    assert from_intervals([]).is_empty
    s = from_intervals([(0, 1), (0.5, 2), (5, 6)])
    assert intervals_1d(s) == [(0.0, 2.0), (5.0, 6.0)]


def test_set_operations():
    assert same_set(scale_set(Box([-1], [1]), 2.0), Box([-2], [2]))
    assert same_set(scale_set(HalfLine1D(1, 1), -1.0), HalfLine1D(-1, -1))
    s = minkowski_sum(Singleton([1.0]), HalfLine1D(0.0, 1))
    assert same_set(s, HalfLine1D(1.0, 1))
    assert same_set(minkowski_sum(Box([0, 0], [1, 1]), Box([1, 1], [2, 3])), Box([1, 1], [3, 4]))
    assert set_distance(Box([0], [1]), Box([3], [4])) == 2.0
    assert contains(Box([0, 0], [1, 1]), [1.0, 0.5])
    assert not contains(HalfLine1D(0, -1), [0.1])


def test_intersect_ball():
    assert same_set(intersect_ball(HalfLine1D(0, 1), [0.0], 1.0), Box([0], [1]))
    assert intersect_ball(Box([5, 5], [6, 6]), [0.0, 0.0], 1.0).is_empty
    assert same_set(intersect_ball(Box([0, 0], [0.1, 0.1]), [0.0, 0.0], 1.0),
                    Box([0, 0], [0.1, 0.1]))
    with pytest.raises(RepresentationError):
        intersect_ball(Box([0, 0], [2, 2]), [0.0, 0.0], 1.0)


def test_extreme_structure():
    pts, rays = extreme_structure(HalfLine1D(2.0, -1))
    assert pts.tolist() == [[2.0]] and [r.tolist() for r in rays] == [[-1.0]]
    pts, rays = extreme_structure(Box([0, 0], [1, 2]))
    assert len(pts) == 4 and rays == []


def test_errors():
    with pytest.raises(EmptySetError):
        SolutionSet(Empty())
    with pytest.raises(DimensionError):
        distance([0.0, 0.0], Box([0], [1]))
    with pytest.raises(ValueError):
        Box([1], [0])
    with pytest.raises(ValueError):
        Singleton([math.nan])


# -- properties ---------------------------------------------------------------

coord = st.floats(-10, 10, allow_nan=False)


@st.composite
def boxes_1d(draw):
    a, b = sorted((draw(coord), draw(coord)))
    return Box([a], [b])


@st.composite
def boxes_2d(draw):
    xs = sorted((draw(coord), draw(coord)))
    ys = sorted((draw(coord), draw(coord)))
    return Box([xs[0], ys[0]], [xs[1], ys[1]])


@settings(max_examples=200, deadline=None)
@given(boxes_2d(), boxes_2d(), boxes_2d())
def test_excess_triangle_inequality(a, b, c):
    assert excess(a, c) <= excess(a, b) + excess(b, c) + 1e-9


@settings(max_examples=200, deadline=None)
@given(boxes_2d(), st.tuples(coord, coord))
def test_projection_is_nearest(b, p):
    q = project(p, b)
    assert contains(b, q)
    assert np.linalg.norm(q - np.array(p)) == pytest.approx(distance(p, b), abs=1e-12)
    for v in b.vertices():
        assert np.linalg.norm(q - np.array(p)) <= np.linalg.norm(v - np.array(p)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(boxes_1d(), boxes_1d(), st.floats(0.1, 5))
def test_excess_scales(a, b, t):
    assert excess(a, a) == 0.0
    assert excess(scale_set(a, t), scale_set(b, t)) == pytest.approx(t * excess(a, b), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(boxes_1d(), st.lists(coord, min_size=1, max_size=5))
def test_excess_1d_against_grid(a, pts):
    d = FinitePoints([[p] for p in pts])
    xs = np.linspace(a.lo[0], a.hi[0], 2001)
    grid = max(np.min(np.abs(np.array(pts) - x)) for x in xs)
    exact = excess(a, d)
    assert grid <= exact + 1e-9
    assert exact <= grid + (a.hi[0] - a.lo[0]) / 2000 + 1e-9
