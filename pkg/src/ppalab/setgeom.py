"""Finitely representable subsets of R^d and the metric operations on them.

Every image of a supported operator model is one of the variants below:

``Empty``, ``Singleton``, ``Box``, ``FinitePoints``, ``HalfLine1D`` and
``IntervalUnion1D``.  All of them are closed, so ``distance`` vanishes exactly
on the set, and the one-sided excess

    ex(C, D) = sup_{x in C} d(x, D)

can be computed without sampling: 1D sets go through exact interval
arithmetic, boxes through their vertices (or Voronoi vertices when the target
is a finite point cloud), and point clouds by enumeration.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionError, EmptySetError, RepresentationError

__all__ = [
    "TOL", "as_point", "ValueSet", "Empty", "Singleton", "Box", "FinitePoints",
    "HalfLine1D", "IntervalUnion1D", "SolutionSet", "distance", "project",
    "excess", "contains", "minkowski_sum", "scale_set", "intersect_ball",
    "set_distance", "extreme_structure", "intervals_1d", "from_intervals",
    "same_set",
]

TOL = 1e-9
MAX_DIM = 4
_INF = math.inf


def as_point(p, dim=None):
    """Return `p` as a read-only 1D float array with finite entries."""
    arr = np.array(p, dtype=float).reshape(-1)
    if arr.size == 0 or arr.size > MAX_DIM:
        raise DimensionError(f"points must have 1 to {MAX_DIM} coordinates, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"point has non-finite coordinates: {arr}")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected a point of dimension {dim}, got {arr.size}")
    arr.setflags(write=False)
    return arr


class ValueSet:
    """Base class of the set variants.  Instances are immutable."""

    dim = None

    @property
    def is_empty(self):
        return False

    @property
    def is_bounded(self):
        return True

    @property
    def is_convex(self):
        return True


@dataclass(frozen=True, eq=False)
class Empty(ValueSet):
    dim: int = None

    @property
    def is_empty(self):
        return True

    def __repr__(self):
        return "Empty()"


@dataclass(frozen=True, eq=False)
class Singleton(ValueSet):
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", as_point(self.point))

    @property
    def dim(self):
        return self.point.size

    def __repr__(self):
        return f"Singleton({self.point.tolist()})"


@dataclass(frozen=True, eq=False)
class Box(ValueSet):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo, hi = as_point(self.lo), as_point(self.hi)
        if lo.size != hi.size:
            raise DimensionError("box corners differ in dimension")
        if np.any(lo > hi):
            raise ValueError(f"box needs lo <= hi componentwise, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    def vertices(self):
        axes = [sorted({a, b}) for a, b in zip(self.lo, self.hi)]
        return np.array(list(itertools.product(*axes)), dtype=float)

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


@dataclass(frozen=True, eq=False)
class FinitePoints(ValueSet):
    points: np.ndarray

    def __post_init__(self):
        pts = [as_point(p) for p in self.points]
        if not pts:
            raise EmptySetError("FinitePoints needs at least one point, use Empty()")
        if len({p.size for p in pts}) != 1:
            raise DimensionError("FinitePoints members differ in dimension")
        arr = np.vstack(pts)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def is_convex(self):
        return len(np.unique(self.points, axis=0)) == 1

    def __repr__(self):
        return f"FinitePoints({self.points.tolist()})"


@dataclass(frozen=True, eq=False)
class HalfLine1D(ValueSet):
    """``[anchor, +inf)`` when direction is +1, ``(-inf, anchor]`` when -1."""

    anchor: float
    direction: int

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("half-line direction must be +1 or -1")
        if not math.isfinite(self.anchor):
            raise ValueError("half-line anchor must be finite")
        object.__setattr__(self, "anchor", float(self.anchor))

    dim = 1

    @property
    def is_bounded(self):
        return False

    def __repr__(self):
        return f"HalfLine1D({self.anchor}, {self.direction:+d})"


@dataclass(frozen=True, eq=False)
class IntervalUnion1D(ValueSet):
    """Disjoint closed intervals, sorted.  Endpoints may be infinite."""

    intervals: tuple = field(default=())

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise EmptySetError("IntervalUnion1D needs at least one interval, use Empty()")
        for a, b in ivs:
            if math.isnan(a) or math.isnan(b) or a > b or a == _INF or b == -_INF:
                raise ValueError(f"bad interval [{a}, {b}]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be sorted and pairwise disjoint")
        object.__setattr__(self, "intervals", ivs)

    dim = 1

    @property
    def is_bounded(self):
        return math.isfinite(self.intervals[0][0]) and math.isfinite(self.intervals[-1][1])

    @property
    def is_convex(self):
        return len(self.intervals) == 1

    def __repr__(self):
        return f"IntervalUnion1D({list(self.intervals)})"


@dataclass(frozen=True)
class SolutionSet:
    """Zero set S of an operator, with the optimal value f* when the operator
    is a subdifferential."""

    representation: ValueSet
    optimal_value: float = None

    def __post_init__(self):
        if self.representation.is_empty:
            raise EmptySetError("solution set must be nonempty")


# -- helpers ----------------------------------------------------------------

def _dims_agree(a, b):
    da, db = getattr(a, "dim", None), getattr(b, "dim", None)
    if da is not None and db is not None and da != db:
        raise DimensionError(f"dimension mismatch: {da} vs {db}")
    return da if da is not None else db


def intervals_1d(s):
    """Sorted, merged list of closed intervals covering a 1D set."""
    if s.is_empty:
        return []
    if s.dim != 1:
        raise DimensionError("interval view needs a 1D set")
    if isinstance(s, Singleton):
        v = float(s.point[0])
        raw = [(v, v)]
    elif isinstance(s, Box):
        raw = [(float(s.lo[0]), float(s.hi[0]))]
    elif isinstance(s, FinitePoints):
        raw = [(float(v), float(v)) for v in s.points[:, 0]]
    elif isinstance(s, HalfLine1D):
        raw = [(s.anchor, _INF)] if s.direction > 0 else [(-_INF, s.anchor)]
    elif isinstance(s, IntervalUnion1D):
        raw = list(s.intervals)
    else:
        raise TypeError(f"unsupported set {s!r}")
    return _merge(raw)


def _merge(raw):
    out = []
    for a, b in sorted(raw):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def from_intervals(raw):
    """Canonical 1D set from a list of closed intervals."""
    ivs = _merge([(float(a), float(b)) for a, b in raw if a <= b])
    if not ivs:
        return Empty(1)
    if len(ivs) == 1:
        a, b = ivs[0]
        if a == b:
            return Singleton([a])
        if math.isfinite(a) and math.isfinite(b):
            return Box([a], [b])
        if math.isfinite(a):
            return HalfLine1D(a, 1)
        if math.isfinite(b):
            return HalfLine1D(b, -1)
        return IntervalUnion1D(ivs)
    if all(a == b for a, b in ivs):
        return FinitePoints([[a] for a, _ in ivs])
    return IntervalUnion1D(ivs)


def _interval_distance(x, ivs):
    return min(max(a - x, 0.0, x - b) for a, b in ivs)


# -- public operations --------------------------------------------------------

def distance(p, s):
    """Euclidean distance from point `p` to set `s` (``inf`` for Empty)."""
    p = as_point(p)
    if s.dim is not None:
        _check_point(p, s)
    if s.is_empty:
        return _INF
    if isinstance(s, Singleton):
        return float(np.linalg.norm(p - s.point))
    if isinstance(s, Box):
        return float(np.linalg.norm(p - np.clip(p, s.lo, s.hi)))
    if isinstance(s, FinitePoints):
        return float(np.min(np.linalg.norm(s.points - p, axis=1)))
    return _interval_distance(float(p[0]), intervals_1d(s))


def _check_point(p, s):
    if p.size != s.dim:
        raise DimensionError(f"point of dimension {p.size} vs set of dimension {s.dim}")


def contains(s, p, tol=TOL):
    return distance(p, s) <= tol


def project(p, s):
    """A nearest point of `s` to `p`.

    Ties go to the lowest index for FinitePoints and to the smaller
    coordinate for 1D interval unions.
    """
    p = as_point(p)
    if s.is_empty:
        raise EmptySetError("cannot project onto the empty set")
    _check_point(p, s)
    if isinstance(s, Singleton):
        return s.point
    if isinstance(s, Box):
        return as_point(np.clip(p, s.lo, s.hi))
    if isinstance(s, FinitePoints):
        # argmin returns the first minimiser
        return as_point(s.points[int(np.argmin(np.linalg.norm(s.points - p, axis=1)))])
    x = float(p[0])
    cands = [min(max(x, a), b) for a, b in intervals_1d(s)]
    dists = [abs(x - c) for c in cands]
    best = min(dists)
    return as_point([min(c for c, d in zip(cands, dists) if d - best <= 1e-15 * max(1.0, abs(x)))])


def excess(c, d, detail=False):
    """One-sided excess ``sup_{x in c} d(x, d)``.

    Conventions: ``ex(Empty, D) = 0`` for nonempty D and ``ex(C, Empty) = inf``.
    With ``detail=True`` a pair ``(value, reason)`` is returned where reason is
    ``"finite"``, ``"empty-source"``, ``"empty-target"`` or ``"unbounded"``
    (an unbounded part of `c` escapes `d`).
    """
    _dims_agree(c, d)
    if d.is_empty:
        value, reason = _INF, "empty-target"
    elif c.is_empty:
        value, reason = 0.0, "empty-source"
    elif c.dim == 1:
        value, reason = _excess_1d(intervals_1d(c), intervals_1d(d))
    else:
        value, reason = _excess_nd(c, d), "finite"
    return (value, reason) if detail else value


def _excess_1d(cs, ds):
    worst = 0.0
    for a, b in cs:
        if a == -_INF:
            if ds[0][0] > -_INF:
                return _INF, "unbounded"
            a = min(b, ds[0][1])
        if b == _INF:
            if ds[-1][1] < _INF:
                return _INF, "unbounded"
            b = max(a, ds[-1][0])
        cands = [a, b]
        for (_, g0), (g1, _) in zip(ds, ds[1:]):
            mid = 0.5 * (g0 + g1)
            if a < mid < b:
                cands.append(mid)
        worst = max(worst, max(_interval_distance(x, ds) for x in cands))
    return worst, "finite"


def _excess_nd(c, d):
    if isinstance(c, Singleton):
        return distance(c.point, d)
    if isinstance(c, FinitePoints):
        return max(distance(p, d) for p in c.points)
    if not isinstance(c, Box):
        raise TypeError(f"unsupported set {c!r}")
    if d.is_convex:
        # convex distance function: the sup over a box sits at a vertex
        return max(distance(v, d) for v in c.vertices())
    return _box_over_points(c, d.points)


def _box_over_points(box, pts):
    """max over the box of min_i |x - p_i|, exactly.

    The maximum of the lower envelope restricted to a face of the box lies
    at a point equidistant to (face dimension + 1) of the sites, so it is
    enough to enumerate faces and site subsets.
    """
    pts = np.unique(pts, axis=0)
    dim = box.dim
    best = 0.0
    # each coordinate is fixed at lo, fixed at hi, or free
    for pattern in itertools.product((0, 1, 2), repeat=dim):
        free = [i for i, t in enumerate(pattern) if t == 2]
        if any(box.lo[i] == box.hi[i] for i in free):
            continue
        base = np.where(np.array(pattern) == 1, box.hi, box.lo).astype(float)
        k = len(free)
        if k == 0:
            best = max(best, float(np.min(np.linalg.norm(pts - base, axis=1))))
            continue
        for subset in itertools.combinations(range(len(pts)), k + 1):
            p0 = pts[subset[0]]
            rows, rhs = [], []
            for j in subset[1:]:
                pj = pts[j]
                # |x-p0|^2 = |x-pj|^2  <=>  2(pj-p0).x = |pj|^2 - |p0|^2
                rows.append(2.0 * (pj - p0)[free])
                fixed = 2.0 * np.dot(np.delete(pj - p0, free), np.delete(base, free))
                rhs.append(pj @ pj - p0 @ p0 - fixed)
            m = np.array(rows)
            if abs(np.linalg.det(m)) < 1e-14:
                continue
            sol = np.linalg.solve(m, np.array(rhs))
            x = base.copy()
            x[free] = sol
            if np.all(x >= box.lo - 1e-12) and np.all(x <= box.hi + 1e-12):
                x = np.clip(x, box.lo, box.hi)
                best = max(best, float(np.min(np.linalg.norm(pts - x, axis=1))))
    return best


def same_set(a, b, tol=TOL):
    """Two sets coincide (mutual excess within tol)."""
    if a.is_empty or b.is_empty:
        return a.is_empty and b.is_empty
    return excess(a, b) <= tol and excess(b, a) <= tol


def scale_set(s, factor):
    """The set ``{factor * y : y in s}``."""
    factor = float(factor)
    if not math.isfinite(factor):
        raise ValueError("scale factor must be finite")
    if s.is_empty:
        return s
    if factor == 0.0:
        return Singleton(np.zeros(s.dim))
    if isinstance(s, Singleton):
        return Singleton(factor * s.point)
    if isinstance(s, Box):
        a, b = factor * s.lo, factor * s.hi
        return Box(np.minimum(a, b), np.maximum(a, b))
    if isinstance(s, FinitePoints):
        return FinitePoints(factor * s.points)
    return from_intervals([_scale_iv(a, b, factor) for a, b in intervals_1d(s)])


def _scale_iv(a, b, f):
    lo, hi = f * a, f * b
    return (min(lo, hi), max(lo, hi))


def minkowski_sum(a, b):
    """``{u + v : u in a, v in b}`` when representable."""
    dim = _dims_agree(a, b)
    if a.is_empty or b.is_empty:
        return Empty(dim)
    if dim == 1:
        return from_intervals([(a0 + b0, a1 + b1)
                               for a0, a1 in intervals_1d(a)
                               for b0, b1 in intervals_1d(b)])
    if isinstance(b, Singleton):
        a, b = b, a
    if isinstance(a, Singleton):
        return _translate(b, a.point)
    if isinstance(a, Box) and isinstance(b, Box):
        return Box(a.lo + b.lo, a.hi + b.hi)
    if isinstance(a, FinitePoints) and isinstance(b, FinitePoints):
        sums = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, dim)
        return FinitePoints(np.unique(sums, axis=0))
    for u, v in ((a, b), (b, a)):
        if isinstance(u, FinitePoints) and len(np.unique(u.points, axis=0)) == 1:
            return _translate(v, u.points[0])
    raise RepresentationError(f"Minkowski sum of {type(a).__name__} and "
                              f"{type(b).__name__} is not representable in {dim}D")


def _translate(s, v):
    if isinstance(s, Singleton):
        return Singleton(s.point + v)
    if isinstance(s, Box):
        return Box(s.lo + v, s.hi + v)
    if isinstance(s, FinitePoints):
        return FinitePoints(s.points + v)
    raise TypeError(f"unsupported set {s!r}")


def set_distance(a, b):
    """``inf {|u - v| : u in a, v in b}``."""
    diff = minkowski_sum(a, scale_set(b, -1.0))
    if diff.is_empty:
        return _INF
    return distance(np.zeros(diff.dim), diff)


def intersect_ball(s, center, radius):
    """``s`` intersected with the closed Euclidean ball B(center, radius)."""
    center = as_point(center)
    if s.is_empty:
        return s
    _check_point(center, s)
    if s.dim == 1:
        c = float(center[0])
        return from_intervals([(max(a, c - radius), min(b, c + radius))
                               for a, b in intervals_1d(s)])
    if isinstance(s, Singleton):
        return s if np.linalg.norm(s.point - center) <= radius else Empty(s.dim)
    if isinstance(s, FinitePoints):
        keep = s.points[np.linalg.norm(s.points - center, axis=1) <= radius]
        return FinitePoints(keep) if len(keep) else Empty(s.dim)
    if distance(center, s) > radius:
        return Empty(s.dim)
    far = max(np.linalg.norm(v - center) for v in s.vertices())
    if far <= radius:
        return s
    raise RepresentationError("a box cut by a Euclidean ball is not representable in >= 2D")


def extreme_structure(s):
    """Extreme points (array) and recession directions (list) of a set.

    For a closed convex variant every linear functional bounded below on the
    set attains its infimum at one of the points; it is unbounded below iff
    it is negative on one of the directions.  Non-convex 1D unions are
    reported through the pieces' endpoints, which is what linear functionals
    see as well.
    """
    if s.is_empty:
        return np.empty((0, s.dim or 0)), []
    if isinstance(s, Singleton):
        return s.point[None, :], []
    if isinstance(s, Box):
        return s.vertices(), []
    if isinstance(s, FinitePoints):
        return np.asarray(s.points), []
    pts, rays = set(), []
    for a, b in intervals_1d(s):
        for v in (a, b):
            if math.isfinite(v):
                pts.add(v)
        if a == -_INF and [-1.0] not in rays:
            rays.append([-1.0])
        if b == _INF and [1.0] not in rays:
            rays.append([1.0])
    return np.array(sorted(pts), dtype=float).reshape(-1, 1), [np.array(r) for r in rays]
