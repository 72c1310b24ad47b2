"""Set-valued operator models, resolvents and monotonicity diagnostics.

A model maps a point of R^n to a :class:`~ppalab.setgeom.ValueSet`.  The
resolvent ``J_{gamma A}(x) = (Id + gamma A)^{-1}(x)`` is available in closed
form for every maximally monotone model; 1D sums fall back to a set-valued
bisection on ``z -> z + gamma A(z)``.
"""

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .exceptions import (DimensionError, DomainError, NoDataError,
                         PreconditionError, RepresentationError, ResolventError)
from .setgeom import (TOL, Box, Empty, FinitePoints, HalfLine1D,
                      IntervalUnion1D, Singleton, as_point, distance,
                      extreme_structure, from_intervals, intervals_1d,
                      minkowski_sum, scale_set, set_distance)

BISECTION_TOL = 1e-12
BISECTION_MAX_ITER = 200
RANK_THRESHOLD = 1e-10


def _soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _bracket_small(lo, hi, tol=BISECTION_TOL):
    # width below tol, and below tol relative to the bracket when it sits near 0
    return hi - lo <= tol * min(1.0, max(abs(lo), abs(hi)))


def _bisect_increasing(g, lo, hi, tol=BISECTION_TOL, max_iter=BISECTION_MAX_ITER):
    """Root of a nondecreasing scalar function bracketed by [lo, hi]."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo > 0.0 or ghi < 0.0:
        raise ResolventError(f"bisection bracket [{lo}, {hi}] does not contain a root")
    for _ in range(max_iter):
        if _bracket_small(lo, hi, tol):
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid
        if gm > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


class SetValuedMap:
    """Base class for operator models ``A: R^n => R^m``."""

    dim_in = None
    dim_out = None
    monotone = False

    def evaluate(self, x):
        raise NotImplementedError

    def resolvent(self, gamma, x):
        raise ResolventError(f"{self!r} has no resolvent (not a supported maximally monotone model)")

    def domain_hull_1d(self):
        return (-math.inf, math.inf)

    def inverse(self):
        return InverseOf(self)

    @property
    def dim(self):
        return self.dim_in


class ZeroMap(SetValuedMap):
    monotone = True

    def __init__(self, dim=1):
        self.dim_in = self.dim_out = int(dim)

    def evaluate(self, x):
        return Singleton(np.zeros(self.dim_out))

    def resolvent(self, gamma, x):
        return as_point(x)

    def __repr__(self):
        return f"ZeroMap(dim={self.dim_in})"


class Identity(SetValuedMap):
    monotone = True

    def __init__(self, dim=1):
        self.dim_in = self.dim_out = int(dim)

    def evaluate(self, x):
        return Singleton(x)

    def resolvent(self, gamma, x):
        return as_point(np.asarray(x) / (1.0 + gamma))

    def __repr__(self):
        return f"Identity(dim={self.dim_in})"


class Linear(SetValuedMap):
    """``x -> M x + offset``.  Monotone iff M is square with a PSD symmetric part."""

    def __init__(self, matrix, offset=None):
        m = np.atleast_2d(np.array(matrix, dtype=float))
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        m.setflags(write=False)
        self.matrix = m
        self.dim_out, self.dim_in = m.shape
        self.offset = as_point(np.zeros(self.dim_out) if offset is None else offset, self.dim_out)
        sym = 0.5 * (m + m.T) if m.shape[0] == m.shape[1] else None
        self.monotone = sym is not None and np.linalg.eigvalsh(sym).min() >= -1e-12

    def evaluate(self, x):
        return Singleton(self.matrix @ x + self.offset)

    def resolvent(self, gamma, x):
        if not self.monotone:
            raise ResolventError("linear model is not monotone (needs square M with M + M^T PSD)")
        lhs = np.eye(self.dim_in) + gamma * self.matrix
        return as_point(np.linalg.solve(lhs, np.asarray(x) - gamma * self.offset))

    def __repr__(self):
        return f"Linear({self.matrix.tolist()})"


class _SignLike(SetValuedMap):
    monotone = True

    def __init__(self, dim=1):
        self.dim_in = self.dim_out = int(dim)

    def evaluate(self, x):
        x = np.asarray(x)
        if np.all(x != 0):
            return Singleton(np.sign(x))
        lo = np.where(x > 0, 1.0, -1.0)
        hi = np.where(x < 0, -1.0, 1.0)
        return Box(lo, hi)

    def resolvent(self, gamma, x):
        # x in z + gamma*Sign(z): shrink by gamma, stop at 0
        return as_point(_soft_threshold(np.asarray(x), gamma))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim_in})"


class SignComponentwise(_SignLike):
    """Componentwise Sign, with Sign(0) = [-1, 1]."""


class SubgradAbsSum(_SignLike):
    """Subdifferential of ``x -> sum |x_i|``."""


class PowerGradient(SetValuedMap):
    """``x -> x**p`` componentwise for odd p, the gradient of sum x_i^(p+1)/(p+1)."""

    monotone = True

    def __init__(self, p=3, dim=1):
        if int(p) != p or p < 1 or p % 2 == 0 or p > 9:
            raise ValueError("PowerGradient needs an odd integer power 1 <= p <= 9")
        self.p = int(p)
        self.dim_in = self.dim_out = int(dim)

    def evaluate(self, x):
        return Singleton(np.asarray(x) ** self.p)

    def resolvent(self, gamma, x):
        p = self.p
        out = []
        for xi in np.asarray(x, dtype=float):
            lo, hi = min(0.0, xi), max(0.0, xi)
            out.append(_bisect_increasing(lambda z: z + gamma * z ** p - xi, lo, hi))
        return as_point(out)

    def __repr__(self):
        return f"PowerGradient(p={self.p}, dim={self.dim_in})"


_RAY_DIRECTIONS = {"up": (0.0, 1.0), "down": (0.0, -1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0)}
_REFLECTED = {"up": "right", "right": "up", "down": "left", "left": "down"}


@dataclass(frozen=True)
class GraphPiece:
    """A closed segment ``start -> end`` or an axis-parallel ray from ``start``.

    Non-vertical segments and horizontal rays may exclude an endpoint, which
    is only useful for building counterexamples with a non-closed graph.
    """

    start: tuple
    end: tuple = None
    direction: str = None
    include_start: bool = True
    include_end: bool = True

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if (self.end is None) == (self.direction is None):
            raise ValueError("a graph piece is either a segment (end) or a ray (direction)")
        if self.end is not None:
            object.__setattr__(self, "end", tuple(float(v) for v in self.end))
        elif self.direction not in _RAY_DIRECTIONS:
            raise ValueError(f"ray direction must be one of {sorted(_RAY_DIRECTIONS)}")
        if not all(math.isfinite(v) for v in self.start + (self.end or ())):
            raise ValueError("graph piece coordinates must be finite")
        if not (self.include_start and self.include_end) and self.is_vertical:
            raise ValueError("only non-vertical pieces may exclude an endpoint")

    @classmethod
    def segment(cls, p, q, include_start=True, include_end=True):
        return cls(tuple(p), tuple(q), None, include_start, include_end)

    @classmethod
    def ray(cls, p, direction, include_start=True):
        return cls(tuple(p), None, direction, include_start)

    @property
    def is_vertical(self):
        if self.end is None:
            return self.direction in ("up", "down")
        return self.start[0] == self.end[0]

    def reflect(self):
        if self.end is None:
            return GraphPiece(self.start[::-1], None, _REFLECTED[self.direction],
                              self.include_start)
        return GraphPiece(self.start[::-1], self.end[::-1], None,
                          self.include_start, self.include_end)

    def x_extent(self):
        x0 = self.start[0]
        if self.end is not None:
            return (min(x0, self.end[0]), max(x0, self.end[0]))
        return {"up": (x0, x0), "down": (x0, x0),
                "right": (x0, math.inf), "left": (-math.inf, x0)}[self.direction]

    def is_nondecreasing(self):
        if self.end is None:
            return True
        return (self.end[0] - self.start[0]) * (self.end[1] - self.start[1]) >= 0.0

    def _on_x_range(self, x):
        """Segment parameter t in [0, 1] (or ray offset) when x is covered."""
        x0, y0 = self.start
        snap = 1e-12 * max(1.0, abs(x))
        if self.end is None:
            dx, _ = _RAY_DIRECTIONS[self.direction]
            s = (x - x0) * dx
            if abs(s) <= snap:
                return 0.0 if self.include_start else None
            return s if s > 0 else None
        x1 = self.end[0]
        t = (x - x0) / (x1 - x0)
        if abs(x - x0) <= snap:
            return 0.0 if self.include_start else None
        if abs(x - x1) <= snap:
            return 1.0 if self.include_end else None
        return t if 0.0 < t < 1.0 else None

    def y_intervals(self, x):
        """Closed y-intervals of the piece above abscissa x."""
        x0, y0 = self.start
        if self.is_vertical:
            if abs(x - x0) > 1e-12 * max(1.0, abs(x)):
                return []
            if self.end is not None:
                return [(min(y0, self.end[1]), max(y0, self.end[1]))]
            return [(y0, math.inf)] if self.direction == "up" else [(-math.inf, y0)]
        t = self._on_x_range(x)
        if t is None:
            return []
        if self.end is None:
            return [(y0, y0)]
        y = y0 + t * (self.end[1] - y0)
        return [(y, y)]

    def line_hits(self, gamma, x):
        """Abscissae z on the piece with z + gamma*y = x."""
        x0, y0 = self.start
        if self.is_vertical:
            y = (x - x0) / gamma
            if self.end is not None:
                lo, hi = min(y0, self.end[1]), max(y0, self.end[1])
            else:
                lo, hi = (y0, math.inf) if self.direction == "up" else (-math.inf, y0)
            snap = 1e-12 * max(1.0, abs(y))
            return [x0] if lo - snap <= y <= hi + snap else []
        if self.end is None:
            z = x - gamma * y0
        else:
            slope = (self.end[1] - y0) / (self.end[0] - x0)
            if 1.0 + gamma * slope == 0.0:
                return []
            z = (x - gamma * y0 + gamma * slope * x0) / (1.0 + gamma * slope)
        return [z] if self._on_x_range(z) is not None else []

    def contains(self, x, y, tol=TOL):
        return any(a - tol <= y <= b + tol for a, b in self.y_intervals(x))


class PiecewiseGraph1D(SetValuedMap):
    """A 1D map given by its graph, a finite union of segments and rays."""

    dim_in = dim_out = 1

    def __init__(self, pieces):
        pieces = tuple(p if isinstance(p, GraphPiece) else GraphPiece(**p) for p in pieces)
        if not pieces:
            raise ValueError("a piecewise graph needs at least one piece")
        self.pieces = pieces

    @property
    def is_closed(self):
        for i, piece in enumerate(self.pieces):
            ends = [(piece.start, piece.include_start)]
            if piece.end is not None:
                ends.append((piece.end, piece.include_end))
            for (px, py), included in ends:
                if included:
                    continue
                if not any(o.contains(px, py) for j, o in enumerate(self.pieces) if j != i):
                    return False
        return True

    @property
    def monotone(self):
        return self.is_closed and all(p.is_nondecreasing() for p in self.pieces)

    def evaluate(self, x):
        xv = float(np.asarray(x).reshape(-1)[0])
        ivs = [iv for p in self.pieces for iv in p.y_intervals(xv)]
        if not ivs:
            raise DomainError(f"{xv} is outside the domain of the graph")
        return from_intervals(ivs)

    def resolvent(self, gamma, x):
        if not self.monotone:
            raise ResolventError("graph is not closed and nondecreasing, resolvent rejected")
        xv = float(np.asarray(x).reshape(-1)[0])
        hits = sorted(z for p in self.pieces for z in p.line_hits(gamma, xv))
        if not hits:
            raise ResolventError(f"line z + {gamma}*y = {xv} misses the graph (not maximal)")
        if hits[-1] - hits[0] > 1e-9 * max(1.0, abs(xv)):
            raise ResolventError(f"line z + {gamma}*y = {xv} meets the graph at several abscissae")
        return as_point([hits[0]])

    def reflect(self):
        return PiecewiseGraph1D([p.reflect() for p in self.pieces])

    def domain_hull_1d(self):
        ext = [p.x_extent() for p in self.pieces]
        return (min(a for a, _ in ext), max(b for _, b in ext))

    def __repr__(self):
        return f"PiecewiseGraph1D({len(self.pieces)} pieces)"


class Scaled(SetValuedMap):
    def __init__(self, factor, inner):
        factor = float(factor)
        if not math.isfinite(factor):
            raise ValueError("scale factor must be finite")
        self.factor, self.inner = factor, inner
        self.dim_in, self.dim_out = inner.dim_in, inner.dim_out
        self.monotone = factor >= 0 and inner.monotone

    def evaluate(self, x):
        return scale_set(self.inner.evaluate(x), self.factor)

    def resolvent(self, gamma, x):
        if self.factor < 0:
            raise ResolventError("negatively scaled model is not monotone")
        if self.factor == 0:
            return as_point(x)
        return self.inner.resolvent(gamma * self.factor, x)

    def domain_hull_1d(self):
        return self.inner.domain_hull_1d()

    def __repr__(self):
        return f"Scaled({self.factor}, {self.inner!r})"


class Sum(SetValuedMap):
    def __init__(self, terms):
        terms = tuple(terms)
        if not terms:
            raise ValueError("Sum needs at least one term")
        dims = {(t.dim_in, t.dim_out) for t in terms}
        if len(dims) != 1:
            raise DimensionError("Sum members must share dimensions")
        self.terms = terms
        self.dim_in, self.dim_out = dims.pop()
        self.monotone = all(t.monotone for t in terms)

    def evaluate(self, x):
        return reduce(minkowski_sum, (t.evaluate(x) for t in self.terms))

    def _affine_parts(self):
        mats, offs = [], []
        for t in self.terms:
            if isinstance(t, ZeroMap):
                continue
            if isinstance(t, Identity):
                mats.append(np.eye(t.dim_in))
                offs.append(np.zeros(t.dim_in))
            elif isinstance(t, Linear):
                mats.append(t.matrix)
                offs.append(t.offset)
            else:
                return None
        if not mats:
            return Linear(np.zeros((self.dim_in, self.dim_in)))
        return Linear(sum(mats), sum(offs))

    def resolvent(self, gamma, x):
        if not self.monotone:
            raise ResolventError("sum has a non-monotone term")
        affine = self._affine_parts()
        if affine is not None:
            return affine.resolvent(gamma, x)
        if self.dim_in == 1:
            return resolvent_by_bisection(self, gamma, x)
        raise ResolventError("resolvent of a multi-dimensional non-affine sum is not supported")

    def domain_hull_1d(self):
        hulls = [t.domain_hull_1d() for t in self.terms]
        return (max(a for a, _ in hulls), min(b for _, b in hulls))

    def __repr__(self):
        return f"Sum({list(self.terms)!r})"


class InverseOf(SetValuedMap):
    """The inverse map ``y -> {x : y in A(x)}``."""

    def __init__(self, inner):
        self.inner = inner
        self.dim_in, self.dim_out = inner.dim_out, inner.dim_in
        self.monotone = inner.monotone

    def evaluate(self, y):
        inner = self.inner
        y = np.asarray(y, dtype=float)
        if isinstance(inner, InverseOf):
            return inner.inner.evaluate(y)
        if isinstance(inner, PiecewiseGraph1D):
            return inner.reflect().evaluate(y)
        if isinstance(inner, Identity):
            return Singleton(y)
        if isinstance(inner, PowerGradient):
            return Singleton(np.sign(y) * np.abs(y) ** (1.0 / inner.p))
        if isinstance(inner, Scaled):
            if inner.factor == 0.0:
                return InverseOf(ZeroMap(inner.dim_in)).evaluate(y)
            return InverseOf(inner.inner).evaluate(y / inner.factor)
        if isinstance(inner, ZeroMap):
            if np.any(y != 0):
                raise DomainError("ZeroMap only reaches 0")
            if inner.dim_in == 1:
                return IntervalUnion1D([(-math.inf, math.inf)])
            raise RepresentationError("preimage of 0 under ZeroMap is the whole space")
        if isinstance(inner, _SignLike):
            return _sign_inverse(y)
        if isinstance(inner, Linear):
            return _linear_inverse(inner, y)
        raise RepresentationError(f"inverse images of {inner!r} are not representable")

    def resolvent(self, gamma, x):
        # Moreau: J_{gamma A^-1}(x) = x - gamma * J_{A/gamma}(x/gamma)
        if not self.inner.monotone:
            raise ResolventError("inverse of a non-monotone model")
        x = np.asarray(x, dtype=float)
        # exact forms where rounding in the identity would land beside a kink
        if isinstance(self.inner, _SignLike):
            return as_point(np.clip(x, -1.0, 1.0))
        if isinstance(self.inner, PiecewiseGraph1D):
            return self.inner.reflect().resolvent(gamma, x)
        return as_point(x - gamma * self.inner.resolvent(1.0 / gamma, x / gamma))

    def domain_hull_1d(self):
        inner = self.inner
        if isinstance(inner, PiecewiseGraph1D):
            return inner.reflect().domain_hull_1d()
        if isinstance(inner, _SignLike):
            return (-1.0, 1.0)
        return (-math.inf, math.inf)

    def inverse(self):
        return self.inner

    def __repr__(self):
        return f"InverseOf({self.inner!r})"


def _sign_inverse(y):
    comps = []
    for v in y:
        if abs(v) > 1.0:
            raise DomainError(f"{v} is outside the range [-1, 1] of Sign")
        if v == 1.0:
            comps.append((0.0, math.inf))
        elif v == -1.0:
            comps.append((-math.inf, 0.0))
        else:
            comps.append((0.0, 0.0))
    if len(comps) == 1:
        return from_intervals(comps)
    if all(a == b for a, b in comps):
        return Singleton(np.zeros(len(comps)))
    raise RepresentationError("unbounded multi-dimensional preimage of Sign")


def _linear_inverse(lin, y):
    m = lin.matrix
    rhs = y - lin.offset
    sol, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    if np.linalg.norm(m @ sol - rhs) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
        raise DomainError("point is outside the range of the linear map")
    if np.linalg.matrix_rank(m) < lin.dim_in:
        raise RepresentationError("preimage under a rank-deficient matrix is an affine subspace")
    return Singleton(sol)


class CallableMap(SetValuedMap):
    """A model defined by a function returning a ValueSet.

    Used for hand-built examples that are not compositions of the other
    models.  It has no resolvent unless one is supplied.
    """

    def __init__(self, func, dim_in, dim_out=None, name="callable", resolvent=None,
                 monotone=False):
        self.func = func
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out or dim_in)
        self.name = name
        self._resolvent = resolvent
        self.monotone = monotone and resolvent is not None

    def evaluate(self, x):
        return self.func(np.asarray(x, dtype=float))

    def resolvent(self, gamma, x):
        if self._resolvent is None:
            return super().resolvent(gamma, x)
        return as_point(self._resolvent(gamma, np.asarray(x, dtype=float)))

    def __repr__(self):
        return f"CallableMap({self.name})"


def resolvent_by_bisection(model, gamma, x):
    """Resolvent of a 1D monotone model with interval-valued images.

    Bisection on z for the set-valued, nondecreasing map ``z -> z + gamma*A(z)``:
    ``z`` is too large when x lies below that set and too small when above.
    """
    xv = float(np.asarray(x).reshape(-1)[0])
    dlo, dhi = model.domain_hull_1d()

    def side(z):
        ivs = intervals_1d(minkowski_sum(Singleton([z]), scale_set(model.evaluate([z]), gamma)))
        if xv < ivs[0][0]:
            return 1
        if xv > ivs[-1][1]:
            return -1
        return 0

    start = min(max(xv, dlo), dhi)
    s0 = side(start)
    if s0 == 0:
        return as_point([start])
    step, z, bound = max(1.0, abs(xv)), start, (dlo if s0 > 0 else dhi)
    for _ in range(BISECTION_MAX_ITER):
        z = max(z - step, dlo) if s0 > 0 else min(z + step, dhi)
        sz = side(z)
        if sz == 0:
            return as_point([z])
        if sz != s0:
            break
        if z == bound:
            raise ResolventError(f"no resolvent point found for x={xv} (not maximal)")
        step *= 2.0
    else:
        raise ResolventError("could not bracket the resolvent")
    lo, hi = (z, start) if s0 > 0 else (start, z)
    for _ in range(BISECTION_MAX_ITER):
        if _bracket_small(lo, hi):
            break
        mid = 0.5 * (lo + hi)
        sm = side(mid)
        if sm == 0:
            return as_point([mid])
        if sm > 0:
            hi = mid
        else:
            lo = mid
    return as_point([0.5 * (lo + hi)])


# -- convex functions --------------------------------------------------------

class ConvexFunction:
    """A proper lsc convex function with finite infimum and a subdifferential model."""

    dim = None
    inf_value = None

    def value(self, x):
        raise NotImplementedError

    def subdifferential(self):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


class Quadratic(ConvexFunction):
    """``f(x) = 1/2 x^T Q x + b^T x`` with Q symmetric PSD and b in range(Q)."""

    def __init__(self, q, b=None):
        q = np.atleast_2d(np.array(q, dtype=float))
        if q.shape[0] != q.shape[1] or not np.allclose(q, q.T, atol=1e-12):
            raise ValueError("Q must be a symmetric square matrix")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        self.q = q
        self.dim = q.shape[0]
        self.b = as_point(np.zeros(self.dim) if b is None else b, self.dim)
        xmin, *_ = np.linalg.lstsq(q, -self.b, rcond=None)
        if np.linalg.norm(q @ xmin + self.b) > 1e-9 * max(1.0, np.linalg.norm(self.b)):
            raise ValueError("b outside range(Q): the quadratic is unbounded below")
        self.inf_value = float(self.value(xmin))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.q @ x + self.b @ x)

    def subdifferential(self):
        return Linear(self.q, self.b)


class ZeroFunction(ConvexFunction):
    """``f = 0``; every point is a minimiser."""

    inf_value = 0.0

    def __init__(self, dim=1):
        self.dim = int(dim)

    def value(self, x):
        return 0.0

    def subdifferential(self):
        return ZeroMap(self.dim)


class AbsSum(ConvexFunction):
    inf_value = 0.0

    def __init__(self, dim=1):
        self.dim = int(dim)

    def value(self, x):
        return float(np.sum(np.abs(x)))

    def subdifferential(self):
        return SubgradAbsSum(self.dim)


class PowerEven(ConvexFunction):
    """``f(x) = sum x_i^(p+1) / (p+1)`` for odd p (so the exponent p+1 is even)."""

    inf_value = 0.0

    def __init__(self, p=3, dim=1):
        self.grad = PowerGradient(p, dim)
        self.p, self.dim = self.grad.p, int(dim)

    def value(self, x):
        return float(np.sum(np.asarray(x, dtype=float) ** (self.p + 1)) / (self.p + 1))

    def subdifferential(self):
        return self.grad


class LeastSquares(ConvexFunction):
    """``f(x) = 1/2 |A x - b|^2``."""

    def __init__(self, a, b):
        a = np.atleast_2d(np.array(a, dtype=float))
        self.a = a
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if self.b.size != a.shape[0]:
            raise DimensionError("b must have as many entries as A has rows")
        self.dim = a.shape[1]
        resid = self.b - a @ (np.linalg.pinv(a) @ self.b)
        self.inf_value = float(0.5 * resid @ resid)

    def value(self, x):
        r = self.a @ np.asarray(x, dtype=float) - self.b
        return float(0.5 * r @ r)

    def subdifferential(self):
        return Linear(self.a.T @ self.a, -self.a.T @ self.b)


# -- public operations --------------------------------------------------------

def evaluate(model, x):
    """Image ``A(x)`` as a ValueSet."""
    return model.evaluate(as_point(x, model.dim_in))


def image(model, x):
    """Like :func:`evaluate` but points outside the domain give the empty set."""
    try:
        return evaluate(model, x)
    except DomainError:
        return Empty(model.dim_out)


def resolvent(model, gamma, x):
    """``J_{gamma A}(x)``, the unique z with ``x in z + gamma A(z)``."""
    gamma = float(gamma)
    if not gamma > 0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be positive and finite, got {gamma}")
    if isinstance(model, ConvexFunction):
        model = model.subdifferential()
    x = as_point(x, model.dim_in)
    if not model.monotone:
        raise ResolventError(f"{model!r} is not a supported maximally monotone model")
    return model.resolvent(gamma, x)


def preimage_distance(model, y, x):
    """``d(x, A^{-1}(y))``; affine preimages of linear maps are handled exactly."""
    x = as_point(x, model.dim_in)
    y = as_point(y, model.dim_out)
    if isinstance(model, ZeroMap):
        return 0.0 if not np.any(y) else math.inf
    if isinstance(model, Linear):
        m = model.matrix
        pinv = np.linalg.pinv(m)
        rhs = y - model.offset
        if np.linalg.norm(m @ (pinv @ rhs) - rhs) > 1e-9 * max(1.0, np.linalg.norm(rhs)):
            return math.inf
        return float(np.linalg.norm(pinv @ (m @ x - rhs)))
    try:
        return distance(x, model.inverse().evaluate(y))
    except DomainError:
        return math.inf


@dataclass(frozen=True)
class MonotoneVerdict:
    monotone: bool
    margin: float
    witness: tuple = None
    undecidable: bool = False
    pairs_used: int = 0


def _linear_range(s, direction):
    """(min, max) of <u, direction> over u in s."""
    pts, rays = extreme_structure(s)
    vals = pts @ direction
    lo, hi = float(vals.min()), float(vals.max())
    for r in rays:
        v = float(r @ direction)
        if v < 0:
            lo = -math.inf
        elif v > 0:
            hi = math.inf
    return lo, hi


def check_monotone(model, samples, tol=TOL):
    """Worst ``<u - v, x - y>`` over sample pairs and selections u, v.

    Exact for the supported images: the expression is linear in each
    selection, so its infimum sits at extreme points or runs off along a
    recession direction.
    """
    worst, witness, undecidable, used = math.inf, None, False, 0
    for x, y in samples:
        x, y = as_point(x, model.dim_in), as_point(y, model.dim_in)
        try:
            ax, ay = evaluate(model, x), evaluate(model, y)
        except DomainError:
            continue
        except RepresentationError:
            undecidable = True
            continue
        d = x - y
        lo_x, _ = _linear_range(ax, d)
        _, hi_y = _linear_range(ay, d)
        margin = lo_x - hi_y
        used += 1
        if margin < worst:
            worst, witness = margin, (x, y)
    if used == 0:
        raise NoDataError("no usable sample pairs")
    return MonotoneVerdict(worst >= -tol, worst, witness, undecidable, used)


def _differences(a, b):
    pa, ra = extreme_structure(a)
    pb, rb = extreme_structure(b)
    if ra or rb:
        return None
    return (pa[:, None, :] - pb[None, :, :]).reshape(-1, pa.shape[1])


@dataclass(frozen=True)
class OperatorPair:
    first: SetValuedMap
    second: SetValuedMap
    strong_modulus: float = 0.0

    def __post_init__(self):
        if self.first.dim_in != self.second.dim_in or self.first.dim_out != self.second.dim_out:
            raise DimensionError("pair members must share dimensions")
        if self.strong_modulus < 0:
            raise ValueError("strong modulus must be nonnegative")


@dataclass(frozen=True)
class PairVerdict:
    margin: float
    monotone: bool
    strong: bool
    meets_declared: bool
    witness: tuple = None
    skipped: int = 0
    undecidable: bool = False


def check_pair_monotone(pair, samples, tol=TOL):
    """Worst ``<B(x)-B(y), C(x)-C(y)> / |x-y|^2`` over samples and selections.

    Bilinear in the two increments, each ranging over a polytope, so the
    minimum is attained at pairs of vertex differences.
    """
    b, c = pair.first, pair.second
    worst, witness, skipped, used, undecidable = math.inf, None, 0, 0, False
    for x, y in samples:
        x, y = as_point(x, b.dim_in), as_point(y, b.dim_in)
        d2 = float((x - y) @ (x - y))
        if d2 == 0.0:
            skipped += 1
            continue
        try:
            db = _differences(evaluate(b, x), evaluate(b, y))
            dc = _differences(evaluate(c, x), evaluate(c, y))
        except DomainError:
            skipped += 1
            continue
        if db is None or dc is None:
            undecidable = True
            continue
        value = float((db @ dc.T).min()) / d2
        used += 1
        if value < worst:
            worst, witness = value, (x, y)
    if used == 0:
        raise NoDataError("all sample pairs were coincident or unusable")
    return PairVerdict(worst, worst >= -tol, worst > tol,
                       worst >= pair.strong_modulus - tol, witness, skipped, undecidable)


def check_coercive(model, samples):
    """Estimated coercivity modulus ``min |u - v| / |x - y|`` over samples."""
    worst, used = math.inf, 0
    for x, y in samples:
        x, y = as_point(x, model.dim_in), as_point(y, model.dim_in)
        dxy = float(np.linalg.norm(x - y))
        if dxy == 0.0:
            continue
        try:
            gap = set_distance(evaluate(model, x), evaluate(model, y))
        except DomainError:
            continue
        used += 1
        worst = min(worst, gap / dxy)
    if used == 0:
        raise NoDataError("all sample pairs were coincident or unusable")
    return worst


# -- matrices -------------------------------------------------------------

@dataclass(frozen=True)
class MatrixCertificate:
    """Constants showing that the inverse of a matrix is globally R-Lipschitz.

    ``lipschitz_l = transpose_norm / smallest_positive_eig`` where the
    eigenvalue is the smallest nonzero one of ``A^T A``.  Eigenvalues at or
    below the rank threshold are listed in ``discarded_eigs``.
    """

    lipschitz_l: float
    smallest_positive_eig: float
    transpose_norm: float
    range_basis: np.ndarray
    kernel_basis: np.ndarray
    rank: int
    discarded_eigs: tuple = ()

    def project_range(self, v):
        q = self.range_basis
        return q @ (q.T @ v) if q.shape[1] else np.zeros_like(v)

    def project_kernel(self, v):
        q = self.kernel_basis
        return q @ (q.T @ v) if q.shape[1] else np.zeros_like(v)


def matrix_r_lipschitz(a, threshold=RANK_THRESHOLD):
    a = np.atleast_2d(np.array(a, dtype=float))
    gram = a.T @ a
    eigvals, eigvecs = np.linalg.eigh(gram)
    keep = eigvals > threshold
    range_basis, kernel_basis = eigvecs[:, keep], eigvecs[:, ~keep]
    discarded = tuple(float(v) for v in eigvals[~keep])
    if not keep.any():
        return MatrixCertificate(0.0, 0.0, 0.0, range_basis, kernel_basis, 0, discarded)
    k = float(eigvals[keep].min())
    tnorm = float(math.sqrt(eigvals.max()))
    return MatrixCertificate(tnorm / k, k, tnorm, range_basis, kernel_basis,
                             int(keep.sum()), discarded)


def matched_preimage(a, cert, x, ybar, xprime, tol=1e-9):
    """A preimage of ``ybar`` close to ``x``.

    Keeps the kernel component of ``x`` and takes the range component of
    the known preimage ``xprime``; then ``|x - xbar| <= L |a x - ybar|``.
    """
    a = np.atleast_2d(np.array(a, dtype=float))
    x, xprime = np.asarray(x, dtype=float), np.asarray(xprime, dtype=float)
    ybar = np.asarray(ybar, dtype=float)
    if np.linalg.norm(a @ xprime - ybar) > tol * max(1.0, np.linalg.norm(ybar)):
        raise PreconditionError("xprime is not a preimage of ybar")
    return cert.project_range(xprime) + cert.project_kernel(x)
