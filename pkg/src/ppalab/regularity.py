"""Empirical regularity moduli and error-bound comparators.

All verdicts are evidence gathered on deterministic samples.  A verdict that
holds is not a proof; a failing verdict carries a concrete witness.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (FitError, NoDataError, PreconditionError,
                         RepresentationError)
from .operators import evaluate, image, preimage_distance
from .sampling import shell_scales, unit_ball_points
from .setgeom import TOL, as_point, distance, excess, intersect_ball

__all__ = [
    "ModulusFunction", "RegularityProbe", "RegularityVerdict", "HoffmanReport",
    "ClosedGraphVerdict", "estimate_modulus", "fit_modulus", "r_continuity_verdict",
    "check_calm", "check_metric_regularity", "check_metric_subregularity",
    "hoffman_consistency", "sum_modulus", "check_closed_graph_at_zero",
]

DEGENERATE_L = 1e-12
DEFAULT_CAP = 1e6


@dataclass(frozen=True)
class ModulusFunction:
    """A continuity modulus rho with its radius sigma.

    ``form`` is ``"lipschitz"`` (rho(r) = constant*r), ``"powerlaw"``
    (rho(r) = constant*r**exponent) or ``"tabulated"``.  Tabulated moduli are
    read as the step function taking the value of the first grid radius at or
    above r, which keeps them an upper envelope of the samples.
    """

    form: str
    constant: float = None
    exponent: float = None
    table: tuple = ()
    radius: float = math.inf
    degenerate: bool = False

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("modulus radius must be positive")
        if self.form == "lipschitz":
            if not self.constant > 0:
                raise ValueError("Lipschitz modulus needs a positive constant")
        elif self.form == "powerlaw":
            if not (self.constant > 0 and self.exponent > 0):
                raise ValueError("power-law modulus needs positive constant and exponent")
        elif self.form == "tabulated":
            table = tuple((float(r), float(v)) for r, v in self.table)
            rs = [r for r, _ in table]
            vs = [v for _, v in table]
            if rs != sorted(rs) or any(r < 0 for r in rs):
                raise ValueError("tabulated radii must be sorted and nonnegative")
            if any(b < a for a, b in zip(vs, vs[1:])) or any(v < 0 for v in vs):
                raise ValueError("tabulated modulus must be nonnegative and nondecreasing")
            object.__setattr__(self, "table", table)
        else:
            raise ValueError(f"unknown modulus form {self.form!r}")

    @classmethod
    def lipschitz(cls, constant, radius=math.inf, degenerate=False):
        return cls("lipschitz", float(constant), 1.0, (), radius, degenerate)

    @classmethod
    def power_law(cls, constant, exponent, radius=math.inf):
        return cls("powerlaw", float(constant), float(exponent), (), radius)

    @classmethod
    def tabulated(cls, pairs, radius=math.inf):
        return cls("tabulated", None, None, tuple(pairs), radius)

    def __call__(self, r):
        r = float(r)
        if r <= 0:
            return 0.0
        if self.form == "lipschitz":
            return self.constant * r
        if self.form == "powerlaw":
            return self.constant * r ** self.exponent
        for rt, v in self.table:
            if rt >= r * (1 - 1e-12):
                return v
        return math.inf

    @property
    def radii(self):
        return [r for r, _ in self.table]

    @property
    def values(self):
        return [v for _, v in self.table]


@dataclass(frozen=True)
class RegularityProbe:
    """Where and how densely to sample.

    ``sample_radius`` bounds the neighbourhood of the base point,
    ``ball_radius`` is the image-side localisation used by calmness, and
    ``decades`` sets how many powers of ten the geometric shells descend.
    """

    base_point: np.ndarray
    base_image_point: np.ndarray = None
    ball_radius: float = 1.0
    sample_radius: float = 1.0
    sample_count: int = 64
    seed: int = 0
    cap: float = DEFAULT_CAP
    decades: int = 8

    def __post_init__(self):
        object.__setattr__(self, "base_point", as_point(self.base_point))
        if self.base_image_point is not None:
            object.__setattr__(self, "base_image_point", as_point(self.base_image_point))
        if not (self.ball_radius > 0 and self.sample_radius > 0):
            raise ValueError("probe radii must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")


@dataclass(frozen=True)
class RegularityVerdict:
    property: str
    holds: bool
    constant: float
    witness: tuple = None
    samples_used: int = 0
    witness_ratios: tuple = ()
    note: str = "on samples"


def estimate_modulus(model, xbar, radii, probe):
    """Tabulated ``r -> max ex(A(x), A(xbar))`` over samples with |x - xbar| <= r."""
    xbar = as_point(xbar, model.dim_in)
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or radii != sorted(radii):
        raise PreconditionError("radii must be positive and increasing")
    if radii[-1] > probe.sample_radius * (1 + 1e-12):
        raise PreconditionError("largest radius exceeds the probe sample radius")
    base = image(model, xbar)
    if base.is_empty:
        raise PreconditionError("base point is outside the domain")
    unit = unit_ball_points(model.dim_in, probe.sample_count, probe.seed)
    table, running = [], 0.0
    for r in radii:
        for u in unit:
            running = max(running, excess(image(model, xbar + r * u), base))
            if running == math.inf:
                break
        table.append((r, running))
    return ModulusFunction.tabulated(table, radius=radii[-1])


def fit_modulus(tab, max_rel_error=0.25, lipschitz_band=0.05):
    """Fit ``c * r**p`` to a tabulated modulus in log-log space.

    Returns a Lipschitz modulus (constant = largest observed ratio rho/r) when
    the exponent is within `lipschitz_band` of 1, else a power law.  An
    all-zero table gives a degenerate Lipschitz modulus: any positive
    constant works.
    """
    if tab.form != "tabulated":
        raise FitError("fit needs a tabulated modulus")
    pairs = [(r, v) for r, v in tab.table if r > 0]
    if len(pairs) < 3:
        raise FitError("need at least 3 entries with positive radius")
    if any(not math.isfinite(v) for _, v in pairs):
        raise FitError("infinite excess in the table: not R-continuous on samples")
    if all(v == 0.0 for _, v in pairs):
        return ModulusFunction.lipschitz(DEGENERATE_L, tab.radius, degenerate=True)
    pos = np.array([(r, v) for r, v in pairs if v > 0])
    if len(pos) < 3:
        raise FitError("fewer than 3 positive entries to fit")
    lr, lv = np.log(pos[:, 0]), np.log(pos[:, 1])
    p, logc = np.polyfit(lr, lv, 1)
    c = math.exp(logc)
    rel = float(np.max(np.abs(c * pos[:, 0] ** p - pos[:, 1]) / pos[:, 1]))
    if rel > max_rel_error:
        raise FitError(f"power-law fit rejected, max relative error {rel:.3g}")
    if abs(p - 1.0) <= lipschitz_band:
        return ModulusFunction.lipschitz(float(np.max(pos[:, 1] / pos[:, 0])), tab.radius)
    return ModulusFunction.power_law(c, float(p), tab.radius)


def r_continuity_verdict(tab):
    """Summarise an estimated modulus as an R-continuity verdict."""
    try:
        fitted = fit_modulus(tab)
    except FitError as exc:
        return RegularityVerdict("RContinuous", False, math.inf, note=f"on samples: {exc}")
    prop = "RLipschitz" if fitted.form == "lipschitz" else "RContinuous"
    note = "on samples: degenerate, any positive modulus works" if fitted.degenerate else "on samples"
    return RegularityVerdict(prop, True, 0.0 if fitted.degenerate else fitted.constant,
                             samples_used=len(tab.table), note=note)


def _shell_points(center, dim, probe):
    unit = unit_ball_points(dim, probe.sample_count, probe.seed)
    for s in shell_scales(probe.sample_radius, probe.decades):
        for u in unit:
            yield center + s * u


def _ratio(num, den):
    """Error-bound ratio, or None when the pair carries no information."""
    if den == 0.0:
        return None if num == 0.0 else math.inf
    if math.isinf(den):
        return None if math.isinf(num) else 0.0
    return num / den


def _verdict(name, worst, witness, used, probe, ratios=(), seen=None):
    if used == 0:
        if not seen:
            raise NoDataError("no samples were evaluated")
        # every sample had 0/0 (or inf/inf): nothing can violate the bound
        return RegularityVerdict(name, True, 0.0, None, 0, tuple(ratios),
                                 "on samples: vacuous, every pair was uninformative")
    return RegularityVerdict(name, worst <= probe.cap, worst, witness, used, tuple(ratios))


def check_calm(model, probe):
    """Calmness constant ``sup ex(A(x) & B(ybar, eps), A(xbar)) / |x - xbar|``."""
    xbar, ybar = probe.base_point, probe.base_image_point
    if ybar is None:
        raise PreconditionError("calmness needs a base image point")
    base = evaluate(model, xbar)
    if distance(ybar, base) > TOL:
        raise PreconditionError("(xbar, ybar) is not on the graph")
    worst, witness, used = 0.0, None, 0
    for x in _shell_points(xbar, model.dim_in, probe):
        step = float(np.linalg.norm(x - xbar))
        if step == 0.0:
            continue
        local = intersect_ball(image(model, x), ybar, probe.ball_radius)
        ratio = excess(local, base) / step
        used += 1
        if witness is None or ratio > worst:
            worst, witness = ratio, (x, ybar)
    return _verdict("Calm", worst, witness, used, probe)


def check_metric_regularity(model, probe, witnesses=()):
    """Metric regularity constant ``sup d(x, A^-1(y)) / d(y, A(x))`` near (xbar, ybar).

    Explicit `witnesses` (x, y) are evaluated too and their ratios returned
    in order.
    """
    xbar, ybar = probe.base_point, probe.base_image_point
    if ybar is None:
        raise PreconditionError("metric regularity needs a base image point")
    if distance(ybar, evaluate(model, xbar)) > TOL:
        raise PreconditionError("(xbar, ybar) is not on the graph")
    n, m = model.dim_in, model.dim_out
    center = np.concatenate([xbar, ybar])
    worst, witness, used = 0.0, None, 0

    def pair_ratio(x, y):
        try:
            num = preimage_distance(model, y, x)
        except RepresentationError:
            return None
        return _ratio(num, distance(y, image(model, x)))

    seen = 0
    for z in _shell_points(center, n + m, probe):
        x, y = z[:n], z[n:]
        seen += 1
        r = pair_ratio(x, y)
        if r is None:
            continue
        used += 1
        if r > worst:
            worst, witness = r, (x, y)
    ratios = []
    for x, y in witnesses:
        r = pair_ratio(as_point(x, n), as_point(y, m))
        ratios.append(r)
        if r is not None:
            used += 1
            if r > worst:
                worst, witness = r, (as_point(x), as_point(y))
    return _verdict("MetricallyRegular", worst, witness, used, probe, ratios, seen)


def check_metric_subregularity(model, probe):
    """Subregularity constant ``sup d(x, A^-1(0)) / d(0, A(x))`` near xbar."""
    xbar = probe.base_point
    zero = np.zeros(model.dim_out)
    if distance(zero, image(model, xbar)) > TOL:
        raise PreconditionError("0 is not in A(xbar)")
    worst, witness, used, seen = 0.0, None, 0, 0
    for x in _shell_points(xbar, model.dim_in, probe):
        seen += 1
        r = _ratio(preimage_distance(model, zero, x), distance(zero, image(model, x)))
        if r is None:
            continue
        used += 1
        if r > worst:
            worst, witness = r, (x, zero)
    return _verdict("MetricallySubregular", worst, witness, used, probe, seen=seen)


@dataclass(frozen=True)
class HoffmanReport:
    consistent: bool
    bound: float
    distances: tuple
    margins: tuple
    violations: tuple = field(default=())


def hoffman_consistency(model, modulus, sigma, witnesses, tol=TOL):
    """Check ``d(x, A^-1(0)) <= rho(sigma)`` for graph points (x, y), |y| <= sigma.

    A violation falsifies the supplied modulus certificate for A^-1 at 0.
    """
    if modulus.radius < sigma:
        raise PreconditionError("modulus radius is smaller than sigma")
    bound = modulus(sigma)
    zero = np.zeros(model.dim_out)
    dists, margins, bad = [], [], []
    for i, (x, y) in enumerate(witnesses):
        x, y = as_point(x, model.dim_in), as_point(y, model.dim_out)
        if distance(y, evaluate(model, x)) > tol:
            raise PreconditionError(f"witness {i} is not on the graph")
        if np.linalg.norm(y) > sigma + tol:
            raise PreconditionError(f"witness {i} has |y| > sigma")
        d = preimage_distance(model, zero, x)
        dists.append(d)
        margins.append(bound - d)
        if d > bound + tol:
            bad.append((i, d, bound))
    return HoffmanReport(not bad, bound, tuple(dists), tuple(margins), tuple(bad))


def sum_modulus(m1, m2, grid=None):
    """Modulus ``2 max(rho1, rho2)`` with radius ``min(sigma1, sigma2)`` for A1 + A2."""
    radius = min(m1.radius, m2.radius)
    lin = [m for m in (m1, m2) if m.form == "lipschitz"
           or (m.form == "powerlaw" and m.exponent == 1.0)]
    if len(lin) == 2:
        return ModulusFunction.lipschitz(2 * max(m1.constant, m2.constant), radius,
                                         degenerate=m1.degenerate and m2.degenerate)
    if m1.form == m2.form == "powerlaw" and m1.exponent == m2.exponent:
        return ModulusFunction.power_law(2 * max(m1.constant, m2.constant), m1.exponent, radius)
    if grid is None:
        tables = [m.radii for m in (m1, m2) if m.form == "tabulated"]
        if tables:
            grid = sorted(set().union(*tables))
        else:
            top = radius if math.isfinite(radius) else 1.0
            grid = np.geomspace(1e-6, 1.0, 25) * top
    table = [(float(r), 2 * max(m1(r), m2(r))) for r in grid]
    return ModulusFunction.tabulated(table, radius)


@dataclass(frozen=True)
class ClosedGraphVerdict:
    holds: bool
    gaps: tuple
    violations: tuple
    note: str = "diagnostic only: finite sequences cannot prove closedness"


def check_closed_graph_at_zero(model, sequences, tol=TOL, convergence_tol=1e-3):
    """For each ``(xs, ys, limit)`` with ys[n] in A(xs[n]), xs -> 0, ys -> limit,
    check that ``limit`` lies in A(0)."""
    zero = np.zeros(model.dim_in)
    at_zero = image(model, zero)
    gaps, bad = [], []
    for i, (xs, ys, limit) in enumerate(sequences):
        xs = [as_point(x, model.dim_in) for x in xs]
        ys = [as_point(y, model.dim_out) for y in ys]
        limit = as_point(limit, model.dim_out)
        if not xs or len(xs) != len(ys):
            raise ValueError(f"sequence {i}: xs and ys must be nonempty and equally long")
        for x, y in zip(xs, ys):
            if distance(y, image(model, x)) > tol:
                raise PreconditionError(f"sequence {i}: ({x}, {y}) is not on the graph")
        if np.linalg.norm(xs[-1]) > convergence_tol or np.linalg.norm(ys[-1] - limit) > convergence_tol:
            raise ValueError(f"sequence {i} does not approach (0, limit)")
        gap = distance(limit, at_zero)
        gaps.append(gap)
        if gap > tol:
            bad.append(i)
    return ClosedGraphVerdict(not bad, tuple(gaps), tuple(bad))
