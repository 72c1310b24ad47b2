"""Proximal point iteration and rate certificates on recorded runs.

``run_ppa`` iterates ``x_{n+1} = J_{gamma A}(x_n)`` and records, per kept
index n, the iterate, the step ``a_n = |x_{n+1} - x_n|`` and, when
available, ``f`` and ``d(., S)`` at both ``x_n`` and ``x_{n+1}``.  Keeping
the successor values on the same row makes every certificate a row-wise
check, so thinning with ``record_every`` only drops checks and never changes
the quantities being compared.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import PreconditionError, ResolventError
from .operators import ConvexFunction, image, resolvent
from .setgeom import as_point, distance, project

ABS_SLACK = 1e-9
REL_SLACK = 1e-9
MONOTONE_SLACK = 1e-12
MIN_TAIL = 8

PASS, FAIL, INCONCLUSIVE, INAPPLICABLE = "pass", "fail", "inconclusive", "inapplicable"


def _exceeds(lhs, rhs):
    return lhs > rhs + ABS_SLACK + REL_SLACK * abs(rhs)


@dataclass(frozen=True)
class PpaConfig:
    gamma: float
    start: np.ndarray
    max_iterations: int = 100
    stop_step_norm: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "start", as_point(self.start))
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError("gamma must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.stop_step_norm < 0:
            raise ValueError("stop_step_norm must be nonnegative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass(frozen=True)
class PpaTrajectory:
    gamma: float
    indices: np.ndarray
    iterates: np.ndarray
    step_norms: np.ndarray
    function_values: np.ndarray = None
    next_function_values: np.ndarray = None
    distances: np.ndarray = None
    next_distances: np.ndarray = None
    n_zero: int = None
    step_square_sum: float = 0.0
    iterations: int = 0
    final_iterate: np.ndarray = None

    def __post_init__(self):
        k = len(self.indices)
        for name in ("iterates", "step_norms", "function_values", "next_function_values",
                     "distances", "next_distances"):
            arr = getattr(self, name)
            if arr is not None and len(arr) != k:
                raise ValueError(f"{name} has {len(arr)} rows, expected {k}")

    def __len__(self):
        return len(self.indices)

    def thinned(self, every):
        """Keep every `every`-th recorded row (run totals are unchanged)."""
        sel = slice(None, None, every)
        pick = lambda a: None if a is None else a[sel]
        return PpaTrajectory(self.gamma, self.indices[sel], self.iterates[sel],
                             self.step_norms[sel], pick(self.function_values),
                             pick(self.next_function_values), pick(self.distances),
                             pick(self.next_distances), self.n_zero, self.step_square_sum,
                             self.iterations, self.final_iterate)


def run_ppa(model, config, solution=None, sigma=None):
    """Run the proximal point algorithm.

    `model` is a set-valued map or a convex function (its subdifferential is
    used).  `solution` adds distances to S; `sigma`, the radius of a modulus
    for the inverse at 0, fixes ``n_zero`` as the first n with
    ``a_n / gamma <= sigma``.
    """
    fn = model if isinstance(model, ConvexFunction) else None
    op = fn.subdifferential() if fn is not None else model
    gamma, x = float(config.gamma), config.start
    if x.size != op.dim_in:
        raise PreconditionError(f"start point has dimension {x.size}, model expects {op.dim_in}")
    sset = solution.representation if solution is not None else None
    rows = []
    n_zero, sq_sum, n = None, 0.0, 0
    fx = fn.value(x) if fn is not None else None
    dx = distance(x, sset) if sset is not None else None
    for n in range(config.max_iterations):
        try:
            x_next = resolvent(op, gamma, x)
        except ResolventError as exc:
            raise ResolventError(str(exc), iteration=n) from exc
        a = float(np.linalg.norm(x_next - x))
        sq_sum += a * a
        if n_zero is None and sigma is not None and a / gamma <= sigma:
            n_zero = n
        f_next = fn.value(x_next) if fn is not None else None
        d_next = distance(x_next, sset) if sset is not None else None
        if n % config.record_every == 0:
            rows.append((n, x, a, fx, f_next, dx, d_next))
        x, fx, dx = x_next, f_next, d_next
        if a < config.stop_step_norm:
            break
    col = lambda i: np.array([r[i] for r in rows], dtype=float)
    return PpaTrajectory(
        gamma=gamma,
        indices=np.array([r[0] for r in rows], dtype=int),
        iterates=np.array([r[1] for r in rows], dtype=float),
        step_norms=col(2),
        function_values=col(3) if fn is not None else None,
        next_function_values=col(4) if fn is not None else None,
        distances=col(5) if sset is not None else None,
        next_distances=col(6) if sset is not None else None,
        n_zero=n_zero,
        step_square_sum=sq_sum,
        iterations=n + 1,
        final_iterate=x,
    )


@dataclass(frozen=True)
class Certification:
    name: str
    status: str
    worst: float = None
    violations: tuple = ()
    detail: dict = field(default_factory=dict)
    message: str = ""

    @property
    def holds(self):
        return self.status == PASS


@dataclass(frozen=True)
class RateReport:
    kappa: float
    observed_contraction: float
    step_decay_exponent: float = None
    bound_violations: tuple = ()
    verdicts: dict = field(default_factory=dict)
    message: str = ""


def _tail(traj):
    half = len(traj) // 2
    return slice(half, None)


def _decay_exponent(ns, values):
    keep = (ns >= 1) & (values > 0)
    if keep.sum() < 3:
        return None
    slope, _ = np.polyfit(np.log(ns[keep]), np.log(values[keep]), 1)
    return float(slope)


def certify_step_decay(traj, f0_gap):
    """Summed squared steps against ``gamma (f(x_0) - inf f)`` plus the
    o(1/n) signature of ``n a_n^2`` on the second half of the run."""
    if traj.function_values is None:
        raise PreconditionError("step-decay certificate needs function values")
    bound = traj.gamma * f0_gap
    total = traj.step_square_sum
    detail = {"sum_sq_steps": total, "bound": bound}
    if len(traj) < MIN_TAIL:
        return Certification("step_decay", INCONCLUSIVE, detail=detail,
                             message=f"fewer than {MIN_TAIL} recorded steps")
    tail = _tail(traj)
    ns = traj.indices[tail].astype(float)
    sq = traj.step_norms[tail] ** 2
    scaled = ns * sq
    rises = np.diff(scaled) > MONOTONE_SLACK + REL_SLACK * scaled[:-1]
    exponent = _decay_exponent(ns, sq)
    detail.update(tail_max=float(scaled.max()), tail_last=float(scaled[-1]),
                  decay_exponent=exponent)
    violations = []
    if _exceeds(total, bound):
        violations.append((-1, total, bound))
    if rises.any():
        i = int(np.argmax(rises))
        violations.append((int(ns[i + 1]), float(scaled[i + 1]), float(scaled[i])))
    if scaled[-1] > scaled[0] and scaled[0] > 0:
        violations.append((int(ns[-1]), float(scaled[-1]), float(scaled[0])))
    return Certification("step_decay", FAIL if violations else PASS,
                         worst=total - bound, violations=tuple(violations), detail=detail)


def _first_index(traj, sigma):
    if traj.n_zero is not None:
        return traj.n_zero
    if sigma is None:
        return None
    hit = np.nonzero(traj.step_norms / traj.gamma <= sigma)[0]
    return int(traj.indices[hit[0]]) if hit.size else None


def certify_distance_bound(traj, modulus):
    """``d(x_{n+1}, S) <= rho(a_n / gamma)`` for every recorded n >= n_zero."""
    if traj.distances is None:
        raise PreconditionError("distance certificate needs distances to S")
    n0 = _first_index(traj, modulus.radius)
    if n0 is None:
        return Certification("distance_bound", INCONCLUSIVE,
                             message="no step with a_n/gamma <= sigma, n_zero undefined")
    worst, bad = -math.inf, []
    for n, a, d_next in zip(traj.indices, traj.step_norms, traj.next_distances):
        if n < n0:
            continue
        rhs = modulus(a / traj.gamma)
        worst = max(worst, d_next - rhs)
        if _exceeds(d_next, rhs):
            bad.append((int(n), float(d_next), float(rhs)))
    return Certification("distance_bound", FAIL if bad else PASS, worst=worst,
                         violations=tuple(bad), detail={"n_zero": n0})


def certify_value_gap(traj, solution):
    """``f(x_{n+1}) - f* <= (a_n / gamma) d(x_{n+1}, S)`` on every recorded row."""
    if traj.function_values is None or traj.distances is None:
        raise PreconditionError("value-gap certificate needs function values and distances")
    if solution.optimal_value is None:
        raise PreconditionError("value-gap certificate needs the optimal value f*")
    fstar = solution.optimal_value
    worst, bad = -math.inf, []
    for n, a, f_next, d_next in zip(traj.indices, traj.step_norms,
                                    traj.next_function_values, traj.next_distances):
        lhs, rhs = f_next - fstar, (a / traj.gamma) * d_next
        worst = max(worst, lhs - rhs)
        if _exceeds(lhs, rhs):
            bad.append((int(n), float(lhs), float(rhs)))
    return Certification("value_gap", FAIL if bad else PASS, worst=worst, violations=tuple(bad))


def certify_linear_rate(traj, lipschitz_l, global_certificate=True):
    """Contraction ``d(x_{n+1}, S) <= kappa d(x_n, S)`` with ``kappa = 2L/gamma``.

    With a global modulus the check starts at n = 0, otherwise at n_zero.
    """
    if traj.distances is None:
        raise PreconditionError("linear-rate certificate needs distances to S")
    kappa = 2.0 * lipschitz_l / traj.gamma
    if kappa >= 1.0:
        return RateReport(kappa, math.nan, verdicts={"linear_rate": INAPPLICABLE},
                          message="γ ≤ 2L: theorem inapplicable")
    n0 = 0 if global_certificate else traj.n_zero
    if n0 is None:
        return RateReport(kappa, math.nan, verdicts={"linear_rate": INCONCLUSIVE},
                          message="n_zero undefined")
    observed, bad = 0.0, []
    for n, d, d_next in zip(traj.indices, traj.distances, traj.next_distances):
        if n < n0:
            continue
        if d > 0:
            observed = max(observed, d_next / d)
        if _exceeds(d_next, kappa * d):
            bad.append((int(n), float(d_next), float(kappa * d)))
    return RateReport(kappa, observed, bound_violations=tuple(bad),
                      verdicts={"linear_rate": FAIL if bad else PASS})


def _nonincreasing_breaks(values, indices):
    v = np.asarray(values, dtype=float)
    rises = np.diff(v) > MONOTONE_SLACK + REL_SLACK * np.abs(v[:-1])
    return [(int(indices[i + 1]), float(v[i + 1]), float(v[i])) for i in np.nonzero(rises)[0]]


def check_trajectory_invariants(traj, model, solution=None, tol=1e-9):
    """Structural properties every exact run has.

    Step norms and function values are nonincreasing, distances to a fixed
    solution point (the projection of x_0 onto S) are nonincreasing, and
    ``-(x_{n+1} - x_n) / gamma`` lies in ``A(x_{n+1})`` for consecutive
    recorded rows.
    """
    op = model.subdifferential() if isinstance(model, ConvexFunction) else model
    found = {"step_norms": _nonincreasing_breaks(traj.step_norms, traj.indices)}
    if traj.function_values is not None:
        found["function_values"] = _nonincreasing_breaks(traj.function_values, traj.indices)
    if solution is not None and len(traj):
        anchor = project(traj.iterates[0], solution.representation)
        dist = np.linalg.norm(traj.iterates - anchor, axis=1)
        found["fejer"] = _nonincreasing_breaks(dist, traj.indices)
    bad_incl = []
    for i in range(len(traj) - 1):
        if traj.indices[i + 1] != traj.indices[i] + 1:
            continue
        x0, x1 = traj.iterates[i], traj.iterates[i + 1]
        u = -(x1 - x0) / traj.gamma
        gap = distance(u, image(op, x1))
        if gap > tol * max(1.0, float(np.linalg.norm(u))):
            bad_incl.append((int(traj.indices[i]), float(gap), 0.0))
    found["inclusion"] = bad_incl
    violations = tuple((name,) + v for name, vs in found.items() for v in vs)
    return Certification("invariants", FAIL if violations else PASS, violations=violations,
                         detail={name: len(vs) for name, vs in found.items()})


@dataclass(frozen=True)
class SequenceVerdict:
    status: str
    nonincreasing: bool
    summable: bool
    conclusion_holds: bool
    tail_peak: float
    block_ratio: float
    failed_hypotheses: tuple = ()
    message: str = ""


def _dyadic_block_ratio(a):
    """Mean ratio of consecutive dyadic block sums over the last three blocks.

    Block k sums a_n for 2^k <= n < 2^(k+1).  A ratio settling below 1 means
    the partial sums level off; the harmonic series sits at ratio 1.
    """
    blocks = []
    k = 0
    while 2 ** (k + 1) - 1 <= len(a):
        blocks.append(float(np.sum(a[2 ** k - 1: 2 ** (k + 1) - 1])))
        k += 1
    ratios = []
    for b0, b1 in zip(blocks, blocks[1:]):
        ratios.append(0.0 if b1 == 0 else (math.inf if b0 == 0 else b1 / b0))
    return float(np.mean(ratios[-3:])) if len(ratios) >= 3 else math.nan


def sequence_rate_check(a, summable_ratio=0.9):
    """Check ``n a_n -> 0`` for a nonnegative sequence indexed from n = 1.

    Hypotheses: nonincreasing (within 1e-12) and summable (dyadic tail-ratio
    test).  The conclusion signature is a nonincreasing ``n a_n`` on the
    second half.  If a hypothesis fails the verdict is inconclusive and names
    it; ``tail_peak`` then exposes any non-vanishing subsequence.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("sequence must be nonnegative")
    ns = np.arange(1, len(a) + 1, dtype=float)
    scaled = ns * a
    tail = scaled[len(a) // 2:]
    nonincreasing = bool(np.all(np.diff(a) <= MONOTONE_SLACK))
    ratio = _dyadic_block_ratio(a)
    summable = bool(ratio < summable_ratio)
    conclusion = bool(len(tail) > 0 and np.all(np.diff(tail) <= MONOTONE_SLACK + REL_SLACK * tail[:-1]))
    peak = float(tail.max()) if len(tail) else math.nan
    failed = tuple(name for name, ok in (("nonincreasing", nonincreasing),
                                         ("summable", summable)) if not ok)
    if len(a) < 2 * MIN_TAIL:
        return SequenceVerdict(INCONCLUSIVE, nonincreasing, summable, conclusion, peak, ratio,
                               failed, f"need at least {2 * MIN_TAIL} terms")
    if failed:
        msg = "hypothesis failed: " + ", ".join(failed)
        if "nonincreasing" in failed:
            msg += "; monotonicity cannot be dropped, n*a_n need not vanish"
        return SequenceVerdict(INCONCLUSIVE, nonincreasing, summable, conclusion, peak,
                               ratio, failed, msg)
    return SequenceVerdict(PASS if conclusion else FAIL, nonincreasing, summable,
                           conclusion, peak, ratio)
