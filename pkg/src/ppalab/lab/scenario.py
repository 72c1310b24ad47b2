"""Strict parsing of scenario files into runnable objects.

A scenario is a JSON object.  Every field is validated while the objects it
describes are built, so an unsupported variant or an out-of-range number is
reported with its field path (``ppaConfig.gamma``) before anything runs.
In strict mode unknown keys are errors; in lenient mode they are logged and
ignored.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .. import catalog
from ..exceptions import ConfigError
from ..operators import (AbsSum, ConvexFunction, Identity, InverseOf, LeastSquares, Linear,
                         PiecewiseGraph1D, GraphPiece, PowerEven, PowerGradient, Quadratic,
                         Scaled, SignComponentwise, SubgradAbsSum, Sum,
                         ZeroFunction, ZeroMap)
from ..ppa import PpaConfig
from ..regularity import ModulusFunction
from ..setgeom import (Box, FinitePoints, HalfLine1D, Singleton, SolutionSet,
                       from_intervals)

log = logging.getLogger(__name__)

EXPECTATIONS = ("holds", "fails", "inconclusive")


class _Node:
    """A JSON object being consumed; remembers its path and the keys read."""

    def __init__(self, data, path, strict):
        if not isinstance(data, dict):
            raise ConfigError("expected an object", path)
        self.data, self.path, self.strict = data, path, strict
        self.used = set()

    def sub(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def get(self, key, conv, default=...):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("required field is missing", self.sub(key))
            return default
        try:
            return conv(self.data[key])
        except ConfigError as exc:
            if exc.path:
                raise
            raise ConfigError(str(exc), self.sub(key)) from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), self.sub(key)) from None

    def child(self, key, default=...):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("required field is missing", self.sub(key))
            return default
        return _Node(self.data[key], self.sub(key), self.strict)

    def child_or_empty(self, key):
        if key in self.data:
            return self.child(key)
        return _Node({}, self.sub(key), self.strict)

    def children(self, key, default=...):
        self.used.add(key)
        if key not in self.data:
            if default is ...:
                raise ConfigError("required field is missing", self.sub(key))
            return default
        items = self.data[key]
        if not isinstance(items, list):
            raise ConfigError("expected a list", self.sub(key))
        return [_Node(v, f"{self.sub(key)}[{i}]", self.strict) for i, v in enumerate(items)]

    def done(self):
        extra = sorted(set(self.data) - self.used)
        if not extra:
            return
        if self.strict:
            raise ConfigError(f"unknown key(s) {extra}", self.path or "<root>")
        log.warning("%s: ignoring unknown key(s) %s", self.path or "<root>", extra)


# -- value converters -------------------------------------------------------

def _real(v):
    if isinstance(v, str) and v in ("inf", "+inf", "-inf"):
        return -math.inf if v.startswith("-") else math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _finite(v):
    x = _real(v)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _positive(v):
    x = _finite(v)
    if x <= 0:
        raise ValueError(f"must be positive, got {x:g}")
    return x


def _nonnegative(v):
    x = _finite(v)
    if x < 0:
        raise ValueError(f"must be nonnegative, got {x:g}")
    return x


def _radius(v):
    x = _real(v)
    if not x > 0:
        raise ValueError(f"radius must be positive or \"inf\", got {v!r}")
    return x


def _count(v):
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise ValueError(f"expected a positive integer, got {v!r}")
    return v


def _integer(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _text(v):
    if not isinstance(v, str) or not v:
        raise ValueError("expected a nonempty string")
    return v


def _flag(v):
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


def _vector(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ValueError("expected a nonempty list of numbers")
    return np.array([_finite(x) for x in v])


def _matrix(v):
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ValueError("expected a nonempty list of rows")
    rows = [[_finite(x) for x in r] for r in v]
    if len({len(r) for r in rows}) != 1 or not rows[0]:
        raise ValueError("rows must be nonempty and of equal length")
    return np.array(rows)


def _choice(options):
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {list(options)}, got {v!r}")
        return v
    return conv


# -- operators --------------------------------------------------------------

def _graph_piece(node):
    start = node.get("start", _vector)
    inc_start = node.get("includeStart", _flag, True)
    if node.has("end"):
        piece = GraphPiece.segment(start, node.get("end", _vector), inc_start,
                                   node.get("includeEnd", _flag, True))
    else:
        piece = GraphPiece.ray(start, node.get("direction", _choice(("up", "down", "left", "right"))),
                               inc_start)
    node.done()
    return piece


def _map(node):
    model = build_model(node)
    if isinstance(model, ConvexFunction):
        raise ConfigError("a convex function is not allowed here, use a map", node.path)
    return model


def build_model(node):
    """Build a SetValuedMap or ConvexFunction from an ``operatorSpec`` node."""
    kind = node.get("kind", _text)
    dim = lambda: node.get("dim", _count, 1)
    try:
        if kind == "zero":
            model = ZeroFunction(dim())
        elif kind == "zeroMap":
            model = ZeroMap(dim())
        elif kind == "identity":
            model = Identity(dim())
        elif kind == "linear":
            model = Linear(node.get("matrix", _matrix), node.get("offset", _vector, None))
        elif kind == "sign":
            model = SignComponentwise(dim())
        elif kind == "absSubgradient":
            model = SubgradAbsSum(dim())
        elif kind == "powerGradient":
            model = PowerGradient(node.get("p", _integer), dim())
        elif kind == "graph":
            model = PiecewiseGraph1D([_graph_piece(p) for p in node.children("pieces")])
        elif kind == "scaled":
            model = Scaled(node.get("factor", _finite), _map(node.child("of")))
        elif kind == "sum":
            model = Sum([_map(t) for t in node.children("terms")])
        elif kind == "inverse":
            model = InverseOf(_map(node.child("of")))
        elif kind == "builtin":
            name = node.get("name", _choice(tuple(catalog.BUILTIN_MAPS)))
            params = node.get("params", dict, {})
            model = catalog.BUILTIN_MAPS[name](**params)
        elif kind == "quadratic":
            model = Quadratic(node.get("q", _matrix), node.get("b", _vector, None))
        elif kind == "absSum":
            model = AbsSum(dim())
        elif kind == "powerEven":
            model = PowerEven(node.get("p", _integer), dim())
        elif kind == "leastSquares":
            model = LeastSquares(node.get("a", _matrix), node.get("b", _vector))
        else:
            raise ConfigError(f"unsupported operator variant {kind!r}", node.sub("kind"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), node.path) from None
    node.done()
    return model


def _interval(v):
    if not isinstance(v, list) or len(v) != 2:
        raise ValueError("an interval is a pair [lo, hi]")
    lo, hi = _real(v[0]), _real(v[1])
    if not lo <= hi or lo == math.inf or hi == -math.inf:
        raise ValueError(f"invalid interval {v!r}")
    return lo, hi


def build_solution(node):
    kind = node.get("kind", _text)
    try:
        if kind == "singleton":
            rep = Singleton(node.get("point", _vector))
        elif kind == "box":
            rep = Box(node.get("lo", _vector), node.get("hi", _vector))
        elif kind == "points":
            rep = FinitePoints(node.get("points", _matrix))
        elif kind == "halfLine":
            rep = HalfLine1D(node.get("anchor", _finite), node.get("direction", _choice((1, -1))))
        elif kind == "intervals":
            ivs = node.get("intervals", lambda v: [_interval(i) for i in v])
            rep = from_intervals(ivs)
        else:
            raise ConfigError(f"unsupported solution variant {kind!r}", node.sub("kind"))
        sol = SolutionSet(rep, node.get("optimalValue", _finite, None))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), node.path) from None
    node.done()
    return sol


# -- moduli -----------------------------------------------------------------

def _radii_spec(node):
    """``[r1, r2, ...]`` or ``{"from": a, "to": b, "count": k}`` (geometric)."""
    raw = node.data.get("radii")
    node.used.add("radii")
    if raw is None:
        return tuple(np.geomspace(1e-3, 1.0, 13))
    path = node.sub("radii")
    if isinstance(raw, list):
        try:
            radii = tuple(_positive(r) for r in raw)
        except ValueError as exc:
            raise ConfigError(str(exc), path) from None
    else:
        sub = _Node(raw, path, node.strict)
        lo, hi = sub.get("from", _positive), sub.get("to", _positive)
        radii = tuple(np.geomspace(lo, hi, sub.get("count", _count)))
        sub.done()
    if list(radii) != sorted(radii) or len(set(radii)) != len(radii):
        raise ConfigError("radii must be strictly increasing", path)
    return radii


@dataclass(frozen=True)
class EstimateDirective:
    """Estimate the modulus of the operator's inverse (or the operator) at a point."""

    target: str
    base_point: np.ndarray
    radii: tuple
    sample_count: int = 64


def build_modulus(node):
    form = node.get("form", _text)
    if form == "estimate":
        spec = EstimateDirective(
            node.get("target", _choice(("inverse", "operator")), "inverse"),
            node.get("basePoint", _vector),
            _radii_spec(node),
            node.get("sampleCount", _count, 64),
        )
        node.done()
        return spec
    radius = node.get("radius", _radius)
    try:
        if form == "lipschitz":
            mod = ModulusFunction.lipschitz(node.get("constant", _positive), radius)
        elif form == "powerLaw":
            mod = ModulusFunction.power_law(node.get("constant", _positive),
                                            node.get("exponent", _positive), radius)
        elif form == "tabulated":
            table = node.get("table", lambda v: [(_positive(r), _nonnegative(x)) for r, x in v])
            mod = ModulusFunction.tabulated(table, radius)
        else:
            raise ConfigError(f"unsupported modulus form {form!r}", node.sub("form"))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), node.path) from None
    node.done()
    return mod


def build_ppa_config(node):
    gamma = node.get("gamma", _positive)
    cfg = PpaConfig(
        gamma=gamma,
        start=node.get("start", _vector),
        max_iterations=node.get("maxIterations", _count),
        stop_step_norm=node.get("stopStepNorm", _nonnegative, 0.0),
        record_every=node.get("recordEvery", _count, 1),
    )
    node.done()
    return cfg


# -- sequences, probes, checks ----------------------------------------------

@dataclass(frozen=True)
class Family:
    """Vector sequence ``offset + scale / n**power`` for n = 1..count."""

    offset: np.ndarray
    scale: np.ndarray
    power: float

    def terms(self, count):
        n = np.arange(1, count + 1, dtype=float)[:, None]
        return self.offset[None, :] + self.scale[None, :] / n ** self.power


def _family(node):
    offset = node.get("offset", _vector, None)
    scale = node.get("scale", _vector, None)
    power = node.get("power", _nonnegative, 1.0)
    node.done()
    if offset is None and scale is None:
        raise ConfigError("a sequence needs an offset or a scale", node.path)
    if offset is None:
        offset = np.zeros_like(scale)
    if scale is None:
        scale = np.zeros_like(offset)
    if offset.shape != scale.shape:
        raise ConfigError("offset and scale must have the same length", node.path)
    return Family(offset, scale, power)


@dataclass(frozen=True)
class WitnessSequence:
    x: Family
    y: Family
    count: int

    def pairs(self):
        return list(zip(self.x.terms(self.count), self.y.terms(self.count)))


def _witness_sequence(node):
    seq = WitnessSequence(_family(node.child("x")), _family(node.child("y")),
                          node.get("count", _count))
    node.done()
    return seq


def _pairs(v):
    out = []
    for i, item in enumerate(v):
        if not isinstance(item, list) or len(item) != 2:
            raise ConfigError("a witness is a pair [x, y]", f"[{i}]")
        out.append((_vector(item[0]), _vector(item[1])))
    return tuple(out)


PROBE_KINDS = ("modulus", "metricRegularity", "metricSubregularity", "calm")


@dataclass(frozen=True)
class ProbeSpec:
    kind: str
    target: str
    base_point: np.ndarray
    base_image_point: np.ndarray = None
    ball_radius: float = 1.0
    sample_radius: float = 1.0
    sample_count: int = 64
    decades: int = 8
    cap: float = 1e6
    radii: tuple = ()
    witnesses: tuple = ()
    witness_sequence: WitnessSequence = None
    operator: object = None
    expect: str = "holds"
    label: str = ""


def build_probe(node):
    kind = node.get("kind", _choice(PROBE_KINDS))
    spec = ProbeSpec(
        kind=kind,
        target=node.get("target", _choice(("operator", "inverse")), "operator"),
        base_point=node.get("basePoint", _vector),
        base_image_point=node.get("baseImagePoint", _vector, None),
        ball_radius=node.get("ballRadius", _positive, 1.0),
        sample_radius=node.get("sampleRadius", _positive, 1.0),
        sample_count=node.get("sampleCount", _count, 64),
        decades=node.get("decades", _count, 8),
        cap=node.get("cap", _positive, 1e6),
        radii=_radii_spec(node) if kind == "modulus" else (),
        witnesses=node.get("witnesses", _pairs, ()),
        witness_sequence=_witness_sequence(node.child("witnessSequence"))
        if node.has("witnessSequence") else None,
        operator=build_model(node.child("operator")) if node.has("operator") else None,
        expect=node.get("expect", _choice(EXPECTATIONS), "holds"),
        label=node.get("label", _text, ""),
    )
    if kind == "modulus" and spec.radii[-1] > spec.sample_radius:
        raise ConfigError("largest radius exceeds sampleRadius", node.sub("radii"))
    node.done()
    return spec


CHECK_KINDS = ("monotone", "pairMonotone", "coercive", "hoffman", "sequenceRate",
               "matrixCertificate", "closedGraph")


@dataclass(frozen=True)
class SampleSpec:
    count: int = 1000
    low: float = -5.0
    high: float = 5.0


def _samples(node):
    spec = SampleSpec(node.get("count", _count, 1000), node.get("low", _finite, -5.0),
                      node.get("high", _finite, 5.0))
    node.done()
    if not spec.low < spec.high:
        raise ConfigError("low must be below high", node.path)
    return spec


def _sequence(node):
    kind = node.get("kind", _choice(("inversePower", "squareIndexed", "geometric", "values")))
    if kind == "values":
        vals = node.get("values", lambda v: np.array([_nonnegative(x) for x in v]))
    else:
        length = node.get("length", _count)
        if kind == "inversePower":
            vals = catalog.inverse_power(length, node.get("power", _positive))
        elif kind == "squareIndexed":
            vals = catalog.square_indexed(length)
        else:
            vals = catalog.geometric(length, node.get("ratio", _positive))
    node.done()
    return vals


@dataclass(frozen=True)
class RandomMatrices:
    count: int
    max_dim: int
    seed_offset: int = 0


def _matrix_list(v):
    return tuple(_matrix(m) for m in v)


def _random_matrices(node):
    spec = RandomMatrices(node.get("count", _count), node.get("maxDim", _count),
                          node.get("seedOffset", _integer, 0))
    node.done()
    return spec


@dataclass(frozen=True)
class ClosedGraphSequence:
    x: Family
    y: Family
    limit: np.ndarray
    count: int


def _closed_sequence(node):
    seq = ClosedGraphSequence(_family(node.child("x")), _family(node.child("y")),
                              node.get("limit", _vector), node.get("count", _count))
    node.done()
    return seq


@dataclass(frozen=True)
class CheckSpec:
    kind: str
    expect: str = "holds"
    label: str = ""
    operator: object = None
    second: object = None
    strong_modulus: float = 0.0
    samples: SampleSpec = None
    min_modulus: float = 0.0
    modulus: object = None
    sigma: float = None
    witnesses: tuple = ()
    sequence: np.ndarray = None
    matrices: tuple = ()
    random: RandomMatrices = None
    points_per_matrix: int = 5
    sequences: tuple = ()


def build_check(node):
    kind = node.get("kind", _choice(CHECK_KINDS))
    common = dict(kind=kind, expect=node.get("expect", _choice(EXPECTATIONS), "holds"),
                  label=node.get("label", _text, ""))
    opt_op = lambda key="operator": build_model(node.child(key)) if node.has(key) else None
    if kind == "monotone":
        spec = CheckSpec(operator=opt_op(), samples=_samples(node.child_or_empty("samples")), **common)
    elif kind == "pairMonotone":
        spec = CheckSpec(operator=_map(node.child("first")), second=_map(node.child("second")),
                         strong_modulus=node.get("strongModulus", _nonnegative, 0.0),
                         samples=_samples(node.child_or_empty("samples")), **common)
    elif kind == "coercive":
        spec = CheckSpec(operator=opt_op(), min_modulus=node.get("minModulus", _positive),
                         samples=_samples(node.child_or_empty("samples")), **common)
    elif kind == "hoffman":
        spec = CheckSpec(operator=opt_op(), modulus=build_modulus(node.child("modulus")),
                         sigma=node.get("sigma", _positive),
                         witnesses=node.get("witnesses", _pairs), **common)
    elif kind == "sequenceRate":
        spec = CheckSpec(sequence=_sequence(node.child("sequence")), **common)
    elif kind == "matrixCertificate":
        spec = CheckSpec(matrices=node.get("matrices", _matrix_list, ()),
                         random=_random_matrices(node.child("random")) if node.has("random") else None,
                         points_per_matrix=node.get("pointsPerMatrix", _count, 5), **common)
        if not spec.matrices and spec.random is None:
            raise ConfigError("give matrices or random", node.path)
    else:
        spec = CheckSpec(operator=opt_op(),
                         sequences=tuple(_closed_sequence(s) for s in node.children("sequences")),
                         **common)
    if isinstance(spec.modulus, EstimateDirective):
        raise ConfigError("a hoffman check needs an explicit modulus", node.sub("modulus"))
    node.done()
    return spec


# -- scenario ---------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str
    output_dir: str
    operator: object = None
    solution: SolutionSet = None
    modulus: object = None
    ppa: PpaConfig = None
    probes: tuple = ()
    checks: tuple = ()
    seed: int = None
    description: str = ""
    source: str = field(default="", compare=False)


def parse_scenario(text, strict=True, source=""):
    """Parse scenario JSON text; raises ConfigError with a field path or line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    root = _Node(data, "", strict)
    name = root.get("name", _text)
    operator = build_model(root.child("operatorSpec")) if root.has("operatorSpec") else None
    solution = build_solution(root.child("solutionSpec")) if root.has("solutionSpec") else None
    modulus = build_modulus(root.child("modulusSpec")) if root.has("modulusSpec") else None
    ppa = build_ppa_config(root.child("ppaConfig")) if root.has("ppaConfig") else None
    probes = tuple(build_probe(p) for p in root.children("probes", []))
    checks = tuple(build_check(c) for c in root.children("checks", []))
    scn = Scenario(
        name=name,
        output_dir=root.get("outputDir", _text, name),
        operator=operator,
        solution=solution,
        modulus=modulus,
        ppa=ppa,
        probes=probes,
        checks=checks,
        seed=root.get("seed", _integer, None),
        description=root.get("description", str, ""),
        source=source,
    )
    root.done()
    if ppa is not None and operator is None:
        raise ConfigError("ppaConfig needs an operatorSpec", "ppaConfig")
    if ppa is not None and ppa.start.size != _dim_in(operator):
        raise ConfigError(f"start has dimension {ppa.start.size}, operator expects "
                          f"{_dim_in(operator)}", "ppaConfig.start")
    if solution is not None and operator is None:
        raise ConfigError("solutionSpec needs an operatorSpec", "solutionSpec")
    for i, p in enumerate(probes):
        if p.operator is None and operator is None:
            raise ConfigError("probe needs an operator (scenario has none)", f"probes[{i}]")
    for i, c in enumerate(checks):
        if c.kind in ("monotone", "coercive", "hoffman", "closedGraph") and c.operator is None \
                and operator is None:
            raise ConfigError("check needs an operator (scenario has none)", f"checks[{i}]")
    return scn


def _dim_in(model):
    return model.dim if isinstance(model, ConvexFunction) else model.dim_in


def load_scenario(path, strict=True):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text, strict=strict, source=str(path))


def bundled_scenarios(negative=False):
    """Paths of the scenario files shipped with the package, sorted by name."""
    root = resources.files("ppalab") / "scenarios"
    if negative:
        root = root / "negative"
    return sorted((p for p in root.iterdir() if p.name.endswith(".json")), key=lambda p: p.name)


def as_map(model):
    """The set-valued map behind a model (a convex function's subdifferential)."""
    return model.subdifferential() if isinstance(model, ConvexFunction) else model

