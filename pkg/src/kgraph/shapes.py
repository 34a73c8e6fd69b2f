"""Shapes schemas and validation with total shapes maps.

Recursion between shapes is allowed as long as no reference is reached
through negation (or through an upper-bounded count, which behaves like
negation).  Such schemas are split into strata and each stratum is solved by
least-fixpoint iteration starting from all zeros, which gives the unique
stratified shapes map.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .graph import Graph
from .sexpr import Quoted, SExprError, dump, is_atom, read_one


class SchemaError(ValueError):
    pass


class StratificationError(SchemaError):
    def __init__(self, cycle: list[str]):
        super().__init__("negation through recursion between shapes: " + " -> ".join(cycle + cycle[:1]))
        self.cycle = cycle


class Shape:
    pass


@dataclass(frozen=True)
class TrueShape(Shape):
    pass


@dataclass(frozen=True)
class InSet(Shape):
    nodes: frozenset


@dataclass(frozen=True)
class Cond(Shape):
    name: str


@dataclass(frozen=True)
class And(Shape):
    left: Shape
    right: Shape


@dataclass(frozen=True)
class Not(Shape):
    shape: Shape


@dataclass(frozen=True)
class Ref(Shape):
    label: str


@dataclass(frozen=True)
class Qualified(Shape):
    """Between ``min`` and ``max`` outgoing ``p`` edges to nodes satisfying ``shape``.

    ``max=None`` means unbounded.
    """

    p: str
    shape: Shape
    min: int = 0
    max: Optional[int] = None


@dataclass(frozen=True)
class Closed(Shape):
    """``shape`` plus: no outgoing edge whose label is outside ``allowed``.

    Expanded against the graph's labels at evaluation time into one
    ``Qualified(q, TrueShape(), 0, 0)`` per extra label ``q``.
    """

    allowed: frozenset
    shape: Shape


def Or(a: Shape, b: Shape) -> Shape:
    return Not(And(Not(a), Not(b)))


def conj(parts: list[Shape]) -> Shape:
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


# ---------------------------------------------------------------------------
# Conditions

_INT = re.compile(r"[+-]?\d+")
_FLOAT = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_DATETIME = re.compile(r"\d{4}-\d{2}-\d{2}[ T]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:\d{2})?")
_TYPED = re.compile(r'^"(.*)"\^\^(.+)$', re.S)
_LANG = re.compile(r'^"(.*)"@[A-Za-z-]+$', re.S)
_PLAIN = re.compile(r'^"(.*)"$', re.S)
_CMP = re.compile(r"^(<=|>=|<|>)([+-]?(\d+\.?\d*|\.\d+))$")


def lexical(node: str) -> tuple[str, str | None]:
    """Split a literal into (lexical form, datatype or None)."""
    m = _TYPED.match(node)
    if m:
        return m.group(1), m.group(2)
    m = _LANG.match(node) or _PLAIN.match(node)
    if m:
        return m.group(1), "string"
    return node, None


def _datatype_check(dt: str, pattern: re.Pattern | None, extra=None) -> Callable[[str], bool]:
    def check(node: str) -> bool:
        value, declared = lexical(node)
        if declared is not None and declared != dt:
            return dt == "float" and declared == "int" and bool(_INT.fullmatch(value))
        if pattern is None:
            return True
        return bool(pattern.fullmatch(value)) and (extra is None or extra(value))
    return check


CONDITIONS: dict[str, Callable[[str], bool]] = {
    "string": _datatype_check("string", None),
    "int": _datatype_check("int", _INT),
    "float": _datatype_check("float", _FLOAT),
    "boolean": _datatype_check("boolean", re.compile("true|false")),
    "dateTime": _datatype_check("dateTime", _DATETIME),
}


def condition(name: str) -> Callable[[str], bool]:
    if name in CONDITIONS:
        return CONDITIONS[name]
    m = _CMP.match(name)
    if not m:
        raise SchemaError(f"unknown condition {name!r}")
    op, bound = m.group(1), float(m.group(2))
    compare = {"<": float.__lt__, ">": float.__gt__, "<=": float.__le__, ">=": float.__ge__}[op]

    def check(node: str) -> bool:
        value, _ = lexical(node)
        if not _FLOAT.fullmatch(value):
            return False
        return compare(float(value), bound)
    return check


# ---------------------------------------------------------------------------
# Schema


@dataclass(frozen=True)
class Schema:
    shapes: Mapping[str, Shape]

    def __post_init__(self):
        for label, phi in self.shapes.items():
            for ref in _refs(phi):
                if ref not in self.shapes:
                    raise SchemaError(f"shape {label!r} refers to unknown shape {ref!r}")
            _check_bounds(phi)

    @property
    def labels(self) -> frozenset:
        return frozenset(self.shapes)


def _children(phi: Shape) -> tuple[Shape, ...]:
    if isinstance(phi, And):
        return (phi.left, phi.right)
    if isinstance(phi, (Not, Qualified, Closed)):
        return (phi.shape,)
    return ()


def _refs(phi: Shape) -> set[str]:
    out = {phi.label} if isinstance(phi, Ref) else set()
    for c in _children(phi):
        out |= _refs(c)
    return out


def _check_bounds(phi: Shape) -> None:
    if isinstance(phi, Qualified):
        if phi.min < 0 or (phi.max is not None and phi.max < phi.min):
            raise SchemaError(f"bad cardinality {phi.min}..{phi.max} on {phi.p!r}")
    if isinstance(phi, Cond):
        condition(phi.name)
    for c in _children(phi):
        _check_bounds(c)


# Dependency polarity: +1 monotone, -1 anti-monotone, 0 both.


def _polar_refs(phi: Shape, pol: int, out: dict[str, set[int]]) -> None:
    if isinstance(phi, Ref):
        out.setdefault(phi.label, set()).add(pol)
    elif isinstance(phi, Not):
        _polar_refs(phi.shape, -pol, out)
    elif isinstance(phi, Qualified) and phi.max is not None:
        _polar_refs(phi.shape, 0, out)
    else:
        for c in _children(phi):
            _polar_refs(c, pol, out)


def _dependencies(schema: Schema) -> dict[str, dict[str, bool]]:
    """label -> {referenced label: reference is non-monotone}."""
    deps = {}
    for label, phi in schema.shapes.items():
        polar: dict[str, set[int]] = {}
        _polar_refs(phi, 1, polar)
        deps[label] = {ref: pols != {1} for ref, pols in polar.items()}
    return deps


def _strata(schema: Schema) -> list[list[str]]:
    """Strongly connected components in dependency-first order (Tarjan)."""
    deps = _dependencies(schema)
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    out: list[list[str]] = []
    counter = [0]

    def visit(v: str):
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in sorted(deps[v]):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(sorted(comp))

    for v in sorted(deps):
        if v not in index:
            visit(v)
    for comp in out:
        members = set(comp)
        for v in comp:
            for w, negative in deps[v].items():
                if negative and w in members:
                    raise StratificationError(_cycle_through(deps, v, w, members))
    return out


def _cycle_through(deps, v: str, w: str, members: set[str]) -> list[str]:
    """A dependency cycle v -> w -> ... -> v inside one component."""
    paths = {w: [w]}
    frontier = [w]
    while frontier and v not in paths:
        nxt = []
        for a in frontier:
            for b in sorted(deps[a]):
                if b in members and b not in paths:
                    paths[b] = paths[a] + [b]
                    nxt.append(b)
        frontier = nxt
    tail = paths.get(v, [w, v])
    return [v] + [x for x in tail if x != v]


def check_stratified(schema: Schema) -> list[list[str]]:
    return _strata(schema)


# ---------------------------------------------------------------------------
# Evaluation


def _expand_closed(phi: Shape, labels: frozenset) -> Shape:
    if isinstance(phi, Closed):
        extra = sorted(labels - phi.allowed)
        inner = _expand_closed(phi.shape, labels)
        return conj([inner] + [Qualified(q, TrueShape(), 0, 0) for q in extra])
    if isinstance(phi, And):
        return And(_expand_closed(phi.left, labels), _expand_closed(phi.right, labels))
    if isinstance(phi, Not):
        return Not(_expand_closed(phi.shape, labels))
    if isinstance(phi, Qualified):
        return Qualified(phi.p, _expand_closed(phi.shape, labels), phi.min, phi.max)
    return phi


def eval_shape(g: Graph, v: str, phi: Shape, sigma: Mapping[tuple[str, str], int]) -> int:
    if isinstance(phi, TrueShape):
        return 1
    if isinstance(phi, InSet):
        return int(v in phi.nodes)
    if isinstance(phi, Cond):
        return int(condition(phi.name)(v))
    if isinstance(phi, And):
        return min(eval_shape(g, v, phi.left, sigma), eval_shape(g, v, phi.right, sigma))
    if isinstance(phi, Not):
        return 1 - eval_shape(g, v, phi.shape, sigma)
    if isinstance(phi, Ref):
        return int(sigma.get((v, phi.label), 0) == 1)
    if isinstance(phi, Qualified):
        n = sum(1 for e in g.match(s=v, p=phi.p) if eval_shape(g, e.o, phi.shape, sigma) == 1)
        return int(phi.min <= n and (phi.max is None or n <= phi.max))
    if isinstance(phi, Closed):
        return eval_shape(g, v, _expand_closed(phi, g.labels), sigma)
    raise SchemaError(f"not a shape: {phi!r}")


def compute_shapes_map(g: Graph, schema: Schema) -> dict[tuple[str, str], int]:
    """The total stratified shapes map over ``g.nodes × schema.labels``."""
    strata = _strata(schema)
    shapes = {s: _expand_closed(phi, g.labels) for s, phi in schema.shapes.items()}
    nodes = sorted(g.nodes)
    sigma: dict[tuple[str, str], int] = {}
    for stratum in strata:
        for s in stratum:
            for v in nodes:
                sigma[(v, s)] = 0
        changed = True
        while changed:
            changed = False
            for s in stratum:
                for v in nodes:
                    bit = eval_shape(g, v, shapes[s], sigma)
                    if bit != sigma[(v, s)]:
                        sigma[(v, s)] = bit
                        changed = True
    return sigma


def least_fixpoint_map(g: Graph, schema: Schema) -> dict[tuple[str, str], int]:
    """Global iteration from all zeros without stratifying.

    Only meaningful for schemas without negation, where it yields the least
    fixpoint; useful as an independent check on :func:`compute_shapes_map`.
    """
    shapes = {s: _expand_closed(phi, g.labels) for s, phi in schema.shapes.items()}
    sigma = {(v, s): 0 for v in g.nodes for s in shapes}
    while True:
        nxt = {(v, s): eval_shape(g, v, shapes[s], sigma) for v, s in sigma}
        if nxt == sigma:
            return sigma
        sigma = nxt


@dataclass
class Report:
    valid: bool
    violations: list[tuple[str, str]] = field(default_factory=list)


def validate(g: Graph, schema: Schema, target: Iterable[tuple[str, str]]) -> Report:
    target = list(target)
    for v, s in target:
        if s not in schema.shapes:
            raise SchemaError(f"target label {s!r} is not defined in the schema")
    sigma = compute_shapes_map(g, schema)
    bad = sorted({(v, s) for v, s in target if sigma.get((v, s), 0) != 1})
    return Report(valid=not bad, violations=bad)


# ---------------------------------------------------------------------------
# DSL


def _int_bound(x, allow_star: bool) -> Optional[int]:
    if allow_star and is_atom(x, "*"):
        return None
    if is_atom(x) and x.isdigit():
        return int(x)
    raise SchemaError(f"bad cardinality bound {dump(x)}")


def parse_shape(x) -> Shape:
    if is_atom(x, "true"):
        return TrueShape()
    if not (isinstance(x, list) and x and is_atom(x[0])):
        raise SchemaError(f"bad shape expression {dump(x)}")
    head, args = x[0], x[1:]
    if head == "in" and all(isinstance(a, Quoted) for a in args):
        return InSet(frozenset(str(a) for a in args))
    if head == "cond" and len(args) == 1 and not isinstance(args[0], list):
        condition(str(args[0]))
        return Cond(str(args[0]))
    if head in ("and", "or") and len(args) >= 1:
        parts = [parse_shape(a) for a in args]
        out = parts[0]
        for p in parts[1:]:
            out = And(out, p) if head == "and" else Or(out, p)
        return out
    if head == "not" and len(args) == 1:
        return Not(parse_shape(args[0]))
    if head == "ref" and len(args) == 1 and is_atom(args[0]):
        return Ref(args[0])
    if head == "count" and len(args) == 4 and isinstance(args[0], Quoted):
        lo, hi = _int_bound(args[2], False), _int_bound(args[3], True)
        shape = Qualified(str(args[0]), parse_shape(args[1]), lo, hi)
        _check_bounds(shape)
        return shape
    if head == "closed" and len(args) == 2 and isinstance(args[0], list):
        if not all(isinstance(a, Quoted) for a in args[0]):
            raise SchemaError("closed takes a list of quoted labels")
        return Closed(frozenset(str(a) for a in args[0]), parse_shape(args[1]))
    raise SchemaError(f"bad shape expression {dump(x)}")


def parse_schema(text: str) -> Schema:
    try:
        form = read_one(text)
    except SExprError as exc:
        raise SchemaError(str(exc)) from exc
    if not (isinstance(form, list) and form and is_atom(form[0], "schema")):
        raise SchemaError("expected (schema (shape Label expr) ...)")
    shapes: dict[str, Shape] = {}
    for item in form[1:]:
        if not (isinstance(item, list) and len(item) >= 3 and is_atom(item[0], "shape") and is_atom(item[1])):
            raise SchemaError(f"bad shape declaration {dump(item)}")
        label = item[1]
        if label in shapes:
            raise SchemaError(f"shape {label!r} defined twice")
        parents = []
        for extra in item[2:-1]:
            if isinstance(extra, list) and extra and is_atom(extra[0], "extends") and all(is_atom(p) for p in extra[1:]):
                parents += extra[1:]
            else:
                raise SchemaError(f"unexpected {dump(extra)} in shape {label!r}")
        body = parse_shape(item[-1])
        shapes[label] = conj([body] + [Ref(p) for p in parents])
    return Schema(shapes)


def parse_targets(text: str) -> list[tuple[str, str]]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.rstrip("\r").split("\t")
        if len(cols) != 2 or not all(cols):
            raise SchemaError(f"targets line {lineno}: expected node<TAB>shape")
        out.append((cols[0], cols[1]))
    return out
