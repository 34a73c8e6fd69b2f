"""Annotated graphs over idempotent commutative semirings.

An annotation domain supplies a join (used to merge alternative derivations)
and a meet (used to combine the edges of one derivation).  Two domains ship
with the package: sets of days of the year encoded as interval lists, and
fuzzy degrees in ``[0, 1]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from .graph import Graph, ParseError
from .query import Mapping, Var, eval_pattern, pattern_variables

YEAR_DAYS = 365
FUZZY_TOLERANCE = 1e-12


class DaySet:
    """A set of days in ``[1, 365]`` kept as sorted, disjoint, non-adjacent intervals."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[tuple[int, int]] = ()):
        clipped = []
        for lo, hi in intervals:
            lo, hi = max(int(lo), 1), min(int(hi), YEAR_DAYS)
            if lo <= hi:
                clipped.append((lo, hi))
        clipped.sort()
        merged: list[list[int]] = []
        for lo, hi in clipped:
            if merged and lo <= merged[-1][1] + 1:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        self.intervals = tuple((lo, hi) for lo, hi in merged)

    @classmethod
    def parse(cls, text: str) -> "DaySet":
        text = text.strip()
        if text in ("", "{}", "[]"):
            return cls()
        out = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not (chunk.startswith("[") and chunk.endswith("]")):
                raise ValueError(f"bad interval {chunk!r}, expected [a,b]")
            parts = chunk[1:-1].split(",")
            if len(parts) != 2:
                raise ValueError(f"bad interval {chunk!r}, expected [a,b]")
            lo, hi = (int(x) for x in parts)
            if lo > hi:
                raise ValueError(f"empty interval {chunk!r}")
            out.append((lo, hi))
        return cls(out)

    def days(self) -> set[int]:
        return {d for lo, hi in self.intervals for d in range(lo, hi + 1)}

    def union(self, other: "DaySet") -> "DaySet":
        return DaySet(self.intervals + other.intervals)

    def intersection(self, other: "DaySet") -> "DaySet":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return DaySet(out)

    def __eq__(self, other):
        return isinstance(other, DaySet) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __str__(self):
        if not self.intervals:
            return "{}"
        return ";".join(f"[{lo},{hi}]" for lo, hi in self.intervals)

    def __repr__(self):
        return f"DaySet({list(self.intervals)!r})"


def _default_eq(a, b) -> bool:
    return a == b


@dataclass(frozen=True)
class AnnotationDomain:
    name: str
    join: Callable[[Any, Any], Any]
    meet: Callable[[Any, Any], Any]
    bottom: Any
    top: Any
    parse: Callable[[str], Any] | None = None
    format: Callable[[Any], str] = str
    eq: Callable[[Any, Any], bool] = field(default=_default_eq)

    def leq(self, a, b) -> bool:
        return self.eq(self.join(a, b), b)

    def is_bottom(self, a) -> bool:
        return self.eq(a, self.bottom)


def temporal_domain() -> AnnotationDomain:
    return AnnotationDomain(
        "temporal", join=DaySet.union, meet=DaySet.intersection,
        bottom=DaySet(), top=DaySet([(1, YEAR_DAYS)]), parse=DaySet.parse)


def _parse_degree(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"fuzzy degree {text!r} outside [0, 1]")
    return v


def fuzzy_domain() -> AnnotationDomain:
    return AnnotationDomain(
        "fuzzy", join=max, meet=min, bottom=0.0, top=1.0,
        parse=_parse_degree, format=repr,
        eq=lambda a, b: math.isclose(a, b, rel_tol=0.0, abs_tol=FUZZY_TOLERANCE))


# ---------------------------------------------------------------------------
# Semiring laws

@dataclass
class AxiomReport:
    ok: bool
    law: str | None = None
    counterexample: tuple | None = None
    triples_checked: int = 0
    laws: tuple[str, ...] = ()


def _laws(d: AnnotationDomain):
    j, m, bot, top, eq = d.join, d.meet, d.bottom, d.top, d.eq
    # (name, arity, predicate)
    return [
        ("join-associative", 3, lambda a, b, c: eq(j(j(a, b), c), j(a, j(b, c)))),
        ("join-identity", 1, lambda a: eq(j(bot, a), a) and eq(j(a, bot), a)),
        ("join-commutative", 2, lambda a, b: eq(j(a, b), j(b, a))),
        ("meet-associative", 3, lambda a, b, c: eq(m(m(a, b), c), m(a, m(b, c)))),
        ("meet-identity", 1, lambda a: eq(m(top, a), a) and eq(m(a, top), a)),
        ("left-distributive", 3, lambda a, b, c: eq(m(a, j(b, c)), j(m(a, b), m(a, c)))),
        ("right-distributive", 3, lambda a, b, c: eq(m(j(a, b), c), j(m(a, c), m(b, c)))),
        ("annihilation", 1, lambda a: eq(m(bot, a), bot) and eq(m(a, bot), bot)),
        ("meet-commutative", 2, lambda a, b: eq(m(a, b), m(b, a))),
        ("join-idempotent", 1, lambda a: eq(j(a, a), a)),
    ]


def check_domain_axioms(d: AnnotationDomain, samples: Sequence) -> AxiomReport:
    """Evaluate every semiring law on all sample tuples.

    Returns at the first failing law, carrying the offending values.
    """
    samples = list(samples)
    if len(samples) < 3:
        raise ValueError("at least three sample values are needed")
    laws = _laws(d)
    for name, arity, pred in laws:
        for args in itertools.product(samples, repeat=arity):
            if not pred(*args):
                return AxiomReport(False, name, args, len(samples) ** 3,
                                   tuple(n for n, _, _ in laws))
    return AxiomReport(True, None, None, len(samples) ** 3, tuple(n for n, _, _ in laws))


# ---------------------------------------------------------------------------
# Annotated graphs

class AnnotatedGraph:
    """Edges with one annotation per ``(s, p, o)`` triple."""

    def __init__(self, annotations: dict, domain: AnnotationDomain):
        self.domain = domain
        self._ann = {tuple(t): a for t, a in annotations.items()}
        self.graph = Graph(self._ann)

    @classmethod
    def from_quads(cls, quads: Iterable[tuple[str, str, str, Any]],
                   domain: AnnotationDomain) -> "AnnotatedGraph":
        acc: dict = {}
        for s, p, o, a in quads:
            t = (s, p, o)
            acc[t] = domain.join(acc[t], a) if t in acc else a
        return cls(acc, domain)

    @classmethod
    def from_graph(cls, g: Graph, domain: AnnotationDomain) -> "AnnotatedGraph":
        return cls({tuple(e): domain.top for e in g.edges}, domain)

    @property
    def nodes(self):
        return self.graph.nodes

    @property
    def labels(self):
        return self.graph.labels

    def annotation(self, triple) -> Any:
        return self._ann[tuple(triple)]

    def quads(self):
        for t in sorted(self._ann):
            yield (*t, self._ann[t])


def parse_annotated(text: str, domain: AnnotationDomain) -> AnnotatedGraph:
    if domain.parse is None:
        raise ValueError(f"domain {domain.name!r} has no textual form")
    quads = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 4 or not all(cols[:3]):
            raise ParseError(lineno, "expected s<TAB>p<TAB>o<TAB>annotation")
        try:
            a = domain.parse(cols[3])
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        quads.append((cols[0], cols[1], cols[2], a))
    return AnnotatedGraph.from_quads(quads, domain)


def write_annotated(g: AnnotatedGraph) -> str:
    return "".join(f"{s}\t{p}\t{o}\t{g.domain.format(a)}\n" for s, p, o, a in g.quads())


def eval_annotated(g: AnnotatedGraph, pattern, project: Sequence[str] | None,
                   d: AnnotationDomain, drop_bottom: bool = True) -> list[tuple[Mapping, Any]]:
    """Annotated evaluation of a basic pattern followed by projection.

    Each solution's annotation is the meet over the distinct edges it maps
    the pattern onto; solutions sharing the projected bindings are joined.
    """
    pattern = [tuple(t) for t in pattern]
    names = list(project) if project is not None else sorted(pattern_variables(pattern))
    grouped: dict[Mapping, Any] = {}
    for mu in eval_pattern(g.graph, pattern):
        edges = {tuple(mu[t.name] if isinstance(t, Var) else t for t in tr) for tr in pattern}
        value = d.top
        for e in sorted(edges):
            value = d.meet(value, g.annotation(e))
        key = mu.restrict(names)
        grouped[key] = d.join(grouped[key], value) if key in grouped else value
    rows = [(m, a) for m, a in grouped.items() if not (drop_bottom and d.is_bottom(a))]
    rows.sort(key=lambda r: tuple(r[0].get(n) or "" for n in names))
    return rows
