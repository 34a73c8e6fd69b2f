"""Directed edge-labelled graphs, property graphs and graph datasets.

All three structures are immutable once built.  Constants are plain Python
strings; nodes and edge labels share one namespace, so the same string may
be used as a node in one edge and as a label in another.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple


class Edge(NamedTuple):
    s: str
    p: str
    o: str


class ParseError(ValueError):
    """Malformed input line.  ``line`` is 1-based."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def _freeze_index(raw):
    return {k: {k2: frozenset(v2) for k2, v2 in v.items()} for k, v in raw.items()}


class Graph:
    """A set of edges ``(s, p, o)`` plus the induced node and label sets.

    Extra ``nodes`` and ``labels`` may be supplied for elements without any
    incident edge.  Three nested hash indexes (subject, predicate, object)
    serve every combination of bound positions in :meth:`match`.
    """

    __slots__ = ("edges", "nodes", "labels", "_spo", "_pos", "_osp", "_hash")

    def __init__(self, edges: Iterable[tuple[str, str, str]] = (),
                 nodes: Iterable[str] = (), labels: Iterable[str] = ()):
        es = frozenset(Edge(*e) for e in edges)
        for e in es:
            if not (e.s and e.p and e.o):
                raise ValueError(f"edge with empty component: {tuple(e)!r}")
        ns = set(nodes)
        ls = set(labels)
        spo: dict = defaultdict(lambda: defaultdict(set))
        pos: dict = defaultdict(lambda: defaultdict(set))
        osp: dict = defaultdict(lambda: defaultdict(set))
        for s, p, o in es:
            ns.add(s)
            ns.add(o)
            ls.add(p)
            spo[s][p].add(o)
            pos[p][o].add(s)
            osp[o][s].add(p)
        self.edges = es
        self.nodes = frozenset(ns)
        self.labels = frozenset(ls)
        self._spo = _freeze_index(spo)
        self._pos = _freeze_index(pos)
        self._osp = _freeze_index(osp)
        self._hash = None

    def match(self, s: str | None = None, p: str | None = None,
              o: str | None = None) -> Iterator[Edge]:
        """Yield the edges agreeing with every bound (non-None) position."""
        if s is not None:
            by_p = self._spo.get(s)
            if not by_p:
                return
            if p is not None:
                objs = by_p.get(p, ())
                if o is not None:
                    if o in objs:
                        yield Edge(s, p, o)
                    return
                for obj in objs:
                    yield Edge(s, p, obj)
                return
            if o is not None:
                for pred in self._osp.get(o, {}).get(s, ()):
                    yield Edge(s, pred, o)
                return
            for pred, objs in by_p.items():
                for obj in objs:
                    yield Edge(s, pred, obj)
            return
        if p is not None:
            by_o = self._pos.get(p)
            if not by_o:
                return
            if o is not None:
                for subj in by_o.get(o, ()):
                    yield Edge(subj, p, o)
                return
            for obj, subjs in by_o.items():
                for subj in subjs:
                    yield Edge(subj, p, obj)
            return
        if o is not None:
            for subj, preds in self._osp.get(o, {}).items():
                for pred in preds:
                    yield Edge(subj, pred, o)
            return
        yield from self.edges

    def count(self, s=None, p=None, o=None) -> int:
        if s is not None and p is not None and o is None:
            return len(self._spo.get(s, {}).get(p, ()))
        if p is not None and o is not None and s is None:
            return len(self._pos.get(p, {}).get(o, ()))
        return sum(1 for _ in self.match(s, p, o))

    def __contains__(self, edge) -> bool:
        return Edge(*edge) in self.edges

    def __iter__(self) -> Iterator[Edge]:
        return iter(self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.edges == other.edges and self.nodes == other.nodes
                and self.labels == other.labels)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.edges, self.nodes, self.labels))
        return self._hash

    def __repr__(self) -> str:
        return f"Graph(|V|={len(self.nodes)}, |E|={len(self.edges)}, |L|={len(self.labels)})"

    def isolated_nodes(self) -> frozenset[str]:
        touched = {e.s for e in self.edges} | {e.o for e in self.edges}
        return self.nodes - touched

    def with_edges(self, extra: Iterable[tuple[str, str, str]]) -> "Graph":
        return Graph(self.edges | {Edge(*e) for e in extra}, self.nodes, self.labels)

    def without_edge(self, edge: tuple[str, str, str]) -> "Graph":
        """The graph with one edge removed (its endpoints stay as nodes)."""
        return Graph(self.edges - {Edge(*edge)}, self.nodes, self.labels)


def union(g1: Graph, g2: Graph) -> Graph:
    return Graph(g1.edges | g2.edges, g1.nodes | g2.nodes, g1.labels | g2.labels)


def is_subgraph(g1: Graph, g2: Graph) -> bool:
    return g1.nodes <= g2.nodes and g1.edges <= g2.edges and g1.labels <= g2.labels


# ---------------------------------------------------------------------------
# Property graphs


RESERVED_KEYS = frozenset({"from", "to", "mode", "type"})


@dataclass(frozen=True)
class PropertyGraph:
    node_ids: frozenset
    edge_ids: frozenset
    endpoints: Mapping[str, tuple[str, str]]
    label_of: Mapping[str, frozenset]
    props_of: Mapping[str, frozenset]

    @property
    def labels(self) -> frozenset:
        return frozenset(l for ls in self.label_of.values() for l in ls)

    @property
    def props(self) -> frozenset:
        return frozenset(k for kv in self.props_of.values() for k, _ in kv)

    @property
    def values(self) -> frozenset:
        return frozenset(v for kv in self.props_of.values() for _, v in kv)

    @classmethod
    def build(cls, nodes: Mapping[str, tuple] | None = None,
              edges: Mapping[str, tuple] | None = None) -> "PropertyGraph":
        """``nodes`` maps id -> (labels, props); ``edges`` maps id -> (src, dst, labels, props)."""
        nodes = dict(nodes or {})
        edges = dict(edges or {})
        label_of, props_of, endpoints = {}, {}, {}
        for nid, (labels, props) in nodes.items():
            label_of[nid] = frozenset(labels)
            props_of[nid] = frozenset(tuple(kv) for kv in props)
        for eid, (src, dst, labels, props) in edges.items():
            if eid in nodes:
                raise ValueError(f"id {eid!r} used both as node and edge")
            for end in (src, dst):
                if end not in label_of:
                    label_of[end] = frozenset()
                    props_of[end] = frozenset()
            endpoints[eid] = (src, dst)
            label_of[eid] = frozenset(labels)
            props_of[eid] = frozenset(tuple(kv) for kv in props)
        node_ids = frozenset(label_of) - frozenset(edges)
        return cls(node_ids, frozenset(edges), _FrozenDict(endpoints),
                   _FrozenDict(label_of), _FrozenDict(props_of))


class _FrozenDict(dict):
    """A hashable read-only dict so that PropertyGraph stays hashable."""

    def __hash__(self):  # type: ignore[override]
        return hash(frozenset(self.items()))

    def _immutable(self, *a, **k):
        raise TypeError("read-only mapping")

    __setitem__ = __delitem__ = update = pop = popitem = clear = setdefault = _immutable


def pg_to_del(pg: PropertyGraph) -> Graph:
    """Reify a property graph as a directed edge-labelled graph.

    Each edge id becomes a node with ``from``/``to`` edges to its endpoints
    and a ``mode`` edge per label.  Node labels turn into ``type`` edges and
    every property-value pair into an edge named after the property.  The
    keys in ``RESERVED_KEYS`` may not be used as property names, otherwise
    the encoding could not be read back.
    """
    for pid, kv in pg.props_of.items():
        clash = {k for k, _ in kv} & RESERVED_KEYS
        if clash:
            raise ValueError(f"property name(s) {sorted(clash)} of {pid!r} are reserved")
    edges = []
    for eid in pg.edge_ids:
        src, dst = pg.endpoints[eid]
        edges.append((eid, "from", src))
        edges.append((eid, "to", dst))
        edges.extend((eid, "mode", lab) for lab in pg.label_of[eid])
    for nid in pg.node_ids:
        edges.extend((nid, "type", lab) for lab in pg.label_of[nid])
    for pid, kv in pg.props_of.items():
        edges.extend((pid, k, v) for k, v in kv)
    g = Graph(edges)
    isolated = pg.node_ids - g.nodes
    return Graph(g.edges, g.nodes | isolated)


def del_to_pg(g: Graph) -> PropertyGraph:
    """Inverse of :func:`pg_to_del` for graphs produced by it."""
    edge_ids = {e.s for e in g.match(p="from")}
    nodes: dict[str, tuple[list, list]] = {}
    edges: dict[str, list] = {}
    for eid in edge_ids:
        (src,) = [e.o for e in g.match(s=eid, p="from")]
        (dst,) = [e.o for e in g.match(s=eid, p="to")]
        edges[eid] = [src, dst, [], []]
    for s, p, o in g.edges:
        if s in edge_ids:
            if p == "mode":
                edges[s][2].append(o)
            elif p not in ("from", "to"):
                edges[s][3].append((p, o))
            continue
        entry = nodes.setdefault(s, ([], []))
        if p == "type":
            entry[0].append(o)
        else:
            entry[1].append((p, o))
    for n in g.isolated_nodes():
        nodes.setdefault(n, ([], []))
    return PropertyGraph.build(nodes={k: (tuple(a), tuple(b)) for k, (a, b) in nodes.items()},
                               edges={k: tuple(v) for k, v in edges.items()})


# ---------------------------------------------------------------------------
# Datasets


@dataclass(frozen=True)
class GraphDataset:
    default_graph: Graph
    named: Mapping[str, Graph] = field(default_factory=dict)

    def flatten(self) -> Graph:
        out = self.default_graph
        for name in sorted(self.named):
            out = union(out, self.named[name])
        return out


# ---------------------------------------------------------------------------
# TSV input/output


def _rows(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line.split("\t")


def _check_fields(lineno: int, cols: list[str], expected: int) -> None:
    if len(cols) != expected:
        raise ParseError(lineno, f"expected {expected} columns, found {len(cols)}")


def parse_triples(text: str) -> Graph:
    edges, isolated = [], []
    for lineno, cols in _rows(text):
        if len(cols) == 2 and cols[0] == "node":
            if not cols[1]:
                raise ParseError(lineno, "empty node name")
            isolated.append(cols[1])
            continue
        _check_fields(lineno, cols, 3)
        if not all(cols):
            raise ParseError(lineno, "empty field")
        edges.append(tuple(cols))
    return Graph(edges, isolated)


def parse_dataset(text: str) -> GraphDataset:
    buckets: dict[str, list] = defaultdict(list)
    for lineno, cols in _rows(text):
        _check_fields(lineno, cols, 4)
        if not all(cols[1:]):
            raise ParseError(lineno, "empty field")
        buckets[cols[0]].append(tuple(cols[1:]))
    default = Graph(buckets.pop("", []))
    return GraphDataset(default, {name: Graph(es) for name, es in buckets.items()})


def parse_pg(text: str) -> PropertyGraph:
    nodes: dict[str, tuple[list, list]] = {}
    edges: dict[str, list] = {}
    pending_edge_props: list[tuple[int, str, tuple[str, str]]] = []
    arity = {"N": 3, "NP": 4, "E": 5, "EP": 4}
    for lineno, cols in _rows(text):
        kind = cols[0]
        if kind not in arity:
            raise ParseError(lineno, f"unknown row type {kind!r}")
        _check_fields(lineno, cols, arity[kind])
        if not all(cols):
            raise ParseError(lineno, "empty field")
        if kind == "N":
            nodes.setdefault(cols[1], ([], []))[0].append(cols[2])
        elif kind == "NP":
            nodes.setdefault(cols[1], ([], []))[1].append((cols[2], cols[3]))
        elif kind == "E":
            entry = edges.setdefault(cols[1], [cols[2], cols[3], [], []])
            if entry[:2] != [cols[2], cols[3]]:
                raise ParseError(lineno, f"edge {cols[1]!r} redeclared with other endpoints")
            entry[2].append(cols[4])
        else:
            pending_edge_props.append((lineno, cols[1], (cols[2], cols[3])))
    for lineno, eid, kv in pending_edge_props:
        if eid not in edges:
            raise ParseError(lineno, f"property for undeclared edge {eid!r}")
        edges[eid][3].append(kv)
    return PropertyGraph.build(nodes={k: (tuple(a), tuple(b)) for k, (a, b) in nodes.items()},
                               edges={k: tuple(v) for k, v in edges.items()})


def write_triples(g: Graph) -> str:
    lines = [f"node\t{n}" for n in sorted(g.isolated_nodes())]
    lines += ["\t".join(e) for e in sorted(g.edges)]
    return "".join(line + "\n" for line in lines)


def write_pg(pg: PropertyGraph) -> str:
    lines = []
    for nid in sorted(pg.node_ids):
        lines += [f"N\t{nid}\t{lab}" for lab in sorted(pg.label_of[nid])]
        lines += [f"NP\t{nid}\t{k}\t{v}" for k, v in sorted(pg.props_of[nid])]
    for eid in sorted(pg.edge_ids):
        src, dst = pg.endpoints[eid]
        lines += [f"E\t{eid}\t{src}\t{dst}\t{lab}" for lab in sorted(pg.label_of[eid])]
        lines += [f"EP\t{eid}\t{k}\t{v}" for k, v in sorted(pg.props_of[eid])]
    return "".join(line + "\n" for line in lines)


def read_graph(path: str | Path) -> Graph:
    return parse_triples(Path(path).read_text(encoding="utf-8"))
