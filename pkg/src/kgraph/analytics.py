"""Vector-labelled graphs, a message/aggregate/end superstep loop, PageRank.

Analytics work on the label-free projection of a graph: an optional allow-list
keeps only edges with the given labels, then labels are dropped and parallel
edges collapse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Collection, Iterable, Sequence

import numpy as np

from .graph import Graph


class GPFError(ValueError):
    pass


class VectorGraph:
    """Nodes and directed edges, each carrying a numeric feature vector."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[tuple[str, str]],
                 node_vectors: dict, edge_vectors: dict,
                 node_dim: int | None = None, edge_dim: int | None = None):
        self.nodes = tuple(nodes)
        self.edges = tuple((u, v) for u, v in edges)
        known = set(self.nodes)
        for u, v in self.edges:
            if u not in known or v not in known:
                raise GPFError(f"edge ({u!r}, {v!r}) uses an unknown node")
        self.node_vectors = {v: np.asarray(node_vectors[v], dtype=float) for v in self.nodes}
        self.edge_vectors = {e: np.asarray(edge_vectors[e], dtype=float) for e in self.edges}
        self.node_dim = self._common_dim(self.node_vectors.values(), node_dim, "node")
        self.edge_dim = self._common_dim(self.edge_vectors.values(), edge_dim, "edge")

    @staticmethod
    def _common_dim(vectors, expected, what) -> int:
        dims = {vec.shape for vec in vectors}
        if len(dims) > 1:
            raise GPFError(f"{what} vectors have differing shapes {sorted(dims)}")
        if not dims:
            return expected or 0
        (shape,) = dims
        if len(shape) != 1:
            raise GPFError(f"{what} features must be 1-d vectors")
        if expected is not None and shape[0] != expected:
            raise GPFError(f"{what} vectors have dimension {shape[0]}, expected {expected}")
        return shape[0]


@dataclass(frozen=True)
class GPFSpec:
    msg: Callable[[np.ndarray, np.ndarray], np.ndarray]
    agg: Callable[[np.ndarray, list], np.ndarray]
    end: Callable[[int, list], bool]


def run_gpf(vg: VectorGraph, spec: GPFSpec, max_iters: int) -> dict[str, np.ndarray]:
    """Run supersteps until ``spec.end`` says stop or ``max_iters`` is reached.

    ``end`` is consulted before each superstep with the number of supersteps
    done so far.  Messages for a node are gathered in edge order, but ``agg``
    is required not to depend on that order.
    """
    if max_iters < 1:
        raise GPFError("max_iters must be at least 1")
    state = dict(vg.node_vectors)
    i = 0
    while i < max_iters and not spec.end(i, list(state.values())):
        inbox: dict[str, list] = {v: [] for v in vg.nodes}
        for u, v in vg.edges:
            inbox[v].append(np.asarray(spec.msg(state[u], vg.edge_vectors[(u, v)]), dtype=float))
        nxt = {}
        for v in vg.nodes:
            out = np.asarray(spec.agg(state[v], inbox[v]), dtype=float)
            if out.shape != (vg.node_dim,):
                raise GPFError(f"aggregate returned shape {out.shape} for node {v!r}, expected ({vg.node_dim},)")
            nxt[v] = out
        state = nxt
        i += 1
    return state


# ---------------------------------------------------------------------------
# Projection and instantiations

def project_edges(g: Graph, labels: Collection[str] | None = None) -> tuple[list[str], list[tuple[str, str]]]:
    if labels is None:
        edges = {(e.s, e.o) for e in g.edges}
        nodes = set(g.nodes)
    else:
        edges = {(e.s, e.o) for e in g.edges if e.p in labels}
        nodes = {n for pair in edges for n in pair}
    return sorted(nodes), sorted(edges)


# Node vector layout for PageRank: score, out-degree, |V|, score one step earlier.
_SCORE, _OUT, _N, _PREV = range(4)


def pagerank_vector_graph(g: Graph, labels: Collection[str] | None = None) -> VectorGraph:
    nodes, edges = project_edges(g, labels)
    if not nodes:
        raise ValueError("PageRank needs a non-empty graph")
    n = len(nodes)
    out = {v: 0 for v in nodes}
    for u, _ in edges:
        out[u] += 1
    # A node without out-edges links to every node, which spreads its score evenly.
    dangling = [u for u in nodes if out[u] == 0]
    edges = edges + [(u, v) for u in dangling for v in nodes]
    for u in dangling:
        out[u] = n
    vecs = {v: np.array([1.0 / n, out[v], n, 1.0 / n]) for v in nodes}
    return VectorGraph(nodes, edges, vecs, {e: np.zeros(0) for e in edges}, node_dim=4, edge_dim=0)


def pagerank_spec(d: float, iters: int, epsilon: float | None = None) -> GPFSpec:
    def msg(nv, ev):
        return np.array([d * nv[_SCORE] / nv[_OUT]])

    def agg(nv, messages):
        score = (1.0 - d) / nv[_N] + math.fsum(m[0] for m in messages)
        return np.array([score, nv[_OUT], nv[_N], nv[_SCORE]])

    def end(i, vectors):
        if i >= iters:
            return True
        if epsilon is not None and i > 0:
            return math.fsum(abs(v[_SCORE] - v[_PREV]) for v in vectors) < epsilon
        return False

    return GPFSpec(msg, agg, end)


def pagerank(g: Graph, d: float = 0.85, iters: int = 20,
             labels: Collection[str] | None = None, epsilon: float | None = None) -> dict[str, float]:
    if not 0.0 < d < 1.0:
        raise ValueError(f"damping factor must lie in (0, 1), got {d}")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    vg = pagerank_vector_graph(g, labels)
    state = run_gpf(vg, pagerank_spec(d, iters, epsilon), max_iters=iters)
    return {v: float(state[v][_SCORE]) for v in vg.nodes}


def in_degree(g: Graph, labels: Collection[str] | None = None) -> dict[str, int]:
    """Number of distinct in-neighbours, computed in one superstep."""
    nodes, edges = project_edges(g, labels)
    vg = VectorGraph(nodes, edges, {v: np.zeros(1) for v in nodes}, {e: np.zeros(0) for e in edges})
    spec = GPFSpec(msg=lambda nv, ev: np.ones(1),
                   agg=lambda nv, ms: np.array([float(len(ms))]),
                   end=lambda i, ns: i >= 1)
    state = run_gpf(vg, spec, max_iters=1)
    return {v: int(state[v][0]) for v in nodes}


def l1_residual(a: dict[str, float], b: dict[str, float]) -> float:
    return math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in set(a) | set(b))


def format_scores(scores: dict[str, float]) -> str:
    rows = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return "node\tscore\n" + "".join(f"{k}\t{v:.12g}\n" for k, v in rows)
