"""Quotient graphs, (bi)simulation checks and bisimulation-minimal summaries."""

from __future__ import annotations

from collections import defaultdict
from typing import Collection, Iterable

from .graph import Graph

#: Blocks with more members than this are named ``part:k (n=size)``.
NAME_THRESHOLD = 16


class PartitionError(ValueError):
    pass


def block_name(block: Collection[str], index: int | None = None,
               threshold: int = NAME_THRESHOLD) -> str:
    if len(block) > threshold and index is not None:
        return f"part:{index} (n={len(block)})"
    return "{" + "|".join(sorted(block)) + "}"


def _ordered(parts: Iterable[Collection[str]]) -> list[frozenset]:
    return sorted((frozenset(p) for p in parts), key=lambda b: sorted(b))


def _check_partition(g: Graph, parts: list[frozenset]) -> None:
    seen: set[str] = set()
    for b in parts:
        if not b:
            raise PartitionError("partition contains an empty block")
        overlap = seen & b
        if overlap:
            raise PartitionError(f"node(s) in more than one block: {sorted(overlap)[:3]}")
        seen |= b
    if seen != g.nodes:
        missing = sorted(g.nodes - seen)[:3]
        extra = sorted(seen - g.nodes)[:3]
        raise PartitionError(f"partition does not match the nodes (missing {missing}, unknown {extra})")


def _names(parts: list[frozenset]) -> dict[frozenset, str]:
    return {b: block_name(b, i) for i, b in enumerate(parts)}


def membership(parts: Iterable[Collection[str]]) -> set[tuple[str, str]]:
    """The relation pairing every node with the quotient node of its block."""
    ordered = _ordered(parts)
    names = _names(ordered)
    return {(v, names[b]) for b in ordered for v in b}


def quotient(g: Graph, parts: Iterable[Collection[str]]) -> Graph:
    ordered = _ordered(parts)
    _check_partition(g, ordered)
    names = _names(ordered)
    of = {v: names[b] for b in ordered for v in b}
    return Graph({(of[s], p, of[o]) for s, p, o in g.edges}, nodes=names.values())


def check_simulation(g1: Graph, g2: Graph, rel: Iterable[tuple[str, str]]) -> bool:
    rel = set(rel)
    return _forward(g1, g2, rel)


def _forward(g1: Graph, g2: Graph, rel: set[tuple[str, str]]) -> bool:
    for v, v2 in rel:
        for _, p, w in g1.match(s=v):
            if not any((w, e.o) in rel for e in g2.match(s=v2, p=p)):
                return False
    return True


def check_bisimulation(g1: Graph, g2: Graph, rel: Iterable[tuple[str, str]]) -> bool:
    rel = set(rel)
    if not _forward(g1, g2, rel):
        return False
    inverse = {(b, a) for a, b in rel}
    return _forward(g2, g1, inverse)


def bisim_min_quotient(g: Graph, init: Iterable[Collection[str]]) -> tuple[Graph, list[frozenset]]:
    """Coarsest refinement of ``init`` that is bisimilar to ``g`` under membership.

    Blocks are split by the signature (own block, set of (label, target
    block)) until the number of blocks stops growing.
    """
    parts = _ordered(init)
    _check_partition(g, parts)
    block_of = {v: i for i, b in enumerate(parts) for v in b}
    while True:
        groups: dict[tuple, set[str]] = defaultdict(set)
        for v in g.nodes:
            sig = frozenset((p, block_of[o]) for _, p, o in g.match(s=v))
            groups[(block_of[v], sig)].add(v)
        if len(groups) == len(parts):
            break
        parts = _ordered(groups.values())
        block_of = {v: i for i, b in enumerate(parts) for v in b}
    return quotient(g, parts), parts


def parse_partition(text: str) -> list[set[str]]:
    blocks: dict[str, set[str]] = defaultdict(set)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        cols = raw.rstrip("\r").split("\t")
        if len(cols) != 2 or not all(cols):
            raise PartitionError(f"partition line {lineno}: expected node<TAB>partId")
        blocks[cols[1]].add(cols[0])
    return [blocks[k] for k in sorted(blocks)]
