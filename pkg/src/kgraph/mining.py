"""Top-down rule mining with partial-completeness negatives.

Search starts from one head ``?x p ?y`` per edge label and grows rule bodies
one edge at a time.  A new body edge either joins an existing variable to a
fresh one, joins an existing variable to a well-connected node, or joins two
existing variables.  Rules are scored by leave-one-out support and by
confidence against negatives obtained under the partial completeness
assumption (an absent ``(s, p, o')`` counts as false only if ``s`` has some
``p`` edge).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

from .graph import Graph
from .query import Var, eval_pattern
from .rules import Rule, RuleSet, apply_rule, least_model

#: Only nodes with at least this many incident edges become rule constants.
MIN_CONSTANT_DEGREE = 2

_CANON_NAMES = ("x", "y", "z", "w", "u", "v")


def _is_var(t) -> bool:
    return isinstance(t, Var)


@dataclass(frozen=True)
class Hypothesis:
    head: tuple
    body: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "head", tuple(self.head))
        object.__setattr__(self, "body", tuple(tuple(a) for a in self.body))

    @property
    def length(self) -> int:
        return len(self.body)

    def variables(self) -> set[Var]:
        return {t for a in (self.head,) + self.body for t in a if _is_var(t)}

    @property
    def safe(self) -> bool:
        body_vars = {t for a in self.body for t in a if _is_var(t)}
        return bool(self.body) and {t for t in self.head if _is_var(t)} <= body_vars

    @property
    def closed(self) -> bool:
        atoms = (self.head,) + self.body
        return all(sum(v in a for a in atoms) >= 2 for v in self.variables())

    @property
    def recursive(self) -> bool:
        return any(a[1] == self.head[1] for a in self.body)

    def to_rule(self) -> Rule:
        if not self.safe:
            raise ValueError("only safe hypotheses with a non-empty body are rules")
        return Rule(self.body, (self.head,))

    def __str__(self) -> str:
        return str(self.to_rule()) if self.safe else f"<open hypothesis {self.head} <- {self.body}>"


@dataclass(frozen=True)
class ScoreReport:
    positive_support: int
    negative_support: int
    confidence: float


@dataclass(frozen=True)
class MineConfig:
    min_support: int = 2
    min_confidence: float = 0.5
    max_length: int = 2
    head_labels: frozenset | None = None

    def __post_init__(self):
        if self.max_length < 1:
            raise ValueError("max_length must be at least 1")
        if self.head_labels is not None:
            object.__setattr__(self, "head_labels", frozenset(self.head_labels))


def _atom_key(a: tuple, names: dict) -> tuple[tuple, dict]:
    """Key of one atom under ``names``, extended with any newly met variables.

    Each term becomes ``(0, name)`` for a variable or ``(1, node)`` for a
    constant, so variables sort before constants.
    """
    row = []
    for t in a:
        if type(t) is Var:
            c = names.get(t)
            if c is None:
                names = dict(names)
                i = len(names)
                c = names[t] = _CANON_NAMES[i] if i < len(_CANON_NAMES) else f"v{i}"
            row.append((0, c))
        else:
            row.append((1, t))
    return tuple(row), names


def _least_order(prefix: tuple, names: dict, rest: tuple) -> tuple:
    """Least key sequence over all orderings of ``rest``.

    Keys compare lexicographically and an atom's key depends only on the atoms
    placed before it, so only atoms tying for the least next key need to be
    tried in that position.
    """
    if not rest:
        return prefix
    options = [(_atom_key(a, names), i) for i, a in enumerate(rest)]
    low = min(k for (k, _), _ in options)
    best = None
    for (k, nm), i in options:
        if k == low:
            cand = _least_order(prefix + (k,), nm, rest[:i] + rest[i + 1:])
            if best is None or cand < best:
                best = cand
    return best


def canonical(h: Hypothesis) -> Hypothesis:
    """Rename variables by first appearance, taking the least body ordering."""
    head, names = _atom_key(h.head, {})
    best = _least_order((head,), names, h.body)
    atoms = [tuple(Var(t) if kind == 0 else t for kind, t in row) for row in best]
    return Hypothesis(atoms[0], atoms[1:])


# ---------------------------------------------------------------------------
# Scoring

def pca_negatives(g: Graph, candidate) -> str:
    s, p, o = candidate
    if (s, p, o) in g:
        return "positive"
    return "negative" if g.count(s=s, p=p) else "unknown"


def _bind_head(h: Hypothesis, edge) -> dict:
    mu = {}
    for t, v in zip(h.head, edge):
        if _is_var(t):
            mu[t] = v
    return mu


def _subst(atoms, mu) -> list:
    return [tuple(mu.get(t, t) if _is_var(t) else t for t in a) for a in atoms]


def _head_edges(g: Graph, h: Hypothesis):
    s, p, o = (None if _is_var(t) else t for t in h.head)
    for e in sorted(g.match(s, p, o)):
        if h.head[0] == h.head[2] and e.s != e.o:
            continue
        yield e


def _has_solution(g: Graph, atoms) -> bool:
    return not atoms or bool(eval_pattern(g, atoms))


def _supported_without(g: Graph, atoms, edge) -> bool:
    """Is there a body match in ``g`` that does not rely on ``edge``?"""
    for mu in eval_pattern(g, atoms):
        if all(tuple(mu[t.name] if _is_var(t) else t for t in a) != edge for a in atoms):
            return True
    return False


def score_rule(g: Graph, h: Hypothesis) -> ScoreReport:
    """Leave-one-out positive support, PCA negative support and confidence.

    A head edge ``e`` counts as positive when the rule re-derives it from the
    graph without ``e``.  Non-recursive bodies never mention the head label,
    so they cannot depend on ``e`` and are matched against the full graph; a
    recursive rule gets a single-step check first and a least-model
    computation over ``g - e`` only when that fails.
    """
    rule = h.to_rule()
    rs = RuleSet([rule], "hypothesis")
    model = least_model(g, rs) if h.recursive else apply_rule(g, rule)
    positive = 0
    for e in _head_edges(g, h):
        atoms = _subst(h.body, _bind_head(h, e))
        if not h.recursive:
            positive += _has_solution(g, atoms)
        elif _supported_without(g, atoms, tuple(e)):
            positive += 1
        # the step deriving e inside lm(g - e) is also a match in lm(g) that avoids e
        elif _supported_without(model, atoms, tuple(e)) and e in least_model(g.without_edge(e), rs):
            positive += 1
    negative = sum(1 for e in model.edges - g.edges if pca_negatives(g, e) == "negative")
    total = positive + negative
    return ScoreReport(positive, negative, positive / total if total else 0.0)


def _bound_atoms(h: Hypothesis) -> list:
    return [a for a in h.body if a[1] != h.head[1]]


def support_bound(g: Graph, h: Hypothesis) -> int:
    """An upper bound on the positive support of ``h`` and all its refinements.

    Body edges carrying the head label are ignored, since a recursive rule may
    derive them; the remaining edges can only match edges present in ``g``.
    """
    fixed = _bound_atoms(h)
    return sum(1 for e in _head_edges(g, h) if _has_solution(g, _subst(fixed, _bind_head(h, e))))


def _supporting(g: Graph, h: Hypothesis, edges, memo: dict, need: int | None = None) -> list:
    """The head edges among ``edges`` that count towards ``support_bound(g, h)``.

    With ``need`` set, gives up as soon as fewer than ``need`` edges can
    still be found; the result is then only meaningful if it reaches ``need``.
    """
    fixed = _bound_atoms(h)
    out = []
    for i, e in enumerate(edges):
        if need is not None and len(out) + len(edges) - i < need:
            break
        atoms = tuple(_subst(fixed, _bind_head(h, e)))
        found = memo.get(atoms)
        if found is None:
            found = memo[atoms] = _has_solution(g, list(atoms))
        if found:
            out.append(e)
    return out


# ---------------------------------------------------------------------------
# Refinement

def _constants(g: Graph) -> list[str]:
    return sorted(n for n in g.nodes if g.count(s=n) + g.count(o=n) >= MIN_CONSTANT_DEGREE)


def _extensions(g: Graph, h: Hypothesis, max_length: int, consts: list[str]):
    """Bodies one edge longer than ``h.body``, before renaming.

    One more edge closes at most two dangling variables, so bodies that could
    not become closed within ``max_length`` are left out.
    """
    if h.length >= max_length:
        return
    atoms = (h.head,) + h.body
    occurs: dict = {}
    for a in atoms:
        for t in set(a):
            if type(t) is Var:
                occurs[t] = occurs.get(t, 0) + 1
    dangling = sum(1 for n in occurs.values() if n == 1)
    budget = 2 * (max_length - h.length - 1)
    existing = sorted(occurs, key=lambda v: v.name)
    fresh = Var(f"_f{h.length}")
    for lab in sorted(g.labels):
        new_atoms = []
        for v in existing:
            new_atoms += [(v, lab, fresh), (fresh, lab, v)]
            for c in consts:
                new_atoms += [(v, lab, c), (c, lab, v)]
        new_atoms += [(v1, lab, v2) for v1, v2 in itertools.permutations(existing, 2)]
        for atom in new_atoms:
            if atom in h.body:
                continue
            d = dangling
            for t in set(atom):
                if type(t) is Var:
                    n = occurs.get(t, 0)
                    d += 1 if n == 0 else -1 if n == 1 else 0
            if d <= budget:
                yield h.body + (atom,)


def refine(g: Graph, h: Hypothesis, max_length: int, constants: list[str] | None = None) -> list[Hypothesis]:
    consts = _constants(g) if constants is None else constants
    out = []
    seen = set()
    for body in _extensions(g, h, max_length, consts):
        child = canonical(Hypothesis(h.head, body))
        if child not in seen:
            seen.add(child)
            out.append(child)
    return out


def mine(g: Graph, cfg: MineConfig) -> list[tuple[Hypothesis, ScoreReport]]:
    """Breadth-first search over rule bodies, pruned by ``support_bound``.

    The bound does not depend on variable names, so it is checked on each
    extension before the (costlier) renaming.  A refinement can only lose
    supporting head edges, so each hypothesis carries the edges supporting
    it and its children are tested against those alone.
    """
    if not g.edges:
        return []
    k = cfg.min_support
    consts = _constants(g)
    labels = sorted(g.labels if cfg.head_labels is None else g.labels & cfg.head_labels)
    memo: dict = {}
    frontier = []
    for p in labels:
        h = canonical(Hypothesis((Var("x"), p, Var("y"))))
        support = _supporting(g, h, list(_head_edges(g, h)), memo)
        if len(support) >= k:
            frontier.append((h, support))
    seen = {h for h, _ in frontier}
    results = []
    while frontier:
        nxt = []
        for h, support in frontier:
            for body in _extensions(g, h, cfg.max_length, consts):
                raw = Hypothesis(h.head, body)
                if body[-1][1] == h.head[1]:
                    child_support = support  # head-label edges do not enter the bound
                else:
                    final = len(body) == cfg.max_length
                    child_support = _supporting(g, raw, support, memo, need=k if final else None)
                if len(child_support) < k:
                    continue
                child = canonical(raw)
                if child in seen:
                    continue
                seen.add(child)
                if child.closed and child.safe:
                    report = score_rule(g, child)
                    if report.positive_support >= k and report.confidence >= cfg.min_confidence:
                        results.append((child, report))
                nxt.append((child, child_support))
        frontier = nxt
    results.sort(key=lambda hr: (-hr[1].confidence, -hr[1].positive_support, str(hr[0])))
    return results


def format_mined(results: Iterable[tuple[Hypothesis, ScoreReport]]) -> str:
    lines = ["rule\tsupport\tconfidence"]
    lines += [f"{h}\t{r.positive_support}\t{r.confidence:.6g}" for h, r in results]
    return "\n".join(lines) + "\n"
