"""Graph pattern matching, the pattern algebra and regular path queries.

Terms are either constants (plain ``str``) or :class:`Var`.  A solution is a
:class:`Mapping` from variable names (without the leading ``?``) to
constants.  Evaluation is exposed at three levels:

* :func:`eval_pattern` for a basic pattern (a list of triple patterns);
* :func:`eval_path_expr` / :func:`eval_rpq` for path expressions;
* :func:`eval_algebra` for full algebra trees, including path atoms.

Result lists are sorted lexicographically on the output variables (unbound
values sort first) so that output is stable across runs.
"""

from __future__ import annotations

import collections.abc
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence, Union as TUnion

from .graph import Graph
from .sexpr import Quoted, SExprError, dump, is_atom, read_one


class QueryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise QueryError("empty variable name")

    # Written out by hand because variables are hashed and compared in the
    # inner loops of matching and rule mining; same semantics as generated ones.
    def __eq__(self, other):
        return other.__class__ is Var and other.name == self.name

    def __hash__(self):
        return hash(self.name)

    def __str__(self) -> str:
        return "?" + self.name


Term = TUnion[str, Var]
TriplePattern = tuple  # (Term, Term, Term)


class Mapping(collections.abc.Mapping):
    """An immutable partial map from variable names to constants."""

    __slots__ = ("_d", "_key")

    def __init__(self, bindings: dict | Iterable = ()):
        d = dict(bindings)
        self._d = d
        self._key = tuple(sorted(d.items()))

    def __getitem__(self, k):
        return self._d[k]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __hash__(self):
        return hash(self._key)

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return self._key == other._key
        return NotImplemented

    def __repr__(self):
        inner = ", ".join(f"?{k}={v!r}" for k, v in self._key)
        return f"Mapping({inner})"

    @property
    def dom(self) -> frozenset:
        return frozenset(self._d)

    def compatible(self, other: "Mapping") -> bool:
        small, big = (self._d, other._d) if len(self._d) <= len(other._d) else (other._d, self._d)
        return all(big.get(k, v) == v for k, v in small.items())

    def merge(self, other: "Mapping") -> "Mapping":
        d = dict(self._d)
        d.update(other._d)
        return Mapping(d)

    def restrict(self, names: Iterable[str]) -> "Mapping":
        names = set(names)
        return Mapping({k: v for k, v in self._d.items() if k in names})


def _resolve(term: Term, mu) -> str | None:
    if isinstance(term, Var):
        return mu.get(term.name)
    return term


# ---------------------------------------------------------------------------
# Basic graph patterns

MODES = ("homomorphism", "edge-iso", "node-edge-iso")


def pattern_variables(pattern: Sequence[TriplePattern]) -> set[str]:
    return {t.name for tr in pattern for t in tr if isinstance(t, Var)}


def eval_pattern(g: Graph, pattern: Sequence[TriplePattern],
                 mode: str = "homomorphism") -> list[Mapping]:
    """All mappings ``mu`` with ``dom(mu) = var(pattern)`` and ``mu(pattern) ⊆ g``.

    ``edge-iso`` additionally requires distinct label-position variables to
    take distinct values; ``node-edge-iso`` extends that to node-position
    variables as well.
    """
    if mode not in MODES:
        raise QueryError(f"unknown evaluation mode {mode!r}")
    pattern = [tuple(t) for t in pattern]
    for tr in pattern:
        if len(tr) != 3:
            raise QueryError(f"triple pattern needs 3 terms: {tr!r}")
    injective: set[str] = set()
    if mode != "homomorphism":
        injective = {tr[1].name for tr in pattern if isinstance(tr[1], Var)}
        if mode == "node-edge-iso":
            injective |= {t.name for tr in pattern for t in (tr[0], tr[2]) if isinstance(t, Var)}

    results: list[Mapping] = []
    binding: dict[str, str] = {}
    used: dict[str, str] = {}  # value -> injective variable holding it

    def candidates(tr):
        s, p, o = (_resolve(t, binding) for t in tr)
        return list(g.match(s, p, o))

    def bind(tr, edge) -> list[str] | None:
        added = []
        for term, value in zip(tr, edge):
            if not isinstance(term, Var):
                continue
            name = term.name
            have = binding.get(name)
            if have is not None:
                if have != value:
                    break
                continue
            if name in injective:
                if value in used:
                    break
                used[value] = name
            binding[name] = value
            added.append(name)
        else:
            return added
        unbind(added)
        return None

    def unbind(names):
        for name in names:
            value = binding.pop(name)
            if used.get(value) == name:
                del used[value]

    def search(remaining: list):
        if not remaining:
            results.append(Mapping(binding))
            return
        best_i, best = 0, None
        for i, tr in enumerate(remaining):
            cands = candidates(tr)
            if best is None or len(cands) < len(best):
                best_i, best = i, cands
                if not cands:
                    return
        tr = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1:]
        for edge in best:
            added = bind(tr, edge)
            if added is None:
                continue
            search(rest)
            unbind(added)

    search(pattern)
    return results


# ---------------------------------------------------------------------------
# Path expressions


class PathExpr:
    pass


@dataclass(frozen=True)
class Label(PathExpr):
    label: str


@dataclass(frozen=True)
class Inverse(PathExpr):
    r: PathExpr


@dataclass(frozen=True)
class Star(PathExpr):
    r: PathExpr


@dataclass(frozen=True)
class Concat(PathExpr):
    r1: PathExpr
    r2: PathExpr


@dataclass(frozen=True)
class Alt(PathExpr):
    r1: PathExpr
    r2: PathExpr


def eval_path_expr(g: Graph, r: PathExpr) -> set[tuple[str, str]]:
    """The endpoint relation ``r[G]``."""
    if isinstance(r, Label):
        return {(e.s, e.o) for e in g.match(p=r.label)}
    if isinstance(r, Inverse):
        return {(b, a) for a, b in eval_path_expr(g, r.r)}
    if isinstance(r, Alt):
        return eval_path_expr(g, r.r1) | eval_path_expr(g, r.r2)
    if isinstance(r, Concat):
        right = defaultdict(set)
        for w, v in eval_path_expr(g, r.r2):
            right[w].add(v)
        return {(u, v) for u, w in eval_path_expr(g, r.r1) for v in right.get(w, ())}
    if isinstance(r, Star):
        step = defaultdict(set)
        for u, v in eval_path_expr(g, r.r):
            step[u].add(v)
        out = set()
        for start in g.nodes:
            seen = {start}
            frontier = [start]
            while frontier:
                nxt = []
                for u in frontier:
                    for v in step.get(u, ()):
                        if v not in seen:
                            seen.add(v)
                            nxt.append(v)
                frontier = nxt
            out.update((start, v) for v in seen)
        return out
    raise QueryError(f"not a path expression: {r!r}")


def eval_rpq(g: Graph, x: Term, r: PathExpr, y: Term) -> list[Mapping]:
    pairs = eval_path_expr(g, r)
    xv, yv = isinstance(x, Var), isinstance(y, Var)
    if not xv and not yv:
        return [Mapping()] if (x, y) in pairs else []
    if not xv:
        return sorted({Mapping({y.name: b}) for a, b in pairs if a == x}, key=_row_key_all)
    if not yv:
        return sorted({Mapping({x.name: a}) for a, b in pairs if b == y}, key=_row_key_all)
    if x.name == y.name:
        return sorted({Mapping({x.name: a}) for a, b in pairs if a == b}, key=_row_key_all)
    return sorted({Mapping({x.name: a, y.name: b}) for a, b in pairs}, key=_row_key_all)


def _push_inverse(r: PathExpr, inverted: bool = False) -> PathExpr:
    """Rewrite so that Inverse only wraps labels."""
    if isinstance(r, Label):
        return Inverse(r) if inverted else r
    if isinstance(r, Inverse):
        return _push_inverse(r.r, not inverted)
    if isinstance(r, Star):
        return Star(_push_inverse(r.r, inverted))
    if isinstance(r, Alt):
        return Alt(_push_inverse(r.r1, inverted), _push_inverse(r.r2, inverted))
    if isinstance(r, Concat):
        a, b = _push_inverse(r.r1, inverted), _push_inverse(r.r2, inverted)
        return Concat(b, a) if inverted else Concat(a, b)
    raise QueryError(f"not a path expression: {r!r}")


class _NFA:
    def __init__(self):
        self.eps: dict[int, set[int]] = defaultdict(set)
        self.moves: dict[int, list[tuple[str, bool, int]]] = defaultdict(list)
        self.n = 0

    def state(self) -> int:
        self.n += 1
        return self.n - 1

    def build(self, r: PathExpr) -> tuple[int, int]:
        if isinstance(r, Label) or (isinstance(r, Inverse) and isinstance(r.r, Label)):
            a, b = self.state(), self.state()
            forward = isinstance(r, Label)
            self.moves[a].append((r.label if forward else r.r.label, forward, b))
            return a, b
        if isinstance(r, Concat):
            a1, b1 = self.build(r.r1)
            a2, b2 = self.build(r.r2)
            self.eps[b1].add(a2)
            return a1, b2
        a, b = self.state(), self.state()
        if isinstance(r, Alt):
            for sub in (r.r1, r.r2):
                sa, sb = self.build(sub)
                self.eps[a].add(sa)
                self.eps[sb].add(b)
            return a, b
        if isinstance(r, Star):
            sa, sb = self.build(r.r)
            self.eps[a] |= {sa, b}
            self.eps[sb] |= {sa, b}
            return a, b
        raise QueryError(f"unexpected path node {r!r}")

    def closure(self, states) -> frozenset:
        out = set(states)
        stack = list(states)
        while stack:
            for t in self.eps.get(stack.pop(), ()):
                if t not in out:
                    out.add(t)
                    stack.append(t)
        return frozenset(out)


def enumerate_paths(g: Graph, x: Term, r: PathExpr, y: Term, k: int) -> list[list[str]]:
    """Simple paths (no repeated node) of at most ``k`` edges matching ``(x, r, y)``.

    A path is returned as ``[n0, l1, n1, ...]``; labels traversed backwards
    carry a ``^`` prefix.  Intended for debugging, not as query semantics.
    """
    nfa = _NFA()
    start, accept = nfa.build(_push_inverse(r))
    starts = sorted(g.nodes) if isinstance(x, Var) else ([x] if x in g.nodes else [])
    found: set[tuple[str, ...]] = set()

    def ok_end(node, first):
        if isinstance(y, Var):
            return not (isinstance(x, Var) and x.name == y.name) or node == first
        return node == y

    def walk(path: list[str], visited: set[str], states: frozenset):
        node = path[-1]
        if accept in states and ok_end(node, path[0]):
            found.add(tuple(path))
        if (len(path) - 1) // 2 >= k:
            return
        steps: dict[tuple[str, str], set[int]] = defaultdict(set)
        for st in states:
            for label, forward, target in nfa.moves.get(st, ()):
                if forward:
                    for e in g.match(s=node, p=label):
                        steps[(label, e.o)].add(target)
                else:
                    for e in g.match(o=node, p=label):
                        steps[("^" + label, e.s)].add(target)
        for (label, nxt), targets in sorted(steps.items()):
            if nxt in visited:
                continue
            visited.add(nxt)
            walk(path + [label, nxt], visited, nfa.closure(targets))
            visited.discard(nxt)

    for s in starts:
        walk([s], {s}, nfa.closure({start}))
    return [list(p) for p in sorted(found)]


# ---------------------------------------------------------------------------
# Algebra


class Condition:
    pass


@dataclass(frozen=True)
class Eq(Condition):
    left: Term
    right: Term


@dataclass(frozen=True)
class And(Condition):
    left: Condition
    right: Condition


@dataclass(frozen=True)
class Or(Condition):
    left: Condition
    right: Condition


@dataclass(frozen=True)
class Not(Condition):
    cond: Condition


def _cond_vars(c: Condition) -> set[str]:
    if isinstance(c, Eq):
        return {t.name for t in (c.left, c.right) if isinstance(t, Var)}
    if isinstance(c, Not):
        return _cond_vars(c.cond)
    return _cond_vars(c.left) | _cond_vars(c.right)


def holds(c: Condition, mu: Mapping) -> bool:
    if isinstance(c, Eq):
        a, b = _resolve(c.left, mu), _resolve(c.right, mu)
        return a is not None and b is not None and a == b
    if isinstance(c, Not):
        return not holds(c.cond, mu)
    if isinstance(c, And):
        return holds(c.left, mu) and holds(c.right, mu)
    if isinstance(c, Or):
        return holds(c.left, mu) or holds(c.right, mu)
    raise QueryError(f"bad condition {c!r}")


class AlgebraExpr:
    def variables(self) -> list[Var]:
        """Variables a solution of this expression may bind, sorted by name."""
        raise NotImplementedError

    def output_order(self) -> list[str]:
        return [v.name for v in self.variables()]


@dataclass(frozen=True)
class BGP(AlgebraExpr):
    triples: tuple

    def __init__(self, triples):
        object.__setattr__(self, "triples", tuple(tuple(t) for t in triples))

    def variables(self):
        return [Var(n) for n in sorted(pattern_variables(self.triples))]


@dataclass(frozen=True)
class Project(AlgebraExpr):
    vars: tuple
    child: AlgebraExpr

    def __init__(self, vars, child):
        object.__setattr__(self, "vars", tuple(vars))
        object.__setattr__(self, "child", child)

    def variables(self):
        return sorted(self.vars)

    def output_order(self):
        return [v.name for v in self.vars]


@dataclass(frozen=True)
class Select(AlgebraExpr):
    cond: Condition
    child: AlgebraExpr

    def variables(self):
        return self.child.variables()


@dataclass(frozen=True)
class _Binary(AlgebraExpr):
    left: AlgebraExpr
    right: AlgebraExpr

    def variables(self):
        return sorted(set(self.left.variables()) | set(self.right.variables()))


class Join(_Binary):
    pass


class Union(_Binary):
    pass


class LeftJoin(_Binary):
    pass


class Minus(_Binary):
    def variables(self):
        return self.left.variables()


class AntiJoin(_Binary):
    def variables(self):
        return self.left.variables()


@dataclass(frozen=True)
class PathAtom(AlgebraExpr):
    x: Term
    r: PathExpr
    y: Term

    def variables(self):
        return sorted({t for t in (self.x, self.y) if isinstance(t, Var)})


def _row_key(order: Sequence[str]):
    def key(mu: Mapping):
        return tuple((0, "") if mu.get(v) is None else (1, mu[v]) for v in order)
    return key


def _row_key_all(mu: Mapping):
    return mu._key


def check_expr(e: AlgebraExpr) -> None:
    """Static checks: projections and selections only mention in-scope variables."""
    if isinstance(e, Project):
        check_expr(e.child)
        missing = {v.name for v in e.vars} - {v.name for v in e.child.variables()}
        if missing:
            raise QueryError(f"projected variable(s) not in scope: {sorted('?' + m for m in missing)}")
    elif isinstance(e, Select):
        check_expr(e.child)
        missing = _cond_vars(e.cond) - {v.name for v in e.child.variables()}
        if missing:
            raise QueryError(f"filter uses variable(s) not in scope: {sorted('?' + m for m in missing)}")
    elif isinstance(e, _Binary):
        check_expr(e.left)
        check_expr(e.right)
    elif not isinstance(e, (BGP, PathAtom)):
        raise QueryError(f"not an algebra expression: {e!r}")


def _join(left: list[Mapping], right: list[Mapping]) -> list[Mapping]:
    if not left or not right:
        return []
    shared = set.intersection(*(set(m.dom) for m in left)) & set.intersection(*(set(m.dom) for m in right))
    keys = sorted(shared)
    buckets: dict[tuple, list[Mapping]] = defaultdict(list)
    for m2 in right:
        buckets[tuple(m2[k] for k in keys)].append(m2)
    out = []
    for m1 in left:
        for m2 in buckets.get(tuple(m1[k] for k in keys), ()):
            if m1.compatible(m2):
                out.append(m1.merge(m2))
    return out


def _dedup(rows: list[Mapping]) -> list[Mapping]:
    return list(dict.fromkeys(rows))


def _eval(g: Graph, e: AlgebraExpr, bag: bool, mode: str) -> list[Mapping]:
    def fin(rows):
        return rows if bag else _dedup(rows)

    if isinstance(e, BGP):
        return eval_pattern(g, e.triples, mode)
    if isinstance(e, PathAtom):
        return eval_rpq(g, e.x, e.r, e.y)
    if isinstance(e, Project):
        names = [v.name for v in e.vars]
        return fin([m.restrict(names) for m in _eval(g, e.child, bag, mode)])
    if isinstance(e, Select):
        return [m for m in _eval(g, e.child, bag, mode) if holds(e.cond, m)]
    left = _eval(g, e.left, bag, mode)
    right = _eval(g, e.right, bag, mode)
    if isinstance(e, Join):
        return fin(_join(left, right))
    if isinstance(e, Union):
        return fin(left + right)
    if isinstance(e, Minus):
        drop = set(right)
        return [m for m in left if m not in drop]
    left_vars = [v.name for v in e.left.variables()]
    joined = _join(left, right)
    matched = {m.restrict(left_vars) for m in joined}
    anti = [m for m in left if m not in matched]
    if isinstance(e, AntiJoin):
        return anti
    if isinstance(e, LeftJoin):
        return fin(joined + anti)
    raise QueryError(f"not an algebra expression: {e!r}")


def eval_algebra(g: Graph, e: AlgebraExpr, semantics: str = "set",
                 mode: str = "homomorphism") -> list[Mapping]:
    if semantics not in ("set", "bag"):
        raise QueryError(f"unknown semantics {semantics!r}")
    check_expr(e)
    rows = _eval(g, e, semantics == "bag", mode)
    return sorted(rows, key=_row_key(e.output_order()))


def format_table(rows: Sequence[Mapping], expr_or_vars) -> str:
    """Render solutions as TSV with a header; unbound variables become empty fields."""
    if isinstance(expr_or_vars, AlgebraExpr):
        names = expr_or_vars.output_order()
    else:
        names = [v.name if isinstance(v, Var) else v for v in expr_or_vars]
    lines = ["\t".join(names)]
    lines += ["\t".join(m.get(n) or "" for n in names) for m in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# The s-expression query language


def parse_term(x) -> Term:
    if isinstance(x, Quoted):
        if not x:
            raise QueryError("empty constant")
        return str(x)
    if is_atom(x) and x.startswith("?"):
        return Var(x[1:])
    raise QueryError(f"expected ?variable or \"constant\", got {dump(x)}")


def parse_triple(x) -> tuple:
    if not isinstance(x, list) or len(x) != 3:
        raise QueryError(f"triple pattern must have three terms: {dump(x)}")
    return tuple(parse_term(t) for t in x)


def parse_path(x) -> PathExpr:
    if isinstance(x, Quoted):
        return Label(str(x))
    if isinstance(x, list) and x and is_atom(x[0]):
        head, args = x[0], x[1:]
        if head in ("inv", "star") and len(args) == 1:
            inner = parse_path(args[0])
            return Inverse(inner) if head == "inv" else Star(inner)
        if head in ("seq", "alt") and len(args) >= 2:
            parts = [parse_path(a) for a in args]
            out = parts[0]
            for p in parts[1:]:
                out = Concat(out, p) if head == "seq" else Alt(out, p)
            return out
    raise QueryError(f"bad path expression: {dump(x)}")


def parse_condition(x) -> Condition:
    if not (isinstance(x, list) and x and is_atom(x[0])):
        raise QueryError(f"bad filter condition: {dump(x)}")
    head, args = x[0], x[1:]
    if head in ("=", "!=") and len(args) == 2:
        c = Eq(parse_term(args[0]), parse_term(args[1]))
        return Not(c) if head == "!=" else c
    if head == "not" and len(args) == 1:
        return Not(parse_condition(args[0]))
    if head in ("and", "or") and len(args) >= 2:
        parts = [parse_condition(a) for a in args]
        out = parts[0]
        for p in parts[1:]:
            out = And(out, p) if head == "and" else Or(out, p)
        return out
    raise QueryError(f"bad filter condition: {dump(x)}")


_BINARY = {"join": Join, "union": Union, "minus": Minus, "antijoin": AntiJoin, "optional": LeftJoin}


def compile_form(x) -> AlgebraExpr:
    if not (isinstance(x, list) and x and is_atom(x[0])):
        raise QueryError(f"expected a query form, got {dump(x)}")
    head, args = x[0], x[1:]
    if head == "bgp":
        if not args:
            raise QueryError("bgp needs at least one triple pattern")
        return BGP([parse_triple(t) for t in args])
    if head == "project" and len(args) == 2 and isinstance(args[0], list):
        vars_ = [parse_term(v) for v in args[0]]
        if not all(isinstance(v, Var) for v in vars_):
            raise QueryError("project takes a list of ?variables")
        return Project(vars_, compile_form(args[1]))
    if head == "filter" and len(args) == 2:
        return Select(parse_condition(args[0]), compile_form(args[1]))
    if head == "path" and len(args) == 3:
        return PathAtom(parse_term(args[0]), parse_path(args[1]), parse_term(args[2]))
    if head in _BINARY and len(args) >= 2:
        if head in ("minus", "antijoin", "optional") and len(args) != 2:
            raise QueryError(f"{head} takes exactly two operands")
        parts = [compile_form(a) for a in args]
        out = parts[0]
        for p in parts[1:]:
            out = _BINARY[head](out, p)
        return out
    raise QueryError(f"unknown or malformed form ({head} ...)")


def parse_query(text: str) -> AlgebraExpr:
    try:
        form = read_one(text)
    except SExprError as exc:
        raise QueryError(str(exc)) from exc
    expr = compile_form(form)
    check_expr(expr)
    return expr
