"""Horn-style graph rules, materialisation and consistency checking.

A rule is a pair of basic patterns.  Its application over a graph is the
union of the head images under every body solution, and the least model is
reached by applying rules until nothing new appears.  Heads may only use
variables bound by the body, so no new nodes are ever invented and the
fixpoint is finite.

Two rule libraries are built in.  ``rdfs`` holds the sub-class,
sub-property, domain and range rules.  ``owl-subset`` adds rules for the
positively expressible property and class features.  Features that take an
RDF list (chain, union, intersection, enumeration, key) are unrolled into
one rule per list length up to :data:`MAX_LIST_LENGTH`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .graph import Edge, Graph
from .query import Mapping, QueryError, Var, eval_pattern, parse_triple
from .sexpr import SExprError, dump, is_atom, read_all

MAX_LIST_LENGTH = 4


class RuleError(ValueError):
    pass


def _vars(pattern) -> set[str]:
    return {t.name for tr in pattern for t in tr if isinstance(t, Var)}


@dataclass(frozen=True)
class Rule:
    body: tuple
    head: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        body = tuple(tuple(t) for t in self.body)
        head = tuple(tuple(t) for t in self.head)
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "head", head)
        if not body:
            raise RuleError("rule body is empty")
        fresh = _vars(head) - _vars(body)
        if fresh:
            raise RuleError(f"unsafe rule: head variable(s) {sorted('?' + v for v in fresh)} not bound by the body")

    def __str__(self) -> str:
        def pat(ts):
            return "(bgp " + " ".join(
                "(" + " ".join(f"?{t.name}" if isinstance(t, Var) else '"' + t.replace('"', '\\"') + '"'
                               for t in tr) + ")" for tr in ts) + ")"
        return f"(rule {pat(self.body)} => {pat(self.head)})"


@dataclass
class RuleSet:
    rules: list
    name: str = "rules"

    def __post_init__(self):
        self.rules = list(self.rules)


# ---------------------------------------------------------------------------
# Parsing

def parse_rules(text: str, name: str = "rules") -> RuleSet:
    """Read ``(rule (bgp ...) => (bgp ...))`` forms."""
    try:
        forms = read_all(text)
    except SExprError as exc:
        raise RuleError(str(exc)) from exc
    rules = []
    for form in forms:
        if not (isinstance(form, list) and len(form) == 4 and is_atom(form[0], "rule") and is_atom(form[2], "=>")):
            raise RuleError(f"expected (rule BODY => HEAD), got {dump(form)}")
        rules.append(Rule(_parse_bgp(form[1]), _parse_bgp(form[3])))
    return RuleSet(rules, name)


def _parse_bgp(form) -> tuple:
    if not (isinstance(form, list) and form and is_atom(form[0], "bgp") and len(form) > 1):
        raise RuleError(f"expected (bgp TRIPLE...), got {dump(form)}")
    try:
        return tuple(parse_triple(t) for t in form[1:])
    except QueryError as exc:
        raise RuleError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Evaluation

def _instantiate(tr, mu) -> Edge:
    return Edge(*(mu[t.name] if isinstance(t, Var) else t for t in tr))


def apply_rule(g: Graph, r: Rule) -> Graph:
    out = {_instantiate(h, mu) for mu in eval_pattern(g, r.body) for h in r.head}
    return Graph(out)


def _unify(tr, edge) -> dict | None:
    mu: dict[str, str] = {}
    for t, v in zip(tr, edge):
        if isinstance(t, Var):
            if mu.setdefault(t.name, v) != v:
                return None
        elif t != v:
            return None
    return mu


def _substitute(tr, mu):
    return tuple(mu.get(t.name, t) if isinstance(t, Var) else t for t in tr)


def least_model(g: Graph, rs: RuleSet) -> Graph:
    """Semi-naive materialisation.

    In every round each body atom in turn is matched against the edges that
    were new in the previous round, and the remaining atoms against the
    whole graph so far, so each derivation is found from fresh input only.
    """
    total = set(g.edges)
    delta = set(g.edges)
    current = g
    dgraph = g  # in the first round every edge is new
    while delta:
        new: set[Edge] = set()
        for r in rs.rules:
            for i, atom in enumerate(r.body):
                bound = [None if isinstance(t, Var) else t for t in atom]
                rest_atoms = r.body[:i] + r.body[i + 1:]
                for edge in dgraph.match(*bound):
                    mu = _unify(atom, edge)
                    if mu is None:
                        continue
                    rest = [_substitute(a, mu) for a in rest_atoms]
                    for nu in (eval_pattern(current, rest) if rest else [Mapping()]):
                        full = {**mu, **nu}
                        for h in r.head:
                            e = _instantiate(h, full)
                            if e not in total:
                                new.add(e)
        total |= new
        delta = new
        if new:
            current = Graph(total, nodes=g.nodes)
            dgraph = Graph(new)
    return current


def naive_least_model(g: Graph, rs: RuleSet) -> Graph:
    """Reference fixpoint: re-apply every rule to the whole graph each round."""
    current = g
    while True:
        derived = set()
        for r in rs.rules:
            derived |= apply_rule(current, r).edges
        if derived <= current.edges:
            return current
        current = Graph(current.edges | derived, nodes=g.nodes)


def entails_ground(g1: Graph, g2: Graph, rs: RuleSet) -> bool:
    blank = sorted(n for n in g2.nodes if n.startswith("_:"))
    if blank:
        raise RuleError(f"entailment target must be ground, found existential node(s) {blank[:3]}")
    return g2.edges <= least_model(g1, rs).edges


# ---------------------------------------------------------------------------
# Rule libraries

x, y, z, c, d, p, q, r_ = (Var(n) for n in ("x", "y", "z", "c", "d", "p", "q", "r"))


def _rdfs_rules() -> list[Rule]:
    e = Var("e")
    return [
        Rule([(x, "type", c), (c, "subc. of", d)], [(x, "type", d)], "subclass-1"),
        Rule([(c, "subc. of", d), (d, "subc. of", e)], [(c, "subc. of", e)], "subclass-2"),
        Rule([(x, p, y), (p, "subp. of", q)], [(x, q, y)], "subproperty-1"),
        Rule([(p, "subp. of", q), (q, "subp. of", r_)], [(p, "subp. of", r_)], "subproperty-2"),
        Rule([(x, p, y), (p, "domain", c)], [(x, "type", c)], "domain"),
        Rule([(x, p, y), (p, "range", c)], [(y, "type", c)], "range"),
    ]


def _list_atoms(owner_var: Var, items: Sequence[Var], prefix: str) -> list[tuple]:
    """Atoms spelling out a first/rest list of exactly ``len(items)`` members."""
    cells = [owner_var] + [Var(f"{prefix}cell{i}") for i in range(1, len(items))]
    atoms = []
    for i, item in enumerate(items):
        atoms.append((cells[i], "first", item))
        nxt = cells[i + 1] if i + 1 < len(items) else "nil"
        atoms.append((cells[i], "rest", nxt))
    return atoms


def _list_rules() -> list[Rule]:
    rules = []
    lst = Var("list")
    for n in range(1, MAX_LIST_LENGTH + 1):
        members = [Var(f"m{i}") for i in range(n)]
        shape = _list_atoms(lst, members, "l")
        # chain: x m0 y1 m1 y2 ... -> x p y
        hops = [Var(f"y{i}") for i in range(n + 1)]
        path = [(hops[i], members[i], hops[i + 1]) for i in range(n)]
        rules.append(Rule([(p, "chain", lst)] + shape + path, [(hops[0], p, hops[-1])], f"chain-{n}"))
        for i, m in enumerate(members):
            rules.append(Rule([(c, "union", lst)] + shape + [(x, "type", m)], [(x, "type", c)], f"union-{n}-{i}"))
            rules.append(Rule([(c, "inter.", lst)] + shape + [(x, "type", c)], [(x, "type", m)], f"inter-down-{n}-{i}"))
            rules.append(Rule([(c, "one of", lst)] + shape, [(m, "type", c)], f"one-of-{n}-{i}"))
        rules.append(Rule([(c, "inter.", lst)] + shape + [(x, "type", m) for m in members],
                          [(x, "type", c)], f"inter-up-{n}"))
        if n <= 3:
            x2 = Var("x2")
            vals = [Var(f"v{i}") for i in range(n)]
            key_body = [(c, "key", lst)] + shape + [(x, "type", c), (x2, "type", c)]
            key_body += [(x, members[i], vals[i]) for i in range(n)]
            key_body += [(x2, members[i], vals[i]) for i in range(n)]
            rules.append(Rule(key_body, [(x, "same as", x2)], f"key-{n}"))
    return rules


def _owl_rules() -> list[Rule]:
    y2, v = Var("y2"), Var("v")
    return [
        Rule([(p, "equiv. p.", q), (x, p, y)], [(x, q, y)], "equivalent-property-1"),
        Rule([(p, "equiv. p.", q), (x, q, y)], [(x, p, y)], "equivalent-property-2"),
        Rule([(p, "inv. of", q), (x, p, y)], [(y, q, x)], "inverse-1"),
        Rule([(p, "inv. of", q), (x, q, y)], [(y, p, x)], "inverse-2"),
        Rule([(p, "type", "Symmetric"), (x, p, y)], [(y, p, x)], "symmetric"),
        Rule([(p, "type", "Transitive"), (x, p, y), (y, p, z)], [(x, p, z)], "transitive"),
        Rule([(c, "equiv. c.", d), (x, "type", c)], [(x, "type", d)], "equivalent-class-1"),
        Rule([(c, "equiv. c.", d), (x, "type", d)], [(x, "type", c)], "equivalent-class-2"),
        Rule([(x, "same as", y)], [(y, "same as", x)], "same-as-symmetric"),
        Rule([(x, "same as", y), (y, "same as", z)], [(x, "same as", z)], "same-as-transitive"),
        Rule([(p, "type", "Functional"), (x, p, y), (x, p, y2)], [(y, "same as", y2)], "functional"),
        Rule([(p, "type", "Inv. Functional"), (y, p, x), (y2, p, x)], [(y, "same as", y2)], "inverse-functional"),
        Rule([(c, "value", v), (c, "prop", p), (x, "type", c)], [(x, p, v)], "has-value-1"),
        Rule([(c, "value", v), (c, "prop", p), (x, p, v)], [(x, "type", c)], "has-value-2"),
        Rule([(c, "some", d), (c, "prop", p), (x, p, y), (y, "type", d)], [(x, "type", c)], "some-values"),
        Rule([(c, "all", d), (c, "prop", p), (x, "type", c), (x, p, y)], [(y, "type", d)], "all-values"),
    ] + _list_rules()


def builtin_ruleset(name: str) -> RuleSet:
    if name == "rdfs":
        return RuleSet(_rdfs_rules(), "rdfs")
    if name == "owl-subset":
        return RuleSet(_rdfs_rules() + _owl_rules(), "owl-subset")
    raise RuleError(f"unknown builtin ruleset {name!r} (known: rdfs, owl-subset)")


# ---------------------------------------------------------------------------
# Consistency

@dataclass(frozen=True, order=True)
class Violation:
    feature: str
    witnesses: tuple

    def __post_init__(self):
        if not self.witnesses:
            raise ValueError("a violation needs at least one witness edge")


n_ = Var("n")

_CONSTRAINTS: list[tuple[str, list[tuple], tuple | None]] = [
    # (feature, pattern, edge that must be absent for consistency or None)
    ("disjoint-class", [(c, "disj. c.", d), (x, "type", c), (x, "type", d)], None),
    ("complement", [(c, "comp.", d), (x, "type", c), (x, "type", d)], None),
    ("disjoint-property", [(p, "disj. p.", q), (x, p, y), (x, q, y)], None),
    ("asymmetric", [(p, "type", "Asymmetric"), (x, p, y), (y, p, x)], None),
    ("irreflexive", [(p, "type", "Irreflexive"), (x, p, x)], None),
    ("different-from", [(x, "diff. from", y), (x, "same as", y)], None),
    ("negation", [(n_, "type", "Neg"), (n_, "sub", x), (n_, "pre", p), (n_, "obj", y)], (x, p, y)),
]


def _violations(m: Graph) -> list[Violation]:
    found = set()
    for feature, pattern, positive in _CONSTRAINTS:
        for mu in eval_pattern(m, pattern):
            witnesses = {_instantiate(tr, mu) for tr in pattern}
            if positive is not None:
                e = _instantiate(positive, mu)
                if e not in m:
                    continue
                witnesses.add(e)
            found.add(Violation(feature, tuple(sorted(witnesses))))
    return sorted(found)


def check_consistency(g: Graph, rs: RuleSet) -> list[Violation]:
    """Materialise ``g`` under ``rs`` and report every entailed clash."""
    return _violations(least_model(g, rs))
