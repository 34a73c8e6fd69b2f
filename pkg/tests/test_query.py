import itertools
import random
from collections import Counter

import pytest

from kgraph.graph import Graph
from kgraph.query import (
    Alt,
    AntiJoin,
    BGP,
    Concat,
    Eq,
    Inverse,
    Join,
    Label,
    LeftJoin,
    Mapping,
    Minus,
    Not,
    PathAtom,
    Project,
    QueryError,
    Select,
    Star,
    Union,
    Var,
    enumerate_paths,
    eval_algebra,
    eval_path_expr,
    eval_pattern,
    eval_rpq,
    format_table,
    parse_query,
)
from conftest import fixture_path

V = Var


def rows(solutions, *names):
    return [tuple(m.get(n) for n in names) for m in solutions]


FIG3 = [(V("ev"), "type", "Food Festival"), (V("ev"), "venue", V("vn1")), (V("ev"), "venue", V("vn2"))]


def test_fig3_homomorphism_gives_five_mappings(events):
    got = rows(eval_pattern(events, FIG3), "ev", "vn1", "vn2")
    assert sorted(got) == sorted([
        ("EID16", "Piscina Olímpica", "Sotomayor"),
        ("EID16", "Sotomayor", "Piscina Olímpica"),
        ("EID16", "Piscina Olímpica", "Piscina Olímpica"),
        ("EID16", "Sotomayor", "Sotomayor"),
        ("EID15", "Santa Lucía", "Santa Lucía"),
    ])


def test_fig3_node_edge_isomorphism_keeps_first_two(events):
    got = rows(eval_pattern(events, FIG3, mode="node-edge-iso"), "ev", "vn1", "vn2")
    assert sorted(got) == [
        ("EID16", "Piscina Olímpica", "Sotomayor"),
        ("EID16", "Sotomayor", "Piscina Olímpica"),
    ]


def test_edge_iso_only_constrains_label_variables(events):
    q = [(V("a"), V("l1"), "Santiago"), (V("a"), V("l2"), "Santiago")]
    hom = rows(eval_pattern(events, q), "a", "l1", "l2")
    iso = rows(eval_pattern(events, q, mode="edge-iso"), "a", "l1", "l2")
    assert ("Viña del Mar", "bus", "flight") in iso
    assert ("Arica", "flight", "flight") in hom
    assert all(l1 != l2 for _, l1, l2 in iso)
    nodeiso = eval_pattern(events, [(V("a"), "bus", V("b")), (V("b"), "bus", V("a"))], mode="node-edge-iso")
    assert all(m["a"] != m["b"] for m in nodeiso)


def test_ground_pattern_gives_single_empty_mapping(events):
    sol = eval_pattern(events, [("Santa Lucía", "city", "Santiago"), ("EID15", "venue", "Santa Lucía")])
    assert sol == [Mapping({})]
    assert eval_pattern(events, [("Santa Lucía", "city", "Arica")]) == []


def test_fig4_bag_and_set_semantics(events):
    q = parse_query(fixture_path("fig4.sexp").read_text(encoding="utf-8"))
    bag = rows(eval_algebra(events, q, semantics="bag"), "name1", "con", "name2")
    expected = Counter({
        ("Food Truck", "bus", "Food Truck"): 2,
        ("Food Truck", "bus", "Ñam"): 1,
        ("Food Truck", "flight", "Ñam"): 2,
        ("Ñam", "bus", "Food Truck"): 1,
        ("Ñam", "flight", "Food Truck"): 2,
    })
    assert Counter(bag) == expected
    setrows = rows(eval_algebra(events, q, semantics="set"), "name1", "con", "name2")
    assert sorted(setrows) == sorted(expected)


def test_fig5_complex_pattern(events):
    q = parse_query(fixture_path("fig5.sexp").read_text(encoding="utf-8"))
    for semantics in ("set", "bag"):
        sol = eval_algebra(events, q, semantics=semantics)
        assert rows(sol, "event", "start", "name") == [("EID16", None, "Food Truck")]


def test_fig7_navigational_pattern(events):
    q = parse_query(fixture_path("fig7.sexp").read_text(encoding="utf-8"))
    got = rows(eval_algebra(events, q), "event", "name", "city")
    assert got == [
        ("EID15", "Ñam", "Santiago"),
        ("EID16", "Food Truck", "Arica"),
        ("EID16", "Food Truck", "Viña del Mar"),
    ]


def test_bus_star_from_arica(events):
    reach = {b for a, b in eval_path_expr(events, Star(Label("bus"))) if a == "Arica"}
    # Viña del Mar has buses to both Arica and Santiago, so Santiago is reachable too.
    assert reach == {"Arica", "Viña del Mar", "Santiago"}


def test_inverse_and_star_contain_expected_pairs(events):
    flight = eval_path_expr(events, Label("flight"))
    assert eval_path_expr(events, Inverse(Label("flight"))) == {(b, a) for a, b in flight}
    star = eval_path_expr(events, Star(Label("name")))
    assert {(v, v) for v in events.nodes} <= star


def test_rpq_endpoint_cases(events):
    assert eval_rpq(events, "Arica", Star(Label("bus")), "Arica") == [Mapping({})]
    assert eval_rpq(Graph([("a", "bus", "b")]), "a", Concat(Label("flight"), Label("flight")), V("z")) == []
    to_stgo = eval_rpq(events, V("x"), Label("flight"), "Santiago")
    assert sorted(m["x"] for m in to_stgo) == ["Arica", "Viña del Mar"]
    loops = eval_rpq(events, V("x"), Concat(Label("bus"), Label("bus")), V("x"))
    assert sorted(m["x"] for m in loops) == ["Arica", "Santiago", "Viña del Mar"]
    assert all(m.dom == {"x"} for m in loops)


def test_select_rejects_unknown_variable(events):
    with pytest.raises(QueryError):
        eval_algebra(events, Select(Eq(V("nope"), "x"), BGP(FIG3)))


def test_project_rejects_unknown_variable():
    with pytest.raises(QueryError):
        parse_query('(project (?zz) (bgp (?a "p" ?b)))')


def test_select_and_minus(events):
    base = BGP([(V("c"), "flight", V("d"))])
    sel = eval_algebra(events, Select(Not(Eq(V("c"), "Santiago")), base))
    assert sorted(rows(sel, "c")) == [("Arica",), ("Viña del Mar",)]
    minus = eval_algebra(events, Minus(base, BGP([(V("c"), "bus", V("d"))])))
    assert ("Santiago", "Arica") in rows(minus, "c", "d")
    assert ("Santiago", "Viña del Mar") not in rows(minus, "c", "d")


def test_unbound_comparison_is_false(events):
    q = Select(Eq(V("start"), "x"), LeftJoin(BGP([(V("e"), "name", V("n"))]), BGP([(V("e"), "start", V("start"))])))
    assert eval_algebra(events, q) == []
    q2 = Select(Not(Eq(V("start"), "x")), LeftJoin(BGP([(V("e"), "name", V("n"))]), BGP([(V("e"), "start", V("start"))])))
    assert len(eval_algebra(events, q2)) == 2


def test_table_output_has_header_and_empty_unbound(events):
    q = parse_query(fixture_path("fig5.sexp").read_text(encoding="utf-8"))
    text = format_table(eval_algebra(events, q), q)
    assert text == "event\tname\tstart\nEID16\tFood Truck\t\n"


def test_enumerate_paths_lists_simple_paths(events):
    paths = enumerate_paths(events, "Arica", Star(Label("bus")), V("c"), 2)
    assert ["Arica"] in paths
    assert ["Arica", "bus", "Viña del Mar"] in paths
    assert ["Arica", "bus", "Viña del Mar", "bus", "Santiago"] in paths
    assert all(len(p) <= 5 for p in paths)


def test_parser_errors():
    for bad in ['(bgp (?a "p"))', "(frob)", '(path ?a (star) ?b)', "(bgp", '(filter (< ?a "b") (bgp (?a "p" ?b)))']:
        with pytest.raises(QueryError):
            parse_query(bad)


# ---- property checks against brute-force oracles -------------------------


def random_graph(rng, n_nodes, n_edges, labels=("p", "q")):
    nodes = [f"n{i}" for i in range(n_nodes)]
    return Graph({(rng.choice(nodes), rng.choice(labels), rng.choice(nodes)) for _ in range(n_edges)})


def random_pattern(rng, g, n_edges):
    vars_ = [V("x"), V("y"), V("z")]
    consts = sorted(g.nodes) or ["n0"]
    def term(label=False):
        if rng.random() < 0.7:
            return rng.choice(vars_ + [V("l")] if label else vars_)
        return rng.choice(sorted(g.labels) or ["p"]) if label else rng.choice(consts)
    return [(term(), term(label=True), term()) for _ in range(n_edges)]


def brute_force(g, pattern, mode):
    variables = sorted({t.name for tr in pattern for t in tr if isinstance(t, Var)})
    universe = sorted(g.nodes | g.labels)
    out = set()
    for values in itertools.product(universe, repeat=len(variables)):
        mu = dict(zip(variables, values))
        image = [tuple(mu[t.name] if isinstance(t, Var) else t for t in tr) for tr in pattern]
        if not all(e in g.edges for e in image):
            continue
        edge_vars = {tr[1].name for tr in pattern if isinstance(tr[1], Var)}
        node_vars = {t.name for tr in pattern for t in (tr[0], tr[2]) if isinstance(t, Var)}
        group = {"homomorphism": set(), "edge-iso": edge_vars, "node-edge-iso": edge_vars | node_vars}[mode]
        vals = [mu[v] for v in group]
        if len(vals) != len(set(vals)):
            continue
        out.add(tuple(sorted(mu.items())))
    return out


@pytest.mark.parametrize("mode", ["homomorphism", "edge-iso", "node-edge-iso"])
def test_pattern_evaluation_matches_exhaustive_oracle(mode):
    rng = random.Random(hash(mode) % 1000)
    for _ in range(60):
        g = random_graph(rng, rng.randint(1, 8), rng.randint(0, 10))
        pat = random_pattern(rng, g, rng.randint(1, 3))
        got = {tuple(sorted(m.items())) for m in eval_pattern(g, pat, mode=mode)}
        assert got == brute_force(g, pat, mode)


def test_homomorphism_contains_iso_results():
    rng = random.Random(5)
    for _ in range(40):
        g = random_graph(rng, 6, 9)
        pat = random_pattern(rng, g, 3)
        hom = set(eval_pattern(g, pat))
        assert set(eval_pattern(g, pat, mode="edge-iso")) <= hom
        assert set(eval_pattern(g, pat, mode="node-edge-iso")) <= hom


def closure_oracle(nodes, pairs):
    idx = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    m = [[i == j for j in range(n)] for i in range(n)]
    for a, b in pairs:
        m[idx[a]][idx[b]] = True
    for k in range(n):
        for i in range(n):
            if m[i][k]:
                for j in range(n):
                    if m[k][j]:
                        m[i][j] = True
    return {(nodes[i], nodes[j]) for i in range(n) for j in range(n) if m[i][j]}


def test_star_matches_matrix_closure():
    rng = random.Random(9)
    exprs = [Label("p"), Alt(Label("p"), Label("q")), Concat(Label("p"), Inverse(Label("q"))), Inverse(Label("p"))]
    for _ in range(40):
        g = random_graph(rng, rng.randint(1, 10), rng.randint(0, 15))
        for r in exprs:
            base = eval_path_expr(g, r)
            assert eval_path_expr(g, Star(r)) == closure_oracle(sorted(g.nodes), base)


def test_join_is_commutative_and_associative():
    rng = random.Random(12)
    for _ in range(40):
        g = random_graph(rng, 5, 8)
        a, b, c = (BGP(random_pattern(rng, g, 1)) for _ in range(3))
        ab = set(eval_algebra(g, Join(a, b)))
        assert ab == set(eval_algebra(g, Join(b, a)))
        assert set(eval_algebra(g, Join(Join(a, b), c))) == set(eval_algebra(g, Join(a, Join(b, c))))


def test_set_semantics_equals_deduplicated_bag():
    rng = random.Random(13)
    ops = [Join, Union, Minus, AntiJoin, LeftJoin]
    for _ in range(60):
        g = random_graph(rng, 5, 8)
        a, b = (BGP(random_pattern(rng, g, rng.randint(1, 2))) for _ in range(2))
        expr = Project([V("x")], rng.choice(ops)(a, b)) if rng.random() < 0.5 else rng.choice(ops)(a, b)
        if isinstance(expr, Project) and "x" not in {v.name for v in expr.child.variables()}:
            continue
        bag = eval_algebra(g, expr, semantics="bag")
        st = eval_algebra(g, expr, semantics="set")
        assert sorted(set(bag), key=repr) == sorted(st, key=repr)
        assert len(st) == len(set(st))


def test_union_bag_keeps_duplicates(events):
    q = Union(BGP([(V("e"), "type", "Food Festival")]), BGP([(V("e"), "type", "Open Market")]))
    assert len(eval_algebra(events, q, semantics="bag")) == 4
    assert len(eval_algebra(events, q, semantics="set")) == 2


def test_path_atom_inside_algebra(events):
    q = Join(BGP([(V("e"), "venue", V("v"))]), PathAtom(V("v"), Concat(Label("city"), Label("bus")), V("c")))
    got = set(rows(eval_algebra(events, q), "e", "c"))
    assert ("EID16", "Santiago") in got and ("EID15", "Viña del Mar") in got
