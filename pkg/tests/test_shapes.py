import random

import pytest

from kgraph.graph import Graph
from kgraph.shapes import (
    And,
    Cond,
    InSet,
    Not,
    Qualified,
    Ref,
    Schema,
    SchemaError,
    StratificationError,
    TrueShape,
    compute_shapes_map,
    eval_shape,
    least_fixpoint_map,
    parse_schema,
    parse_targets,
    validate,
)
from conftest import fixture_path


@pytest.fixture(scope="module")
def event_schema():
    return parse_schema(fixture_path("events.shapes").read_text(encoding="utf-8"))


def test_true_holds_everywhere(events):
    sigma = compute_shapes_map(events, Schema({"S": TrueShape()}))
    assert all(v == 1 for v in sigma.values())
    assert len(sigma) == len(events.nodes)


def test_event_conformance(events, event_schema):
    sigma = compute_shapes_map(events, event_schema)
    assert sigma[("EID15", "Event")] == 1
    assert sigma[("EID16", "Event")] == 0
    assert sigma[("Santiago", "City")] == 1
    assert sigma[("Santa Lucía", "Venue")] == 1
    assert len(sigma) == len(events.nodes) * 4


def test_shapes_map_is_a_fixpoint(events, event_schema):
    sigma = compute_shapes_map(events, event_schema)
    for (v, s), bit in sigma.items():
        assert eval_shape(events, v, event_schema.shapes[s], sigma) == bit


def test_validation_outcomes(events, event_schema):
    assert validate(events, event_schema, []).valid
    report = validate(events, event_schema, [("EID15", "Event"), ("EID16", "Event")])
    assert not report.valid
    assert report.violations == [("EID16", "Event")]
    ok = parse_targets(fixture_path("events-targets-ok.tsv").read_text(encoding="utf-8"))
    assert validate(events, event_schema, ok).valid


def test_unknown_target_label_is_an_error(events, event_schema):
    with pytest.raises(SchemaError):
        validate(events, event_schema, [("EID15", "Festival")])


def test_barber_schema_is_rejected(events):
    schema = parse_schema(fixture_path("barber.shapes").read_text(encoding="utf-8"))
    with pytest.raises(StratificationError) as err:
        compute_shapes_map(events, schema)
    assert "Barber" in str(err.value)


def test_unknown_condition_and_reference():
    with pytest.raises(SchemaError):
        parse_schema("(schema (shape A (cond prime)))")
    with pytest.raises(SchemaError):
        parse_schema("(schema (shape A (ref B)))")
    with pytest.raises(SchemaError):
        parse_schema('(schema (shape A (count "p" true 3 1)))')


def test_population_condition():
    g = Graph([("Big", "population", "6000"), ("Small", "population", "100"), ("Odd", "population", "lots")])
    schema = parse_schema('(schema (shape City (count "population" (and (cond int) (cond ">5000")) 1 1)))')
    sigma = compute_shapes_map(g, schema)
    assert sigma[("Big", "City")] == 1
    assert sigma[("Small", "City")] == 0
    assert sigma[("Odd", "City")] == 0


def test_datatype_conditions():
    g = Graph(nodes=["true", "12", "-3.5", "2018-03-22 12:00", "2018-03-22T12:00:01", "hello", '"7"^^int', '"x"@en'])
    check = lambda name, v: eval_shape(g, v, Cond(name), {})
    assert check("boolean", "true") and not check("boolean", "12")
    assert check("int", "12") and check("int", '"7"^^int') and not check("int", "-3.5")
    assert check("float", "-3.5") and check("float", "12")
    assert check("dateTime", "2018-03-22 12:00") and check("dateTime", "2018-03-22T12:00:01")
    assert not check("dateTime", "hello")
    assert check("string", "hello") and check("string", '"x"@en') and not check("string", '"7"^^int')
    assert check("<=12", "12") and not check("<12", "12") and check(">=-4", "-3.5")


def test_or_inheritance_and_closed_shapes():
    g = Graph([("a", "p", "b"), ("a", "q", "c"), ("d", "p", "b")])
    schema = parse_schema("""
      (schema
        (shape Base (count "p" true 1 *))
        (shape Child (extends Base) (or (count "q" true 1 *) (in "zzz")))
        (shape OnlyP (closed ("p") true)))
    """)
    sigma = compute_shapes_map(g, schema)
    assert sigma[("a", "Child")] == 1 and sigma[("d", "Child")] == 0
    assert sigma[("d", "OnlyP")] == 1 and sigma[("a", "OnlyP")] == 0
    assert sigma[("b", "OnlyP")] == 1


def test_or_of_recursive_references_is_stratified():
    g = Graph([("a", "next", "b"), ("b", "next", "c"), ("c", "end", "x")])
    schema = parse_schema('(schema (shape Reach (or (count "end" true 1 *) (count "next" (ref Reach) 1 *))))')
    sigma = compute_shapes_map(g, schema)
    assert [sigma[(n, "Reach")] for n in "abcx"] == [1, 1, 1, 0]


def random_shape(rng, labels, depth=0, allow_not=True):
    choices = ["true", "in", "ref", "count", "and"] + (["not"] if allow_not else [])
    kind = rng.choice(choices if depth < 2 else ["true", "in", "ref"])
    if kind == "true":
        return TrueShape()
    if kind == "in":
        return InSet(frozenset(rng.sample(["n0", "n1", "n2", "n3"], 2)))
    if kind == "ref":
        return Ref(rng.choice(labels))
    if kind == "and":
        return And(random_shape(rng, labels, depth + 1, allow_not), random_shape(rng, labels, depth + 1, allow_not))
    if kind == "not":
        return Not(random_shape(rng, labels, depth + 1, allow_not))
    lo = rng.randint(0, 2)
    return Qualified(rng.choice(["p", "q"]), random_shape(rng, labels, depth + 1, allow_not), lo, None)


def random_graph(rng):
    nodes = [f"n{i}" for i in range(5)]
    return Graph({(rng.choice(nodes), rng.choice("pq"), rng.choice(nodes)) for _ in range(rng.randint(0, 9))}, nodes=nodes)


def test_monotone_schemas_agree_with_global_least_fixpoint():
    rng = random.Random(4)
    for _ in range(80):
        labels = ["A", "B", "C"]
        schema = Schema({l: random_shape(rng, labels, allow_not=False) for l in labels})
        g = random_graph(rng)
        assert compute_shapes_map(g, schema) == least_fixpoint_map(g, schema)


def test_stratified_results_are_fixpoints_and_connectives_behave():
    rng = random.Random(8)
    checked = 0
    for _ in range(200):
        labels = ["A", "B", "C"]
        schema = Schema({l: random_shape(rng, labels) for l in labels})
        g = random_graph(rng)
        try:
            sigma = compute_shapes_map(g, schema)
        except StratificationError:
            continue
        checked += 1
        for (v, s), bit in sigma.items():
            phi = schema.shapes[s]
            assert eval_shape(g, v, phi, sigma) == bit
            if isinstance(phi, And):
                assert bit == min(eval_shape(g, v, phi.left, sigma), eval_shape(g, v, phi.right, sigma))
            if isinstance(phi, Not):
                assert bit == 1 - eval_shape(g, v, phi.shape, sigma)
    assert checked > 30


def test_adding_edges_keeps_lower_bounds_satisfied():
    rng = random.Random(21)
    for _ in range(60):
        g = random_graph(rng)
        phi = Qualified(rng.choice("pq"), TrueShape(), rng.randint(0, 2), None)
        before = {v: eval_shape(g, v, phi, {}) for v in g.nodes}
        bigger = g.with_edges([(rng.choice(sorted(g.nodes)), rng.choice("pq"), rng.choice(sorted(g.nodes)))])
        for v, bit in before.items():
            if bit:
                assert eval_shape(bigger, v, phi, {}) == 1
