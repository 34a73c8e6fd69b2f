import math

import numpy as np
import pytest

from kgraph.embeddings import (
    KINDS,
    EmbeddingError,
    EmbeddingModel,
    TrainConfig,
    check_constraints,
    gradients,
    init_model,
    predict,
    read_model,
    sample_negative,
    score,
    train,
    transh_penalty,
    write_model,
)
from kgraph.graph import Graph
from conftest import fixture_path


@pytest.fixture(scope="module")
def toy():
    return read_model(fixture_path("fig15-transe.tsv").read_text(encoding="utf-8"))


def test_fig15_score_and_prediction(toy):
    assert score(toy, ("Antofagasta", "west of", "Toconao")) == pytest.approx(0.0, abs=1e-12)
    assert score(toy, ("Antofagasta", "west of", "Santiago")) < 0
    assert predict(toy, "Antofagasta", "west of", 1)[0][0] == "Toconao"
    assert predict(toy, "Licantén", "west of", 1)[0][0] == "Curico"
    assert predict(toy, "Antofagasta", "west of", 0) == []
    full = predict(toy, "Antofagasta", "west of", 100)
    assert len(full) == 6
    assert [s for _, s in full] == sorted((s for _, s in full), reverse=True)


def test_unknown_vocabulary(toy):
    with pytest.raises(EmbeddingError):
        score(toy, ("Arica", "west of", "Toconao"))
    with pytest.raises(EmbeddingError):
        score(toy, ("Antofagasta", "bus", "Toconao"))
    with pytest.raises(EmbeddingError):
        predict(toy, "Antofagasta", "bus", 3)


def small_graph():
    return Graph([("a", "p", "b"), ("b", "p", "c"), ("c", "q", "a"), ("a", "q", "a")])


def test_distmult_is_direction_blind():
    m = init_model(small_graph(), "DistMult", dim=6, seed=3)
    for s in "abc":
        for o in "abc":
            for p in "pq":
                assert score(m, (s, p, o)) == score(m, (o, p, s))


def test_complex_with_real_parts_matches_distmult():
    g = small_graph()
    dm = init_model(g, "DistMult", dim=4, seed=5)
    cx = init_model(g, "ComplEx", dim=4, seed=5)
    cx.entity = {k: v.astype(complex) for k, v in dm.entity.items()}
    cx.relation = {k: v.astype(complex) for k, v in dm.relation.items()}
    for e in [("a", "p", "b"), ("c", "q", "a")]:
        assert score(cx, e) == pytest.approx(score(dm, e), abs=1e-12)


def test_complex_can_be_asymmetric():
    g = small_graph()
    cx = init_model(g, "ComplEx", dim=1, seed=1)
    cx.entity["a"] = np.array([1.0 + 0j])
    cx.entity["b"] = np.array([0.0 + 1j])
    cx.relation["p"] = np.array([0.0 + 1j])
    assert score(cx, ("a", "p", "b")) != score(cx, ("b", "p", "a"))


def numeric_gradient(m, edge, key, h=1e-5):
    params = {"E": m.entity, "R": m.relation, "AUX": m.aux}[key[0]]
    base = params[key[1]]
    flat = base.reshape(-1)
    out = np.zeros_like(flat)
    for i in range(flat.size):
        parts = [1.0] + ([1j] if np.iscomplexobj(flat) else [])
        for unit in parts:
            old = flat[i]
            flat[i] = old + h * unit
            up = score(m, edge)
            flat[i] = old - h * unit
            down = score(m, edge)
            flat[i] = old
            out[i] += unit * (up - down) / (2 * h)
    return out.reshape(base.shape)


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind):
    g = small_graph()
    for seed in range(3):
        m = init_model(g, kind, dim=5, seed=seed)
        for edge in [("a", "p", "b"), ("a", "q", "a"), ("c", "q", "a")]:
            grads = gradients(m, edge)
            for key, analytic in grads.items():
                numeric = numeric_gradient(m, edge, key)
                # the floor only matters for exactly-zero gradients (e.g. self loops)
                err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-8)
                assert err <= 1e-4, (kind, edge, key, err)


def test_transe_l1_gradient():
    m = init_model(small_graph(), "TransE", dim=4, seed=2, q=1)
    for key, analytic in gradients(m, ("a", "p", "b")).items():
        numeric = numeric_gradient(m, ("a", "p", "b"), key)
        assert np.allclose(analytic, numeric, atol=1e-6)


def test_transh_penalty_gradient_and_activation():
    m = init_model(small_graph(), "TransH", dim=4, seed=4)
    pen, gr, gw = transh_penalty(m.relation["p"], m.aux["p"])
    h = 1e-6
    for vec, grad in ((m.relation["p"], gr), (m.aux["p"], gw)):
        for i in range(vec.size):
            old = vec[i]
            vec[i] = old + h
            up = transh_penalty(m.relation["p"], m.aux["p"])[0]
            vec[i] = old - h
            down = transh_penalty(m.relation["p"], m.aux["p"])[0]
            vec[i] = old
            assert grad[i] == pytest.approx((up - down) / (2 * h), abs=1e-6)
    w = np.array([1.0, 0, 0, 0])
    assert transh_penalty(np.array([0.0, 1, 0, 0]), w)[0] == 0.0
    assert transh_penalty(np.array([1.0, 1, 0, 0]), w)[0] > 0


@pytest.mark.parametrize("kind", KINDS)
def test_constraints_hold_after_every_epoch(kind, airports):
    cfg = TrainConfig(epochs=5, dim=8, seed=7)
    seen = []

    def on_epoch(epoch, model):
        seen.append(epoch)
        check_constraints(model, tol=1e-6)

    train(airports, kind, cfg, on_epoch=on_epoch)
    assert seen == list(range(1, 6))


def test_training_is_reproducible(airports):
    cfg = TrainConfig(epochs=3, dim=6, seed=11)
    a = write_model(train(airports, "TransE", cfg))
    b = write_model(train(airports, "TransE", cfg))
    c = write_model(train(airports, "TransE", TrainConfig(epochs=3, dim=6, seed=12)))
    assert a == b and a != c


def test_transe_separates_positives_from_negatives(airports):
    m = train(airports, "TransE", TrainConfig(epochs=200, dim=20, seed=1))
    rng = np.random.Generator(np.random.PCG64(99))
    pos = [score(m, e) for e in sorted(airports.edges)]
    neg = [score(m, sample_negative(airports, e, rng, sorted(airports.nodes))) for e in sorted(airports.edges)]
    assert np.mean(pos) > np.mean(neg)


def test_single_edge_graph_outscores_all_corruptions():
    g = Graph([("x", "r", "y")], nodes=["z"])
    m = train(g, "TransE", TrainConfig(epochs=100, dim=4, seed=2))
    pos = score(m, ("x", "r", "y"))
    for n in sorted(g.nodes):
        for e in [(n, "r", "y"), ("x", "r", n)]:
            if e != ("x", "r", "y"):
                assert pos > score(m, e)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(p=3)
    with pytest.raises(ValueError):
        train(Graph(), "TransE", TrainConfig(epochs=1))
    with pytest.raises(EmbeddingError):
        init_model(small_graph(), "ConvE", dim=3, seed=1)


@pytest.mark.parametrize("kind", KINDS)
def test_model_roundtrip(kind):
    m = init_model(small_graph(), kind, dim=3, seed=8)
    text = write_model(m)
    back = read_model(text)
    assert write_model(back) == text
    for e in [("a", "p", "b"), ("c", "q", "a")]:
        assert score(back, e) == score(m, e)


def test_model_parse_errors():
    with pytest.raises(EmbeddingError):
        read_model("E\ta\t1\t2\n")
    with pytest.raises(EmbeddingError):
        read_model("H\tkind=TransE\td_e=2\td_r=2\tseed=0\nE\ta\t1\n")
