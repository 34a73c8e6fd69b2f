"""Knowledge-graph embeddings: TransE, TransH, DistMult, RESCAL and ComplEx.

Parameters live in plain numpy arrays keyed by node or label.  Gradients of
each plausibility function are written out by hand (see ``gradients``) and
training is plain SGD on a margin ranking loss with negatives made by
corrupting the subject or object of a positive edge.

Gradients of complex parameters are packed as ``d/d(real) + 1j * d/d(imag)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .graph import Graph
from .tensors import dot, mm

KINDS = ("TransE", "TransH", "DistMult", "RESCAL", "ComplEx")
_KIND_BY_LOWER = {k.lower(): k for k in KINDS}

#: TransH soft orthogonality: weight and dead zone for (w . r / |r|)^2.
TRANSH_PENALTY_WEIGHT = 0.1
TRANSH_EPSILON = 1e-3


class EmbeddingError(ValueError):
    pass


def canonical_kind(kind: str) -> str:
    try:
        return _KIND_BY_LOWER[kind.lower()]
    except KeyError:
        raise EmbeddingError(f"unknown model kind {kind!r} (known: {', '.join(KINDS)})") from None


@dataclass
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives: int = 2
    seed: int = 1
    p: int = 2
    dim: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.negatives < 1:
            raise ValueError("need at least one negative per positive")
        if self.p not in (1, 2):
            raise ValueError("TransE norm exponent must be 1 or 2")
        if self.dim < 1:
            raise ValueError("dimension must be positive")


@dataclass
class EmbeddingModel:
    kind: str
    entity: dict
    relation: dict
    aux: dict = field(default_factory=dict)
    d_e: int = 0
    d_r: int = 0
    seed: int = 0
    q: int = 2

    def _lookup(self, s, p, o):
        missing = [x for x in (s, o) if x not in self.entity]
        if missing:
            raise EmbeddingError(f"unknown node(s) {missing}")
        if p not in self.relation:
            raise EmbeddingError(f"unknown edge label {p!r}")
        return self.entity[s], self.relation[p], self.entity[o]


# ---------------------------------------------------------------------------
# Scoring and gradients

def score(m: EmbeddingModel, edge) -> float:
    s, p, o = edge
    h, r, t = m._lookup(s, p, o)
    if m.kind == "TransE":
        u = h + r - t
        return -float(np.sum(np.abs(u) ** m.q) ** (1.0 / m.q))
    if m.kind == "TransH":
        w = m.aux[p]
        # (h - (h.w)w) + r - (t - (t.w)w), regrouped around h - t
        delta = h - t
        a = delta - dot(delta, w) * w + r
        return -dot(a, a)
    if m.kind == "DistMult":
        # h * t first: elementwise products commute exactly, so swapping s and o
        # cannot change a single bit of the result
        return float(np.sum(r * (h * t)))
    if m.kind == "RESCAL":
        return float(mm(h[None, :], mm(r, t[:, None]))[0, 0])
    if m.kind == "ComplEx":
        return float(np.real(np.sum(h * r * np.conj(t))))
    raise EmbeddingError(f"unknown model kind {m.kind!r}")


def gradients(m: EmbeddingModel, edge) -> dict:
    """Partial derivatives of ``score`` keyed by ("E"|"R"|"AUX", name).

    When the subject and object coincide their contributions are summed.
    """
    s, p, o = edge
    h, r, t = m._lookup(s, p, o)
    out: dict = {}

    def add(key, g):
        out[key] = out[key] + g if key in out else g

    if m.kind == "TransE":
        u = h + r - t
        if m.q == 1:
            gu = -np.sign(u)
        else:
            n = math.sqrt(dot(u, u))
            gu = -u / n if n > 0 else np.zeros_like(u)
        add(("E", s), gu)
        add(("R", p), gu.copy())
        add(("E", o), -gu)
    elif m.kind == "TransH":
        w = m.aux[p]
        delta = h - t
        a = delta - dot(delta, w) * w + r
        g = -2.0 * a
        proj = g - w * dot(w, g)
        add(("E", s), proj)
        add(("E", o), -proj)
        add(("R", p), g)
        add(("AUX", p), -(dot(g, w) * delta + dot(w, delta) * g))
    elif m.kind == "DistMult":
        add(("E", s), r * t)
        add(("R", p), h * t)
        add(("E", o), h * r)
    elif m.kind == "RESCAL":
        add(("E", s), mm(r, t[:, None])[:, 0])
        add(("R", p), mm(h[:, None], t[None, :]))
        add(("E", o), mm(r.T, h[:, None])[:, 0])
    elif m.kind == "ComplEx":
        a, b = h.real, h.imag
        c, d = r.real, r.imag
        e, f = t.real, t.imag
        add(("E", s), (c * e + d * f) + 1j * (c * f - d * e))
        add(("R", p), (a * e + b * f) + 1j * (a * f - b * e))
        add(("E", o), (a * c - b * d) + 1j * (a * d + b * c))
    else:
        raise EmbeddingError(f"unknown model kind {m.kind!r}")
    return out


def transh_penalty(r: np.ndarray, w: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Soft penalty keeping the translation inside the relation hyperplane.

    Returns the penalty and its gradients with respect to ``r`` and ``w``.
    """
    nr = math.sqrt(dot(r, r))
    if nr == 0.0:
        return 0.0, np.zeros_like(r), np.zeros_like(w)
    cos = dot(w, r) / nr
    excess = cos * cos - TRANSH_EPSILON ** 2
    if excess <= 0:
        return 0.0, np.zeros_like(r), np.zeros_like(w)
    k = TRANSH_PENALTY_WEIGHT * 2.0 * cos
    dcos_dr = w / nr - dot(w, r) * r / nr ** 3
    dcos_dw = r / nr
    return TRANSH_PENALTY_WEIGHT * excess, k * dcos_dr, k * dcos_dw


# ---------------------------------------------------------------------------
# Constraints

def _norm(x) -> float:
    return float(np.sqrt(np.sum(np.abs(x) ** 2)))


def _unit(x):
    n = _norm(x)
    return x / n if n > 0 else x


def _clip(x):
    n = _norm(x)
    return x / n if n > 1.0 else x


def _project(m: EmbeddingModel, key) -> None:
    table, name = key
    if table == "E":
        v = m.entity[name]
        m.entity[name] = _unit(v) if m.kind in ("TransE", "DistMult") else _clip(v)
    elif table == "R":
        if m.kind in ("DistMult", "RESCAL", "ComplEx"):
            m.relation[name] = _clip(m.relation[name])
    elif table == "AUX":
        m.aux[name] = _unit(m.aux[name])


def check_constraints(m: EmbeddingModel, tol: float = 1e-6) -> None:
    """Raise ``AssertionError`` if a norm condition of the model kind fails."""
    def eq1(x, what):
        assert abs(_norm(x) - 1.0) <= tol, f"{what}: norm {_norm(x)} != 1"

    def le1(x, what):
        assert _norm(x) <= 1.0 + tol, f"{what}: norm {_norm(x)} > 1"

    for n, v in m.entity.items():
        (eq1 if m.kind in ("TransE", "DistMult") else le1)(v, f"entity {n}")
    if m.kind in ("DistMult", "RESCAL", "ComplEx"):
        for n, v in m.relation.items():
            le1(v, f"relation {n}")
    if m.kind == "TransH":
        for n, w in m.aux.items():
            eq1(w, f"hyperplane {n}")
    if m.kind == "ComplEx":
        assert all(np.iscomplexobj(v) for v in m.entity.values())


# ---------------------------------------------------------------------------
# Initialisation and training

def _uniform(rng: np.random.Generator, shape, bound: float, complex_: bool):
    x = rng.uniform(-bound, bound, size=shape)
    if complex_:
        x = x + 1j * rng.uniform(-bound, bound, size=shape)
    return x


def init_model(g: Graph, kind: str, dim: int, seed: int, q: int = 2,
               rng: np.random.Generator | None = None) -> EmbeddingModel:
    kind = canonical_kind(kind)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(seed))
    bound = 6.0 / math.sqrt(dim)
    cx = kind == "ComplEx"
    entity = {n: _uniform(rng, (dim,), bound, cx) for n in sorted(g.nodes)}
    rshape = (dim, dim) if kind == "RESCAL" else (dim,)
    relation = {lab: _uniform(rng, rshape, bound, cx) for lab in sorted(g.labels)}
    aux = {lab: _uniform(rng, (dim,), bound, False) for lab in sorted(g.labels)} if kind == "TransH" else {}
    m = EmbeddingModel(kind, entity, relation, aux, dim, dim, seed, q)
    for n in entity:
        _project(m, ("E", n))
    for lab in relation:
        _project(m, ("R", lab))
        if aux:
            _project(m, ("AUX", lab))
    return m


def sample_negative(g: Graph, edge, rng: np.random.Generator, nodes: list[str]):
    """Replace the subject or the object by a uniform node so that the result is not in ``g``.

    Returns ``None`` when no such corruption exists.
    """
    s, p, o = edge
    side = int(rng.integers(2))
    for attempt in range(20):
        n = nodes[int(rng.integers(len(nodes)))]
        cand = (n, p, o) if side == 0 else (s, p, n)
        if cand not in g:
            return cand
    # Dense neighbourhoods: fall back to an explicit list of valid corruptions.
    options = [(n, p, o) for n in nodes if (n, p, o) not in g] + [(s, p, n) for n in nodes if (s, p, n) not in g]
    if not options:
        return None
    return options[int(rng.integers(len(options)))]


def _param(m: EmbeddingModel, key):
    return {"E": m.entity, "R": m.relation, "AUX": m.aux}[key[0]], key[1]


def train(g: Graph, kind: str, cfg: TrainConfig,
          on_epoch: Callable[[int, EmbeddingModel], None] | None = None) -> EmbeddingModel:
    if not g.edges:
        raise ValueError("cannot train on a graph without edges")
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    m = init_model(g, kind, cfg.dim, cfg.seed, q=cfg.p, rng=rng)
    edges = sorted(g.edges)
    nodes = sorted(g.nodes)
    lr = cfg.learning_rate
    for epoch in range(1, cfg.epochs + 1):
        for idx in rng.permutation(len(edges)):
            pos = edges[idx]
            for _ in range(cfg.negatives):
                neg = sample_negative(g, pos, rng, nodes)
                if neg is None:
                    continue
                if cfg.margin - score(m, pos) + score(m, neg) <= 0:
                    continue
                step: dict = {}
                for key, grad in gradients(m, pos).items():
                    step[key] = step.get(key, 0) + grad
                for key, grad in gradients(m, neg).items():
                    step[key] = step.get(key, 0) - grad
                for key, grad in step.items():
                    table, name = _param(m, key)
                    table[name] = table[name] + lr * grad
                if m.kind == "TransH":
                    p = pos[1]
                    _, gr, gw = transh_penalty(m.relation[p], m.aux[p])
                    m.relation[p] = m.relation[p] - lr * gr
                    m.aux[p] = m.aux[p] - lr * gw
                    step.setdefault(("R", p), None)
                    step.setdefault(("AUX", p), None)
                for key in step:
                    _project(m, key)
        if on_epoch is not None:
            on_epoch(epoch, m)
    return m


def predict(m: EmbeddingModel, s: str, p: str, k: int) -> list[tuple[str, float]]:
    if s not in m.entity:
        raise EmbeddingError(f"unknown node {s!r}")
    if p not in m.relation:
        raise EmbeddingError(f"unknown edge label {p!r}")
    if k <= 0:
        return []
    ranked = sorted(((x, score(m, (s, p, x))) for x in m.entity), key=lambda r: (-r[1], r[0]))
    return ranked[:k]


# ---------------------------------------------------------------------------
# Persistence

def _fmt_vec(v: np.ndarray) -> str:
    flat = v.reshape(-1)
    if np.iscomplexobj(flat):
        flat = np.concatenate([flat.real, flat.imag])
    return "\t".join(repr(float(x)) for x in flat)


def write_model(m: EmbeddingModel) -> str:
    lines = [f"H\tkind={m.kind}\td_e={m.d_e}\td_r={m.d_r}\tseed={m.seed}\tq={m.q}"]
    lines += [f"E\t{n}\t{_fmt_vec(v)}" for n, v in sorted(m.entity.items())]
    lines += [f"R\t{n}\t{_fmt_vec(v)}" for n, v in sorted(m.relation.items())]
    lines += [f"AUX\t{n}\t{_fmt_vec(v)}" for n, v in sorted(m.aux.items())]
    return "\n".join(lines) + "\n"


def read_model(text: str) -> EmbeddingModel:
    rows = [ln.rstrip("\r").split("\t") for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or rows[0][0] != "H":
        raise EmbeddingError("model file must start with an H header line")
    try:
        header = dict(f.split("=", 1) for f in rows[0][1:])
        kind = canonical_kind(header["kind"])
        d_e, d_r = int(header["d_e"]), int(header["d_r"])
        seed, q = int(header.get("seed", 0)), int(header.get("q", 2))
    except (KeyError, ValueError) as exc:
        raise EmbeddingError(f"bad model header: {exc}") from None
    cx = kind == "ComplEx"
    rshape = (d_r, d_r) if kind == "RESCAL" else (d_r,)
    tables = {"E": ({}, (d_e,)), "R": ({}, rshape), "AUX": ({}, (d_r,))}
    for lineno, row in enumerate(rows[1:], start=2):
        if row[0] not in tables or len(row) < 3:
            raise EmbeddingError(f"line {lineno}: expected E/R/AUX<TAB>name<TAB>values")
        table, shape = tables[row[0]]
        want = math.prod(shape) * (2 if cx and row[0] != "AUX" else 1)
        try:
            vals = np.array([float(x) for x in row[2:]])
        except ValueError:
            raise EmbeddingError(f"line {lineno}: non-numeric value") from None
        if vals.size != want:
            raise EmbeddingError(f"line {lineno}: expected {want} values, found {vals.size}")
        if cx and row[0] != "AUX":
            half = want // 2
            vals = vals[:half] + 1j * vals[half:]
        table[row[1]] = vals.reshape(shape)
    return EmbeddingModel(kind, tables["E"][0], tables["R"][0], tables["AUX"][0], d_e, d_r, seed, q)

