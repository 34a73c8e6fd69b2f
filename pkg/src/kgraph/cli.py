"""The ``kg`` command: one verb per invocation, TSV on stdout, diagnostics on stderr.

Exit status is 0 on success, 1 when the answer is negative (an invalid
graph, an inconsistency, a failed entailment) and 2 for usage or input
errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Callable, Sequence

from . import analytics, annotations, embeddings, mining, rules, schema, shapes
from .graph import (Graph, ParseError, del_to_pg, parse_dataset, parse_pg, parse_triples, pg_to_del,
                    union, write_pg, write_triples)
from .query import BGP, MODES, PathAtom, Project, enumerate_paths, QueryError, eval_algebra, format_table, parse_query
from .sexpr import SExprError

DEFAULT_SEED = 42


class UsageError(Exception):
    """Bad input detected after argument parsing; reported with exit status 2."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _graph(paths: Sequence[str] | str) -> Graph:
    if isinstance(paths, str):
        paths = [paths]
    out = Graph()
    for p in paths:
        out = union(out, parse_triples(_read(p)))
    return out


def _ruleset(spec: str) -> rules.RuleSet:
    """Comma-separated builtin names and/or rule files, merged in order."""
    merged: list = []
    for item in (s.strip() for s in spec.split(",")):
        if not item:
            continue
        if item in ("rdfs", "owl-subset"):
            rs = rules.builtin_ruleset(item)
        elif Path(item).exists():
            rs = rules.parse_rules(_read(item), name=item)
        else:
            raise UsageError(f"--rules: {item!r} is neither a builtin ruleset (rdfs, owl-subset) nor a file")
        merged += [r for r in rs.rules if r not in merged]
    return rules.RuleSet(merged, spec)


def _labels(text: str | None) -> frozenset | None:
    if text is None:
        return None
    return frozenset(s.strip() for s in text.split(",") if s.strip())


def _num(v: float) -> str:
    return f"{v + 0.0:.12g}"  # adding 0.0 turns -0.0 into 0.0


def _emit(text: str) -> None:
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Verbs

def cmd_query(a) -> int:
    g = _graph(a.graph)
    expr = parse_query(_read(a.query))
    if a.enumerate_paths is not None:
        if not isinstance(expr, PathAtom):
            raise UsageError("--enumerate-paths needs a query that is a single (path x p y) form")
        paths = enumerate_paths(g, expr.x, expr.r, expr.y, a.enumerate_paths)
        _emit("".join("\t".join(p) + "\n" for p in paths))
        return 0
    rows = eval_algebra(g, expr, semantics=a.semantics, mode=a.mode)
    _emit(format_table(rows, expr))
    return 0


def cmd_validate(a) -> int:
    g = _graph(a.graph)
    sch = shapes.parse_schema(_read(a.schema))
    target = shapes.parse_targets(_read(a.target)) if a.target else []
    report = shapes.validate(g, sch, target)
    _emit("node\tshape\n" + "".join(f"{v}\t{s}\n" for v, s in report.violations))
    print("valid" if report.valid else f"invalid: {len(report.violations)} violation(s)", file=sys.stderr)
    return 0 if report.valid else 1


def cmd_materialize(a) -> int:
    g = _graph(a.graph)
    _emit(write_triples(rules.least_model(g, _ruleset(a.rules))))
    return 0


def cmd_entails(a) -> int:
    ok = rules.entails_ground(_graph(a.g1), _graph(a.g2), _ruleset(a.rules))
    _emit("entailed\n" + ("true\n" if ok else "false\n"))
    return 0 if ok else 1


def cmd_consistency(a) -> int:
    found = rules.check_consistency(_graph(a.graph), _ruleset(a.rules))
    lines = ["feature\twitnesses"]
    lines += [f"{v.feature}\t" + " ; ".join(" ".join(e) for e in v.witnesses) for v in found]
    _emit("\n".join(lines) + "\n")
    print("consistent" if not found else f"inconsistent: {len(found)} clash(es)", file=sys.stderr)
    return 1 if found else 0


def cmd_quotient(a) -> int:
    g = _graph(a.graph)
    parts = schema.parse_partition(_read(a.partition))
    q = schema.quotient(g, parts)
    _emit(write_triples(q))
    if a.check:
        rel = schema.membership(parts)
        sim = schema.check_simulation(g, q, rel)
        bis = schema.check_bisimulation(g, q, rel)
        print(f"simulation={str(sim).lower()} bisimulation={str(bis).lower()}", file=sys.stderr)
    return 0


def cmd_bisim(a) -> int:
    g = _graph(a.graph)
    init = schema.parse_partition(_read(a.partition)) if a.partition else [set(g.nodes)]
    q, parts = schema.bisim_min_quotient(g, init)
    if a.emit == "partition":
        rows = sorted((v, schema.block_name(b)) for b in parts for v in b)
        _emit("".join(f"{v}\t{b}\n" for v, b in rows))
    else:
        _emit(write_triples(q))
    return 0


def cmd_pagerank(a) -> int:
    scores = analytics.pagerank(_graph(a.graph), d=a.d, iters=a.iters,
                                labels=_labels(a.labels), epsilon=a.epsilon)
    _emit(analytics.format_scores(scores))
    return 0


_DOMAINS: dict[str, Callable[[], annotations.AnnotationDomain]] = {
    "temporal": annotations.temporal_domain,
    "fuzzy": annotations.fuzzy_domain,
}


def cmd_annotate_query(a) -> int:
    d = _DOMAINS[a.domain]()
    g = annotations.parse_annotated(_read(a.graph), d)
    expr = parse_query(_read(a.query))
    names = None
    if isinstance(expr, Project):
        names = [v.name for v in expr.vars]
        expr = expr.child
    if not isinstance(expr, BGP):
        raise UsageError("annotated queries must be a bgp, optionally under project")
    rows = annotations.eval_annotated(g, expr.triples, names, d, drop_bottom=not a.keep_bottom)
    names = names if names is not None else expr.output_order()
    lines = ["\t".join(names + ["annotation"])]
    lines += ["\t".join([m.get(n) or "" for n in names] + [d.format(val)]) for m, val in rows]
    _emit("\n".join(lines) + "\n")
    return 0


def cmd_embed_train(a) -> int:
    g = _graph(a.graph)
    cfg = embeddings.TrainConfig(epochs=a.epochs, learning_rate=a.lr, margin=a.margin,
                                 negatives=a.negatives, seed=a.seed, dim=a.dim)
    m = embeddings.train(g, a.model, cfg)
    text = embeddings.write_model(m)
    if a.out:
        Path(a.out).write_text(text, encoding="utf-8")
        print(f"wrote {embeddings.canonical_kind(a.model)} model to {a.out}", file=sys.stderr)
    else:
        _emit(text)
    return 0


def cmd_embed_score(a) -> int:
    m = embeddings.read_model(_read(a.model_file))
    g = _graph(a.graph)
    lines = ["s\tp\to\tscore"]
    lines += [f"{s}\t{p}\t{o}\t{_num(embeddings.score(m, (s, p, o)))}" for s, p, o in sorted(g.edges)]
    _emit("\n".join(lines) + "\n")
    return 0


def cmd_embed_predict(a) -> int:
    m = embeddings.read_model(_read(a.model_file))
    ranked = embeddings.predict(m, a.node, a.label, a.k)
    _emit("node\tscore\n" + "".join(f"{n}\t{_num(v)}\n" for n, v in ranked))
    return 0


def cmd_mine(a) -> int:
    cfg = mining.MineConfig(min_support=a.min_support, min_confidence=a.min_conf,
                            max_length=a.max_len, head_labels=_labels(a.head_labels))
    _emit(mining.format_mined(mining.mine(_graph(a.graph), cfg)))
    return 0


def cmd_convert(a) -> int:
    text = _read(a.input)
    if a.source == "pg":
        g = pg_to_del(parse_pg(text))
    elif a.source == "dataset":
        g = parse_dataset(text).flatten()
    else:
        g = parse_triples(text)
    _emit(write_pg(del_to_pg(g)) if a.to == "pg" else write_triples(g))
    return 0


# ---------------------------------------------------------------------------
# Argument grammar

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="random seed (default 42)")
    common.add_argument("--threads", type=_positive_int, default=1,
                        help="upper bound on worker threads; results never depend on it")

    parser = argparse.ArgumentParser(prog="kg", description="Knowledge-graph engine.")
    sub = parser.add_subparsers(dest="verb", metavar="VERB", required=True)

    def verb(name: str, fn, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    p = verb("query", cmd_query, "evaluate an s-expression query")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--query", required=True)
    p.add_argument("--semantics", choices=("set", "bag"), default="set")
    p.add_argument("--mode", choices=MODES, default="homomorphism")
    p.add_argument("--enumerate-paths", type=int, metavar="K",
                   help="for a single path query, list simple paths of at most K edges instead")

    p = verb("validate", cmd_validate, "validate target nodes against a shapes schema")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--schema", required=True)
    p.add_argument("--target")

    p = verb("materialize", cmd_materialize, "compute the least model under a rule set")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--rules", required=True, help="builtin names and/or rule files, comma-separated")

    p = verb("entails", cmd_entails, "decide whether g1 with the rules entails ground graph g2")
    p.add_argument("--g1", required=True, action="append")
    p.add_argument("--g2", required=True)
    p.add_argument("--rules", required=True)

    p = verb("consistency", cmd_consistency, "report clashes in the least model")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--rules", default="owl-subset")

    p = verb("quotient", cmd_quotient, "quotient a graph by a node partition")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--partition", required=True)
    p.add_argument("--check", action="store_true", help="report simulation/bisimulation on stderr")

    p = verb("bisim", cmd_bisim, "coarsest bisimilar refinement of a partition")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--partition")
    p.add_argument("--emit", choices=("quotient", "partition"), default="quotient")

    p = verb("pagerank", cmd_pagerank, "PageRank over the label-free projection")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--d", type=float, default=0.85)
    p.add_argument("--iters", type=_positive_int, default=20)
    p.add_argument("--labels")
    p.add_argument("--epsilon", type=float)

    p = verb("annotate-query", cmd_annotate_query, "evaluate a pattern over an annotated graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--domain", choices=sorted(_DOMAINS), default="temporal")
    p.add_argument("--keep-bottom", action="store_true", help="keep rows whose annotation is the bottom value")

    p = verb("embed-train", cmd_embed_train, "train an embedding model")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--model", required=True, help="transe, transh, distmult, rescal, complex")
    p.add_argument("--dim", type=_positive_int, default=50)
    p.add_argument("--epochs", type=_positive_int, default=200)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--negatives", type=_positive_int, default=2)
    p.add_argument("--out")

    p = verb("embed-score", cmd_embed_score, "score every edge of a graph under a saved model")
    p.add_argument("--model-file", required=True)
    p.add_argument("--graph", required=True, action="append")

    p = verb("embed-predict", cmd_embed_predict, "rank candidate objects for (node, label, ?)")
    p.add_argument("--model-file", required=True)
    p.add_argument("--node", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--k", type=int, default=10)

    p = verb("mine", cmd_mine, "mine closed Horn rules")
    p.add_argument("--graph", required=True, action="append")
    p.add_argument("--min-support", type=int, default=2)
    p.add_argument("--min-conf", type=float, default=0.5)
    p.add_argument("--max-len", type=_positive_int, default=2)
    p.add_argument("--head-labels")

    p = verb("convert", cmd_convert, "convert property graphs or datasets to triples")
    p.add_argument("--input", required=True)
    p.add_argument("--from", dest="source", choices=("triples", "pg", "dataset"), default="pg")
    p.add_argument("--to", choices=("triples", "pg"), default="triples")
    return parser


_INPUT_ERRORS = (UsageError, ParseError, SExprError, QueryError, shapes.SchemaError,
                 rules.RuleError, schema.PartitionError, embeddings.EmbeddingError,
                 analytics.GPFError, ValueError)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except _INPUT_ERRORS as exc:
        print(f"kg {args.verb}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
