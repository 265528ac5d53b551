"""Command-line surface: train, score, evaluate, inspect, embed, synth.

All subcommands are non-interactive, print reports with 6-decimal
formatting, and exit nonzero with a one-line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .encoder import build_vocab, init_encoder_params
from .errors import ConfigError, ParseError, RelsentError
from .evaluation import (
    conflicting_pool_builder,
    link_prediction_eval,
    read_scored_pairs,
    score_pairs,
)
from .model import Model
from .numerics import SeededRng
from .persistence import ModelArtifact, load_model, save_model
from .relation_model import (
    ScoreWeights,
    init_relation_table,
    relation_similarity_matrix,
)
from .training import (
    SyntheticConfig,
    TrainConfig,
    generate_synthetic_world,
    ingest_triples,
    train,
)


def _read_config_file(path) -> dict:
    """Flat key=value config file; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", lineno)
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _parse_weights(spec: str) -> ScoreWeights:
    weights: dict[str, float] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"weight {part!r} must look like name=value")
        name, _, value = part.partition("=")
        try:
            weights[name.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"weight value {value!r} is not a number") from exc
    if not weights:
        raise ConfigError("no relational weights given")
    return ScoreWeights(weights)


def _cmd_train(args) -> int:
    overrides = _read_config_file(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = TrainConfig.from_dict(overrides)

    relation_names = [r.strip() for r in args.relations.split(",") if r.strip()]
    if not relation_names:
        raise ConfigError("at least one relation name is required")
    triples = ingest_triples(args.triples, relation_names)

    corpus = []
    for t in triples:
        corpus.append(t.head)
        corpus.append(t.tail)
        if t.hard_neg:
            corpus.append(t.hard_neg)
    vocab = build_vocab(corpus, cfg.min_count)

    rng = SeededRng(cfg.seed)
    encoder = init_encoder_params(len(vocab), cfg.d_in, cfg.d, rng)
    relations = init_relation_table(relation_names, cfg.d, rng)
    if cfg.objective == "merged":
        relations.embeddings[:] = 0.0
    model = Model(vocab, encoder, relations, max_len=cfg.max_len)

    dev_eval = None
    if args.dev_pairs:
        dev_pairs = read_scored_pairs(args.dev_pairs)
        dev_weights = ScoreWeights({name: 1.0 for name in relation_names})
        dev_eval = lambda m: score_pairs(dev_pairs, m, dev_weights).spearman
    elif args.dev_linkpred:
        dev_triples = ingest_triples(args.dev_linkpred, relation_names)
        builder = conflicting_pool_builder(dev_triples)
        dev_eval = lambda m: link_prediction_eval(dev_triples, builder, m).mrr

    result = train(triples, model, cfg, dev_eval)
    for record in result.log:
        print(json.dumps(record, sort_keys=True))
    if result.best_metric is not None:
        print(json.dumps({"best_step": result.best_step,
                          "best_metric": result.best_metric}, sort_keys=True))
    save_model(ModelArtifact(result.model, cfg.to_dict()), args.out)
    return 0


def _cmd_score(args) -> int:
    model = load_model(args.model).model
    if (args.relation is None) == (args.weights is None):
        raise ConfigError("give exactly one of --relation or --weights")
    if args.relation is not None:
        value = model.score(args.s1, args.s2, args.relation)
    else:
        value = model.weighted_score(args.s1, args.s2, _parse_weights(args.weights))
    print(f"{value:.6f}")
    return 0


def _cmd_eval_pairs(args) -> int:
    model = load_model(args.model).model
    pairs = read_scored_pairs(args.pairs)
    report = score_pairs(pairs, model, _parse_weights(args.weights))
    print(f"spearman\t{report.spearman:.6f}")
    return 0


def _format_linkpred(report) -> str:
    lines = ["relation\tmrr\thits@1\thits@3\thits@10"]

    def row(name, rep):
        hits = "\t".join(f"{rep.hits_at[k]:.6f}" for k in (1, 3, 10))
        return f"{name}\t{rep.mrr:.6f}\t{hits}"

    lines.append(row("overall", report))
    for rel in sorted(report.per_relation):
        lines.append(row(rel, report.per_relation[rel]))
    return "\n".join(lines)


def _cmd_eval_linkpred(args) -> int:
    model = load_model(args.model).model
    triples = ingest_triples(args.triples, model.relations.names)
    builder = conflicting_pool_builder(triples)
    report = link_prediction_eval(triples, builder, model)
    print(_format_linkpred(report))
    return 0


def _cmd_rel_sim(args) -> int:
    model = load_model(args.model).model
    names = model.relations.names
    sim = relation_similarity_matrix(model.relations)
    print("relation\t" + "\t".join(names))
    for i, name in enumerate(names):
        print(name + "\t" + "\t".join(f"{sim[i, j]:.6f}" for j in range(len(names))))
    return 0


def _cmd_embed(args) -> int:
    model = load_model(args.model).model
    lines_out = []
    with open(args.infile, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            sentence = raw.rstrip("\n")
            if not sentence.strip():
                raise ParseError("blank sentence", lineno)
            emb = model.embed(sentence)
            lines_out.append(" ".join(f"{x:.6f}" for x in emb))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines_out) + "\n")
    return 0


def _cmd_synth(args) -> int:
    world = generate_synthetic_world(SyntheticConfig(), SeededRng(args.seed))
    os.makedirs(args.out_dir, exist_ok=True)

    def dump(path, triples):
        with open(path, "w", encoding="utf-8") as fh:
            for t in triples:
                rec = {"head": t.head, "relation": t.relation, "tail": t.tail}
                if t.hard_neg is not None:
                    rec["hard_neg"] = t.hard_neg
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    train_path = os.path.join(args.out_dir, "train.jsonl")
    test_path = os.path.join(args.out_dir, "test.jsonl")
    pools_path = os.path.join(args.out_dir, "pools.json")
    dump(train_path, world.train)
    dump(test_path, world.test)
    with open(pools_path, "w", encoding="utf-8") as fh:
        json.dump(world.eval_pools, fh, sort_keys=True, indent=None)
        fh.write("\n")
    for path in (train_path, test_path, pools_path):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relsent",
        description="Relational sentence embeddings: train, score, evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a triple file")
    p.add_argument("--triples", required=True)
    p.add_argument("--relations", required=True,
                   help="comma-separated relation names")
    p.add_argument("--dev-pairs", default=None)
    p.add_argument("--dev-linkpred", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("score", help="score one sentence pair")
    p.add_argument("--model", required=True)
    p.add_argument("--relation", default=None)
    p.add_argument("--weights", default=None)
    p.add_argument("--s1", required=True)
    p.add_argument("--s2", required=True)
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("eval-pairs", help="Spearman against a scored-pair TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--weights", required=True)
    p.set_defaults(fn=_cmd_eval_pairs)

    p = sub.add_parser("eval-linkpred", help="MRR and Hits@k on a triple file")
    p.add_argument("--model", required=True)
    p.add_argument("--triples", required=True)
    p.set_defaults(fn=_cmd_eval_linkpred)

    p = sub.add_parser("rel-sim", help="relation-similarity matrix as TSV")
    p.add_argument("--model", required=True)
    p.set_defaults(fn=_cmd_rel_sim)

    p = sub.add_parser("embed", help="embed sentences, one vector per line")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_embed)

    p = sub.add_parser("synth", help="write the synthetic benchmark world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (RelsentError, KeyError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
