"""Dataset handling, hard-negative sampling, the epoch loop with
dev-set checkpoint selection, and the synthetic-world generator used
for desk-scale verification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .contrastive import TokenTriple, grad_cache_step
from .encoder import TokenizedSentence, tokenize
from .errors import (
    ConfigError,
    NoNegativeAvailableError,
    NumericError,
    ParseError,
    RelsentError,
    SchemaError,
)
from .model import Model
from .numerics import AdamState, SeededRng, adam_step, seeded_shuffle


@dataclass(frozen=True)
class SentenceTriple:
    """One supervised sample: head sentence, relation name, tail sentence,
    and an optional pre-supplied hard-negative tail."""

    head: str
    relation: str
    tail: str
    hard_neg: str | None = None


@dataclass
class TrainConfig:
    """Training hyperparameters.

    encoder_lr defaults to 5e-4: the from-scratch reference encoder
    needs a larger rate than transformer fine-tuning would use. A zero
    learning rate freezes the corresponding parameter block.
    """

    tau: float = 0.05
    batch_size: int = 64
    encoder_lr: float = 5e-4
    relation_lr: float = 1e-2
    epochs: int = 3
    eval_every_steps: int = 125
    per_relation_cap: int = 150_000
    seed: int = 0
    sub_batch_size: int = 16
    objective: str = "hard_neg"  # hard_neg | in_batch | merged
    # encoder construction knobs, echoed into saved models
    d_in: int = 32
    d: int = 32
    min_count: int = 1
    max_len: int = 32

    def validate(self) -> None:
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if self.encoder_lr < 0 or self.relation_lr < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.epochs < 1 or self.eval_every_steps < 1:
            raise ConfigError("epochs and eval_every_steps must be >= 1")
        if self.per_relation_cap < 1:
            raise ConfigError("per_relation_cap must be >= 1")
        if self.sub_batch_size < 1:
            raise ConfigError("sub_batch_size must be >= 1")
        if self.objective not in ("hard_neg", "in_batch", "merged"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.d_in < 1 or self.d < 1 or self.max_len < 1 or self.min_count < 1:
            raise ConfigError("encoder dimensions must be positive")

    def to_dict(self) -> dict:
        return {
            "tau": self.tau, "batch_size": self.batch_size,
            "encoder_lr": self.encoder_lr, "relation_lr": self.relation_lr,
            "epochs": self.epochs, "eval_every_steps": self.eval_every_steps,
            "per_relation_cap": self.per_relation_cap, "seed": self.seed,
            "sub_batch_size": self.sub_batch_size, "objective": self.objective,
            "d_in": self.d_in, "d": self.d, "min_count": self.min_count,
            "max_len": self.max_len,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        cfg = cls()
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ConfigError(f"unknown config key {key!r}")
            current = getattr(cfg, key)
            if isinstance(current, bool):
                value = bool(value)
            elif isinstance(current, int):
                value = int(value)
            elif isinstance(current, float):
                value = float(value)
            else:
                value = str(value)
            setattr(cfg, key, value)
        cfg.validate()
        return cfg


def ingest_triples(path, schema) -> list[SentenceTriple]:
    """Parse a JSONL triple file against a relation-name schema.

    Each line is an object with fields head/relation/tail and optional
    hard_neg; malformed lines and unknown relations are rejected with
    their line number.
    """
    schema = set(schema)
    triples: list[SentenceTriple] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno)
            try:
                head = str(obj["head"]).strip()
                relation = str(obj["relation"])
                tail = str(obj["tail"]).strip()
            except KeyError as exc:
                raise ParseError(f"missing field {exc.args[0]!r}", lineno) from exc
            if not head or not tail:
                raise ParseError("head and tail must be non-empty", lineno)
            if relation not in schema:
                raise SchemaError(
                    f"line {lineno}: unknown relation {relation!r} "
                    f"(schema: {sorted(schema)})")
            hard_neg = obj.get("hard_neg")
            if hard_neg is not None:
                hard_neg = str(hard_neg)
            triples.append(SentenceTriple(head, relation, tail, hard_neg))
    return triples


def cap_per_relation(triples, cap: int, rng: SeededRng) -> list[SentenceTriple]:
    """Down-sample any relation holding more than ``cap`` triples to
    exactly ``cap``, uniformly without replacement; original order is
    preserved among the kept triples."""
    if cap < 1:
        raise ConfigError("cap must be >= 1")
    triples = list(triples)
    by_relation: dict[str, list[int]] = {}
    for i, t in enumerate(triples):
        by_relation.setdefault(t.relation, []).append(i)
    keep = set(range(len(triples)))
    for relation in sorted(by_relation):
        idxs = by_relation[relation]
        if len(idxs) > cap:
            chosen = rng.sample_indices(len(idxs), cap)
            keep -= set(idxs) - {idxs[j] for j in chosen}
    return [t for i, t in enumerate(triples) if i in keep]


def sample_hard_negative(triple: SentenceTriple, relation_pool,
                         rng: SeededRng) -> SentenceTriple:
    """Fill the hard negative: keep a pre-supplied one, else draw a
    uniform in-relation tail different from the gold tail."""
    if triple.hard_neg is not None:
        return triple
    candidates = [p.tail for p in relation_pool if p.tail != triple.tail]
    if not candidates:
        raise NoNegativeAvailableError(
            f"no in-relation negative differs from the gold tail for "
            f"relation {triple.relation!r}")
    return replace(triple, hard_neg=candidates[rng.randrange(len(candidates))])


@dataclass
class CheckpointSelector:
    """Keeps the snapshot with the best dev metric; ties keep the
    earliest step."""

    metric_name: str = "dev_metric"
    best_metric: float = -math.inf
    best_params: Model | None = None
    best_step: int = -1

    def update(self, metric: float, model: Model, step: int) -> bool:
        if metric > self.best_metric:
            self.best_metric = metric
            self.best_params = model.copy()
            self.best_step = step
            return True
        return False


@dataclass
class TrainResult:
    model: Model
    log: list[dict]
    best_metric: float | None = None
    best_step: int | None = None


def _batch_plan(n_triples: int, batch_size: int) -> list[tuple[int, int]]:
    """(start, end) slices per batch; a trailing batch of one is dropped."""
    plan = []
    for start in range(0, n_triples, batch_size):
        end = min(start + batch_size, n_triples)
        if end - start >= 2:
            plan.append((start, end))
    return plan


def train(dataset, model: Model, cfg: TrainConfig,
          dev_eval=None) -> TrainResult:
    """Run the contrastive training loop.

    Per epoch: seeded shuffle, batch, fill hard negatives (fresh draws
    each epoch), compute gradients through the gradient cache, and apply
    Adam with separate learning rates for encoder and relation rows.
    dev_eval(model) -> float runs every eval_every_steps and once at the
    final step; the best-scoring snapshot is returned. Without dev_eval
    the final model is returned.
    """
    cfg.validate()
    rng = SeededRng(cfg.seed)
    triples = cap_per_relation(dataset, cfg.per_relation_cap, rng)
    for t in triples:
        if t.relation not in model.relations.name_to_id:
            raise SchemaError(f"triple uses unknown relation {t.relation!r}")

    pools: dict[str, list[SentenceTriple]] = {}
    for t in triples:
        pools.setdefault(t.relation, []).append(t)

    plan = _batch_plan(len(triples), cfg.batch_size)
    if not plan:
        raise ConfigError(
            f"dataset holds {len(triples)} triples after capping; "
            "at least one batch of two is required")
    total_steps = cfg.epochs * len(plan)

    tok_cache: dict[str, TokenizedSentence] = {}

    def tok(sentence: str) -> TokenizedSentence:
        hit = tok_cache.get(sentence)
        if hit is None:
            hit = tokenize(sentence, model.vocab, cfg.max_len)
            tok_cache[sentence] = hit
        return hit

    enc = model.encoder
    opt_states = {
        "embedding_table": AdamState.for_params(enc.embedding_table),
        "projection_weight": AdamState.for_params(enc.projection_weight),
        "projection_bias": AdamState.for_params(enc.projection_bias),
        "relations": AdamState.for_params(model.relations.embeddings),
    }

    selector = CheckpointSelector()
    log: list[dict] = []
    step = 0
    for epoch in range(cfg.epochs):
        order = seeded_shuffle(range(len(triples)), rng)
        for start, end in plan:
            batch = []
            for idx in order[start:end]:
                t = triples[idx]
                if cfg.objective == "hard_neg":
                    t = sample_hard_negative(t, pools[t.relation], rng)
                batch.append(t)
            tok_batch = [
                TokenTriple(
                    tok(t.head), tok(t.tail),
                    model.relations.id_of(t.relation),
                    tok(t.hard_neg) if cfg.objective == "hard_neg" else None)
                for t in batch
            ]
            result = grad_cache_step(
                tok_batch, cfg.sub_batch_size, enc, model.relations,
                cfg.tau, cfg.objective)
            if not math.isfinite(result.loss):
                raise NumericError(
                    f"non-finite loss {result.loss} at step {step + 1} "
                    f"(epoch {epoch + 1})")

            if cfg.encoder_lr > 0:
                g = result.encoder_grads
                adam_step(enc.embedding_table, g.embedding_table,
                          opt_states["embedding_table"], cfg.encoder_lr)
                adam_step(enc.projection_weight, g.projection_weight,
                          opt_states["projection_weight"], cfg.encoder_lr)
                adam_step(enc.projection_bias, g.projection_bias,
                          opt_states["projection_bias"], cfg.encoder_lr)
            if cfg.relation_lr > 0:
                adam_step(model.relations.embeddings, result.relation_grads,
                          opt_states["relations"], cfg.relation_lr)
            model.invalidate_cache()
            step += 1

            record = {"step": step, "epoch": epoch + 1,
                      "loss": float(result.loss)}
            if dev_eval is not None and (
                    step % cfg.eval_every_steps == 0 or step == total_steps):
                try:
                    metric = float(dev_eval(model))
                except RelsentError:
                    raise
                except Exception as exc:
                    raise RelsentError(
                        f"dev evaluation failed at step {step}: {exc}") from exc
                selector.update(metric, model, step)
                record["dev_metric"] = metric
            log.append(record)

    if dev_eval is not None and selector.best_params is not None:
        return TrainResult(selector.best_params, log,
                           selector.best_metric, selector.best_step)
    return TrainResult(model, log)


@dataclass
class SyntheticConfig:
    """Knobs for the synthetic marker-replacement world."""

    n_filler_tokens: int = 50
    n_heads: int = 400
    n_train_heads: int = 300
    min_len: int = 3
    max_len: int = 6
    marker: str = "A"
    relation_markers: dict = field(
        default_factory=lambda: {"rel_b": "B", "rel_c": "C"})

    def validate(self) -> None:
        if self.n_filler_tokens < 1 or self.n_heads < 1:
            raise ConfigError("generator sizes must be positive")
        if not 1 <= self.min_len <= self.max_len:
            raise ConfigError("sentence length range invalid")
        if not 0 < self.n_train_heads < self.n_heads:
            raise ConfigError("train split must leave test heads")


@dataclass
class SyntheticWorld:
    train: list[SentenceTriple]
    test: list[SentenceTriple]
    eval_pools: dict[str, list[str]]


def generate_synthetic_world(cfg: SyntheticConfig | None = None,
                             rng: SeededRng | None = None) -> SyntheticWorld:
    """Build the marker-replacement world.

    Every head sentence holds exactly one marker A among filler tokens;
    each relation's tail replaces A with that relation's marker. Both
    relations are emitted for every head, train and test head sets are
    disjoint, and the whole world is deterministic under the seed.
    """
    cfg = cfg or SyntheticConfig()
    cfg.validate()
    rng = rng or SeededRng(7)
    fillers = [f"f{i:02d}" for i in range(cfg.n_filler_tokens)]

    heads: list[str] = []
    seen: set[str] = set()
    while len(heads) < cfg.n_heads:
        length = cfg.min_len + rng.randrange(cfg.max_len - cfg.min_len + 1)
        marker_pos = rng.randrange(length)
        tokens = [fillers[rng.randrange(len(fillers))] for _ in range(length)]
        tokens[marker_pos] = cfg.marker
        head = " ".join(tokens)
        if head not in seen:
            seen.add(head)
            heads.append(head)

    def tails_for(head: str) -> list[SentenceTriple]:
        out = []
        for relation, marker in cfg.relation_markers.items():
            tail = " ".join(
                marker if tok == cfg.marker else tok for tok in head.split())
            out.append(SentenceTriple(head, relation, tail))
        return out

    train: list[SentenceTriple] = []
    test: list[SentenceTriple] = []
    for i, head in enumerate(heads):
        (train if i < cfg.n_train_heads else test).extend(tails_for(head))

    pools: dict[str, list[str]] = {r: [] for r in cfg.relation_markers}
    for t in test:
        pools[t.relation].append(t.tail)
    return SyntheticWorld(train, test, pools)
