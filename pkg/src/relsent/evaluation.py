"""Measurement: rank correlation against scored sentence pairs, link
prediction (MRR, Hits@k) with realistic tie handling, and per-relation
score-selection reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyInputError,
    ParseError,
    ProtocolError,
    ShapeError,
)
from .model import Model
from .relation_model import ScoreWeights

HITS_KS = (1, 3, 10)


@dataclass(frozen=True)
class ScoredPair:
    sent1: str
    sent2: str
    gold_score: float


def read_scored_pairs(path) -> list[ScoredPair]:
    """Read tab-separated (sent1, sent2, gold_score) pairs, one per line."""
    pairs: list[ScoredPair] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise ParseError(f"expected 3 tab-separated columns, got {len(cols)}",
                                 lineno)
            try:
                score = float(cols[2])
            except ValueError as exc:
                raise ParseError(f"gold score {cols[2]!r} is not a number",
                                 lineno) from exc
            if not math.isfinite(score):
                raise ParseError("gold score must be finite", lineno)
            pairs.append(ScoredPair(cols[0], cols[1], score))
    return pairs


@dataclass
class EvalReport:
    """Metric container; hits_at is monotone in k by construction."""

    spearman: float | None = None
    mrr: float | None = None
    hits_at: dict[int, float] = field(default_factory=dict)
    per_relation: dict[str, "EvalReport"] = field(default_factory=dict)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks starting at 1; ties receive their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    srt = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and srt[j + 1] == srt[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(pred, gold) -> float:
    """Pearson correlation of average-tie fractional ranks."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gold, dtype=np.float64)
    if p.shape != g.shape or p.ndim != 1:
        raise ShapeError(f"length mismatch: {p.shape} vs {g.shape}")
    if p.size < 2:
        raise DegenerateInputError("need at least two pairs")
    if np.all(p == p[0]) or np.all(g == g[0]):
        raise DegenerateInputError(
            "constant sequence has no rank ordering; refusing to report 0")
    rp = _average_ranks(p)
    rg = _average_ranks(g)
    rp -= rp.mean()
    rg -= rg.mean()
    denom = math.sqrt(float(rp @ rp) * float(rg @ rg))
    return float(rp @ rg) / denom


def score_pairs(pairs, model: Model, scoring: ScoreWeights) -> EvalReport:
    """Predict weighted relational scores and correlate with gold."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInputError("no scored pairs to evaluate")
    preds = [model.weighted_score(p.sent1, p.sent2, scoring) for p in pairs]
    golds = [p.gold_score for p in pairs]
    return EvalReport(spearman=spearman(preds, golds))


def rank_of_target(head: str, relation: int | str, candidates,
                   target_index: int, model: Model) -> float:
    """Realistic (average-tie) rank of the target among candidates.

    rank = 1 + #(strictly above) + 0.5 * #(non-target ties). Fractional;
    round half-up before comparing against a Hits@k cutoff.
    """
    candidates = list(candidates)
    if not candidates:
        raise EmptyInputError("empty candidate pool")
    if not 0 <= target_index < len(candidates):
        raise ProtocolError(f"target index {target_index} outside pool")
    scores = [model.score(head, cand, relation) for cand in candidates]
    target = scores[target_index]
    above = sum(1 for s in scores if s > target)
    ties = sum(1 for i, s in enumerate(scores)
               if s == target and i != target_index)
    return 1.0 + above + 0.5 * ties


def _hits_rank(fractional_rank: float) -> int:
    """Integer rank for Hits@k: round half-up."""
    return int(math.floor(fractional_rank + 0.5))


def _rank_report(ranks: list[float]) -> EvalReport:
    n = len(ranks)
    mrr = sum(1.0 / r for r in ranks) / n
    hits = {k: sum(1 for r in ranks if _hits_rank(r) <= k) / n
            for k in HITS_KS}
    return EvalReport(mrr=mrr, hits_at=hits)


def link_prediction_eval(test_triples, candidate_pool_builder, model: Model,
                         relation_override: int | str | None = None) -> EvalReport:
    """Rank each triple's gold tail among its candidate pool.

    candidate_pool_builder(triple) -> (candidates, target_index). MRR
    uses fractional ranks; Hits@k uses half-up integer ranks. Reported
    overall and per query relation. relation_override scores every query
    with one fixed relation instead of the triple's own.
    """
    test_triples = list(test_triples)
    if not test_triples:
        raise EmptyInputError("no test triples")
    ranks_all: list[float] = []
    ranks_by_rel: dict[str, list[float]] = {}
    for triple in test_triples:
        candidates, target_index = candidate_pool_builder(triple)
        candidates = list(candidates)
        if not 0 <= target_index < len(candidates) or \
                candidates[target_index] != triple.tail:
            raise ProtocolError(
                f"gold tail missing from candidate pool for head "
                f"{triple.head!r} ({triple.relation})")
        scoring_rel = triple.relation if relation_override is None else relation_override
        r = rank_of_target(triple.head, scoring_rel, candidates,
                           target_index, model)
        ranks_all.append(r)
        ranks_by_rel.setdefault(triple.relation, []).append(r)
    report = _rank_report(ranks_all)
    report.per_relation = {
        rel: _rank_report(rs) for rel, rs in sorted(ranks_by_rel.items())}
    return report


def conflicting_pool_builder(triples):
    """Pool builder: all tails of the queried relation plus the other
    relations' tails for the same head, so a relation-blind scorer must
    choose between the head's own conflicting tails."""
    triples = list(triples)
    tails_by_relation: dict[str, list[str]] = {}
    tails_seen: dict[str, set[str]] = {}
    by_head: dict[str, list[tuple[str, str]]] = {}
    for t in triples:
        seen = tails_seen.setdefault(t.relation, set())
        if t.tail not in seen:
            seen.add(t.tail)
            tails_by_relation.setdefault(t.relation, []).append(t.tail)
        by_head.setdefault(t.head, []).append((t.relation, t.tail))

    def build(triple):
        candidates = list(tails_by_relation[triple.relation])
        in_pool = tails_seen[triple.relation]
        for relation, tail in by_head.get(triple.head, ()):
            if relation != triple.relation and tail not in in_pool:
                candidates.append(tail)
        return candidates, candidates.index(triple.tail)

    return build


@dataclass(frozen=True)
class PairsTask:
    """Scored-pair task; metric is Spearman correlation."""

    pairs: tuple


@dataclass(frozen=True)
class LinkPredTask:
    """Link-prediction task; metric is MRR."""

    triples: tuple
    pool_builder: object


@dataclass
class SelectionReport:
    """Metric of every task under every single-relation score."""

    matrix: dict[str, dict[str, float]]
    best_relation: dict[str, str]


def relation_selection_report(tasks: dict, model: Model) -> SelectionReport:
    """Evaluate each task under each relation's score; report the full
    matrix and the argmax relation per task (ties keep the lowest id)."""
    relation_names = model.relations.names
    matrix: dict[str, dict[str, float]] = {}
    best: dict[str, str] = {}
    for task_name, task in tasks.items():
        row: dict[str, float] = {}
        for rel in relation_names:
            if isinstance(task, PairsTask):
                row[rel] = score_pairs(
                    task.pairs, model, ScoreWeights({rel: 1.0})).spearman
            elif isinstance(task, LinkPredTask):
                row[rel] = link_prediction_eval(
                    task.triples, task.pool_builder, model,
                    relation_override=rel).mrr
            else:
                raise TypeError(f"unsupported task type {type(task).__name__}")
        matrix[task_name] = row
        best[task_name] = max(relation_names, key=lambda r: row[r])
    return SelectionReport(matrix, best)
