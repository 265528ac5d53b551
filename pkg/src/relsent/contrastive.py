"""Temperature-scaled relational contrastive objectives and their exact
gradients.

Three variants share one softmax core:

* in_batch   - positive is cosine(head + relation, own tail); the other
               in-batch tails are negatives.
* hard_neg   - denominator additionally sums every example's in-relation
               hard-negative tail, doubling the candidate count.
* merged     - relation-agnostic baseline: relation rows treated as zero,
               plain contrastive learning over the pooled pairs.

Gradients are derived by hand through the softmax, the cosine, and the
translation sum; the gradient-cache path recomputes encoder activations
sub-batch by sub-batch so the contrastive batch size is decoupled from
the number of activation caches held at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import (
    EncoderGrads,
    EncoderParams,
    TokenizedSentence,
    encode_backward,
    encode_forward,
)
from .errors import (
    BatchSizeError,
    ConfigError,
    NumericError,
    SchemaError,
)
from .numerics import log_sum_exp
from .relation_model import RelationTable

VARIANTS = ("in_batch", "hard_neg", "merged")


@dataclass
class EmbeddedBatch:
    """One mini-batch in embedding space.

    heads, tails: (N, d); relations: (N,) int ids into relation_rows'
    source table; relation_rows: (N, d) resolved per example;
    hard_neg_tails: optional (N, d); tau: softmax temperature > 0.
    """

    heads: np.ndarray
    tails: np.ndarray
    relations: np.ndarray
    relation_rows: np.ndarray
    tau: float
    hard_neg_tails: np.ndarray | None = None

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        n, d = self.heads.shape
        for name, arr in (("tails", self.tails),
                          ("relation_rows", self.relation_rows)):
            if arr.shape != (n, d):
                raise NumericError(
                    f"{name} shape {arr.shape} != heads shape {(n, d)}")
        if self.hard_neg_tails is not None and self.hard_neg_tails.shape != (n, d):
            raise NumericError("hard_neg_tails shape mismatch")
        if self.relations.shape != (n,):
            raise NumericError("relations must hold one id per example")

    @property
    def size(self) -> int:
        return self.heads.shape[0]

    @classmethod
    def from_table(cls, heads, tails, relation_ids, table: RelationTable,
                   tau: float, hard_neg_tails=None) -> "EmbeddedBatch":
        ids = np.asarray(relation_ids, dtype=np.int64)
        rows = table.embeddings[ids]
        return cls(np.asarray(heads, dtype=np.float64),
                   np.asarray(tails, dtype=np.float64),
                   ids, rows, tau,
                   None if hard_neg_tails is None
                   else np.asarray(hard_neg_tails, dtype=np.float64))


@dataclass
class BatchGradients:
    """Gradients of the mean loss w.r.t. every embedding in the batch."""

    heads: np.ndarray
    tails: np.ndarray
    hard_neg_tails: np.ndarray | None
    relation_rows: dict[int, np.ndarray]


def _norms(mat: np.ndarray, what: str) -> np.ndarray:
    n = np.linalg.norm(mat, axis=1)
    if np.any(n == 0.0):
        raise NumericError(f"zero-norm {what} embedding in batch")
    return n


def _cosine_matrix(a: np.ndarray, na: np.ndarray,
                   b: np.ndarray, nb: np.ndarray) -> np.ndarray:
    return (a @ b.T) / np.outer(na, nb)


def _require_variant(variant: str) -> None:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown loss variant {variant!r}")


def _queries(batch: EmbeddedBatch, variant: str) -> np.ndarray:
    return batch.heads if variant == "merged" else batch.heads + batch.relation_rows


def _check_batch(batch: EmbeddedBatch, variant: str) -> None:
    _require_variant(variant)
    if variant == "hard_neg":
        if batch.hard_neg_tails is None:
            raise SchemaError("hard_neg variant needs hard_neg_tails")
        if batch.size < 1:
            raise BatchSizeError("empty batch")
    elif batch.size < 2:
        raise BatchSizeError(
            "in-batch contrast needs N >= 2; one candidate makes the loss 0")


def _logit_rows(batch: EmbeddedBatch, variant: str):
    """Cosine logit blocks shared by loss and gradient paths."""
    q = _queries(batch, variant)
    nq = _norms(q, "translated head")
    nt = _norms(batch.tails, "tail")
    cos_t = _cosine_matrix(q, nq, batch.tails, nt)
    if variant == "hard_neg":
        nn = _norms(batch.hard_neg_tails, "hard-negative tail")
        cos_n = _cosine_matrix(q, nq, batch.hard_neg_tails, nn)
    else:
        nn = None
        cos_n = None
    return q, nq, nt, cos_t, nn, cos_n


def _per_example_losses(batch: EmbeddedBatch, cos_t, cos_n) -> np.ndarray:
    n = batch.size
    losses = np.empty(n)
    for i in range(n):
        logits = cos_t[i] / batch.tau
        if cos_n is not None:
            logits = np.concatenate([logits, cos_n[i] / batch.tau])
        losses[i] = log_sum_exp(logits) - cos_t[i, i] / batch.tau
    return losses


def _loss(batch: EmbeddedBatch, variant: str) -> tuple[float, np.ndarray]:
    _check_batch(batch, variant)
    _, _, _, cos_t, _, cos_n = _logit_rows(batch, variant)
    per_example = _per_example_losses(batch, cos_t, cos_n)
    return float(per_example.mean()), per_example


def loss_in_batch(batch: EmbeddedBatch) -> tuple[float, np.ndarray]:
    """Mean contrastive loss with in-batch tail negatives."""
    return _loss(batch, "in_batch")


def loss_hard_neg(batch: EmbeddedBatch) -> tuple[float, np.ndarray]:
    """Mean contrastive loss over 2N candidates: tails plus hard negatives."""
    return _loss(batch, "hard_neg")


def baseline_merged_loss(batch: EmbeddedBatch) -> tuple[float, np.ndarray]:
    """Relation-agnostic baseline: loss_in_batch with relation rows as zero."""
    return _loss(batch, "merged")


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - m)
    return e / e.sum(axis=1, keepdims=True)


def loss_gradients(batch: EmbeddedBatch, variant: str) -> BatchGradients:
    """Analytic gradients of the mean loss for the given variant.

    The gradient w.r.t. a relation row is the sum over every example
    using that relation; the merged variant reports no relation
    gradients since it never reads the rows.
    """
    _check_batch(batch, variant)
    q, nq, nt, cos_t, nn, cos_n = _logit_rows(batch, variant)
    n = batch.size

    logits = cos_t / batch.tau
    if cos_n is not None:
        logits = np.concatenate([logits, cos_n / batch.tau], axis=1)
    probs = _softmax_rows(logits)

    # d(mean loss)/d(cosine block): softmax prob minus the one-hot positive
    w_t = probs[:, :n].copy()
    w_t[np.arange(n), np.arange(n)] -= 1.0
    w_t /= n * batch.tau
    w_n = probs[:, n:] / (n * batch.tau) if cos_n is not None else None

    q_hat = q / nq[:, None]
    t_hat = batch.tails / nt[:, None]

    grad_q = (w_t @ t_hat - (w_t * cos_t).sum(axis=1)[:, None] * q_hat)
    grad_t = (w_t.T @ q_hat - (w_t * cos_t).sum(axis=0)[:, None] * t_hat)
    grad_t /= nt[:, None]

    grad_neg = None
    if cos_n is not None:
        n_hat = batch.hard_neg_tails / nn[:, None]
        grad_q += (w_n @ n_hat - (w_n * cos_n).sum(axis=1)[:, None] * q_hat)
        grad_neg = (w_n.T @ q_hat - (w_n * cos_n).sum(axis=0)[:, None] * n_hat)
        grad_neg /= nn[:, None]
    grad_q /= nq[:, None]

    rel_grads: dict[int, np.ndarray] = {}
    if variant != "merged":
        for i in range(n):
            k = int(batch.relations[i])
            if k in rel_grads:
                rel_grads[k] = rel_grads[k] + grad_q[i]
            else:
                rel_grads[k] = grad_q[i].copy()
    return BatchGradients(grad_q, grad_t, grad_neg, rel_grads)


@dataclass(frozen=True)
class TokenTriple:
    """One tokenized training example for the step functions."""

    head: TokenizedSentence
    tail: TokenizedSentence
    relation_id: int
    hard_neg: TokenizedSentence | None = None


@dataclass
class StepResult:
    """Loss plus full parameter gradients for one logical batch."""

    loss: float
    per_example: np.ndarray
    encoder_grads: EncoderGrads
    relation_grads: np.ndarray  # (R, d); zero rows for unused relations
    peak_cached: int            # max forward caches held at one time


def _flat_sentences(triples: list[TokenTriple], variant: str):
    """Canonical sentence order: all heads, all tails, then hard negatives.

    Both gradient paths traverse this order, so their accumulations are
    bit-identical.
    """
    sentences = [t.head for t in triples] + [t.tail for t in triples]
    if variant == "hard_neg":
        for t in triples:
            if t.hard_neg is None:
                raise SchemaError("hard_neg variant requires hard_neg on every triple")
        sentences += [t.hard_neg for t in triples]
    return sentences


def _embed_batch(triples: list[TokenTriple], encoder: EncoderParams,
                 relations: RelationTable, tau: float, variant: str,
                 keep_caches: bool):
    """Encode the batch; optionally retain every activation cache."""
    sentences = _flat_sentences(triples, variant)
    embeddings = np.empty((len(sentences), encoder.d))
    caches = [] if keep_caches else None
    for i, sent in enumerate(sentences):
        emb, cache = encode_forward(sent, encoder)
        embeddings[i] = emb
        if keep_caches:
            caches.append(cache)
    n = len(triples)
    heads, tails = embeddings[:n], embeddings[n:2 * n]
    negs = embeddings[2 * n:] if variant == "hard_neg" else None
    batch = EmbeddedBatch.from_table(
        heads, tails, [t.relation_id for t in triples], relations, tau,
        hard_neg_tails=negs)
    return batch, sentences, caches


def _embedding_grad_list(grads: BatchGradients, variant: str) -> list[np.ndarray]:
    out = list(grads.heads) + list(grads.tails)
    if variant == "hard_neg":
        out += list(grads.hard_neg_tails)
    return out


def _relation_grad_matrix(grads: BatchGradients,
                          relations: RelationTable) -> np.ndarray:
    mat = np.zeros_like(relations.embeddings)
    for k, g in grads.relation_rows.items():
        mat[k] += g
    return mat


def naive_step(triples: list[TokenTriple], encoder: EncoderParams,
               relations: RelationTable, tau: float,
               variant: str) -> StepResult:
    """Single-pass reference: encode everything with caches retained,
    then backpropagate. Memory grows with the full batch."""
    _require_variant(variant)
    batch, sentences, caches = _embed_batch(
        triples, encoder, relations, tau, variant, keep_caches=True)
    loss, per_example = _loss(batch, variant)
    grads = loss_gradients(batch, variant)

    acc = EncoderGrads.zeros_like(encoder)
    for cache, g in zip(caches, _embedding_grad_list(grads, variant)):
        acc.accumulate(encode_backward(cache, g, encoder))
    return StepResult(loss, per_example, acc,
                      _relation_grad_matrix(grads, relations),
                      peak_cached=len(sentences))


def grad_cache_step(triples: list[TokenTriple], sub_batch_size: int,
                    encoder: EncoderParams, relations: RelationTable,
                    tau: float, variant: str) -> StepResult:
    """Two-pass gradient computation equal to naive_step.

    Pass 1 encodes every sentence without retaining activations and
    differentiates the loss down to the embeddings. Pass 2 re-encodes
    sub_batch_size sentences at a time, backpropagating the stored
    embedding gradients, so at most sub_batch_size caches exist at once.
    """
    _require_variant(variant)
    if sub_batch_size < 1:
        raise ConfigError("sub_batch_size must be >= 1")

    batch, sentences, _ = _embed_batch(
        triples, encoder, relations, tau, variant, keep_caches=False)
    loss, per_example = _loss(batch, variant)
    grads = loss_gradients(batch, variant)
    flat_grads = _embedding_grad_list(grads, variant)

    acc = EncoderGrads.zeros_like(encoder)
    peak = 0
    for start in range(0, len(sentences), sub_batch_size):
        chunk = sentences[start:start + sub_batch_size]
        live = [encode_forward(sent, encoder)[1] for sent in chunk]
        peak = max(peak, len(live))
        for offset, cache in enumerate(live):
            acc.accumulate(
                encode_backward(cache, flat_grads[start + offset], encoder))
        live.clear()
    return StepResult(loss, per_example, acc,
                      _relation_grad_matrix(grads, relations),
                      peak_cached=peak)
