"""Sentence encoder: trainable token embeddings, mean pooling, and an
affine projection with tanh, plus its exact hand-derived backward pass.

The encoder is deliberately small so it trains from scratch in seconds;
it sits behind a narrow forward/backward contract so a heavier encoder
could replace it without touching the rest of the package.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInputError,
    NumericError,
    StateError,
    VocabError,
)
from .numerics import SeededRng

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

DEFAULT_MAX_LEN = 32


@dataclass
class Vocab:
    """Token-to-id map with reserved <pad>=0 and <unk>=1 entries."""

    token_to_id: dict[str, int]

    def __len__(self) -> int:
        return len(self.token_to_id)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def id_to_token_list(self) -> list[str]:
        """Tokens ordered by id; inverse of token_to_id."""
        out = [""] * len(self.token_to_id)
        for tok, idx in self.token_to_id.items():
            out[idx] = tok
        return out


def build_vocab(corpus, min_count: int = 1) -> Vocab:
    """Vocabulary of lowercased whitespace tokens seen >= min_count times.

    Ids are deterministic: <pad>, <unk>, then tokens by descending count
    with lexicographic tie-break.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    sentences = list(corpus)
    if not sentences:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for sent in sentences:
        counts.update(sent.lower().split())
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    mapping = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for tok in kept:
        mapping[tok] = len(mapping)
    return Vocab(mapping)


@dataclass
class TokenizedSentence:
    """Token ids for one sentence, already truncated to max_len."""

    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)


def tokenize(sentence: str, vocab: Vocab,
             max_len: int = DEFAULT_MAX_LEN) -> TokenizedSentence:
    """Lowercase, split on whitespace, map to ids, truncate to max_len."""
    tokens = sentence.lower().split()
    if not tokens:
        raise EmptyInputError("cannot tokenize an all-whitespace sentence")
    return TokenizedSentence(tuple(vocab.lookup(t) for t in tokens[:max_len]))


@dataclass
class EncoderParams:
    """Trainable encoder parameters.

    embedding_table: (|V|, d_in); projection_weight: (d_in, d);
    projection_bias: (d,). The output dimension d must match the
    relation-embedding dimension.
    """

    embedding_table: np.ndarray
    projection_weight: np.ndarray
    projection_bias: np.ndarray

    @property
    def d_in(self) -> int:
        return self.embedding_table.shape[1]

    @property
    def d(self) -> int:
        return self.projection_weight.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.embedding_table.shape[0]

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.embedding_table.copy(),
            self.projection_weight.copy(),
            self.projection_bias.copy(),
        )


def init_encoder_params(vocab_size: int, d_in: int, d: int,
                        rng: SeededRng, scale: float = 0.02) -> EncoderParams:
    """Gaussian init (mean 0, std ``scale``) for table and projection;
    zero bias. Deterministic under the rng seed."""
    if vocab_size < 2 or d_in < 1 or d < 1:
        raise ValueError("vocab_size must cover pad/unk and dims be positive")
    table = rng.normal(vocab_size * d_in, std=scale).reshape(vocab_size, d_in)
    weight = rng.normal(d_in * d, std=scale).reshape(d_in, d)
    bias = np.zeros(d, dtype=np.float64)
    return EncoderParams(table, weight, bias)


@dataclass
class ForwardCache:
    """Activations retained by encode_forward for the backward pass."""

    ids: tuple[int, ...]
    pooled: np.ndarray       # mean of embedding rows, (d_in,)
    output: np.ndarray       # tanh(pooled @ W + b), (d,)
    params_id: int           # identity of the EncoderParams used


def encode_forward(tokens: TokenizedSentence,
                   params: EncoderParams) -> tuple[np.ndarray, ForwardCache]:
    """Embed one sentence: tanh(W . mean(rows) + b).

    Returns the embedding and the activation cache consumed by
    encode_backward.
    """
    ids = tokens.ids
    if len(ids) == 0:
        raise EmptyInputError("cannot encode an empty token sequence")
    if max(ids) >= params.vocab_size:
        raise VocabError(
            f"token id {max(ids)} >= vocabulary size {params.vocab_size}")
    rows = params.embedding_table[list(ids)]
    pooled = rows.mean(axis=0)
    pre = pooled @ params.projection_weight + params.projection_bias
    out = np.tanh(pre)
    cache = ForwardCache(ids, pooled, out, id(params))
    return out, cache


@dataclass
class SentenceGrads:
    """Gradients from one backward call.

    embedding_rows maps row id to its gradient; rows absent from the
    sentence have no entry.
    """

    embedding_rows: dict[int, np.ndarray]
    projection_weight: np.ndarray
    projection_bias: np.ndarray


def encode_backward(cache: ForwardCache, upstream_grad: np.ndarray,
                    params: EncoderParams) -> SentenceGrads:
    """Exact chain rule through tanh, the affine map, and mean pooling."""
    if cache.params_id != id(params):
        raise StateError("forward cache was produced with different params")
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != (params.d,):
        raise NumericError(
            f"upstream gradient shape {g.shape} != output dim ({params.d},)")

    d_pre = g * (1.0 - cache.output ** 2)
    d_bias = d_pre
    d_weight = np.outer(cache.pooled, d_pre)
    d_pooled = params.projection_weight @ d_pre

    n = len(cache.ids)
    per_token = d_pooled / n
    rows: dict[int, np.ndarray] = {}
    for idx in cache.ids:
        if idx in rows:
            rows[idx] = rows[idx] + per_token
        else:
            rows[idx] = per_token.copy()
    return SentenceGrads(rows, d_weight, d_bias)


@dataclass
class EncoderGrads:
    """Dense accumulator matching EncoderParams, used by the training loop."""

    embedding_table: np.ndarray
    projection_weight: np.ndarray
    projection_bias: np.ndarray

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "EncoderGrads":
        return cls(
            np.zeros_like(params.embedding_table),
            np.zeros_like(params.projection_weight),
            np.zeros_like(params.projection_bias),
        )

    def accumulate(self, grads: SentenceGrads) -> None:
        for idx, vec in grads.embedding_rows.items():
            self.embedding_table[idx] += vec
        self.projection_weight += grads.projection_weight
        self.projection_bias += grads.projection_bias
