"""Trained-model view: vocabulary, encoder, and relation table bundled
behind embed/score helpers used by evaluation and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import DEFAULT_MAX_LEN, EncoderParams, Vocab, encode_forward, tokenize
from .relation_model import (
    RelationTable,
    ScoreWeights,
    relational_score,
    weighted_relational_score,
)


@dataclass
class Model:
    """Everything needed to embed sentences and score relations."""

    vocab: Vocab
    encoder: EncoderParams
    relations: RelationTable
    max_len: int = DEFAULT_MAX_LEN
    _embed_cache: dict[str, np.ndarray] = field(
        default_factory=dict, repr=False, compare=False)

    def embed(self, sentence: str) -> np.ndarray:
        """d-dimensional embedding of one sentence (read-only, cached)."""
        hit = self._embed_cache.get(sentence)
        if hit is not None:
            return hit
        tokens = tokenize(sentence, self.vocab, self.max_len)
        emb, _ = encode_forward(tokens, self.encoder)
        self._embed_cache[sentence] = emb
        return emb

    def invalidate_cache(self) -> None:
        """Drop cached embeddings after parameters change."""
        self._embed_cache.clear()

    def score(self, s1: str, s2: str, relation: int | str) -> float:
        """Directed similarity of (s1, s2) under one relation."""
        return relational_score(
            self.embed(s1), self.embed(s2), relation, self.relations)

    def weighted_score(self, s1: str, s2: str, weights: ScoreWeights) -> float:
        """Weighted sum of single-relation similarity scores."""
        return weighted_relational_score(
            self.embed(s1), self.embed(s2), weights, self.relations)

    def copy(self) -> "Model":
        return Model(self.vocab, self.encoder.copy(), self.relations.copy(),
                     self.max_len)
