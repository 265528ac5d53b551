"""Named relation embeddings and the translation operation.

A relation k is a learned d-dimensional row h_k. Translating a head
embedding by h_k should land near the tail embedding, so the directed
similarity of (s_i, s_j) under relation k is cosine(h_i + h_k, h_j).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVectorError, SchemaError, ShapeError
from .numerics import SeededRng, cosine

INIT_SCALE = 0.02  # std of the zero-mean Gaussian init, frozen


@dataclass
class RelationTable:
    """Relation name -> id map plus the (R, d) embedding matrix."""

    name_to_id: dict[str, int]
    embeddings: np.ndarray

    @property
    def names(self) -> list[str]:
        out = [""] * len(self.name_to_id)
        for name, idx in self.name_to_id.items():
            out[idx] = name
        return out

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def __len__(self) -> int:
        return len(self.name_to_id)

    def id_of(self, name: str) -> int:
        if name not in self.name_to_id:
            raise KeyError(f"unknown relation {name!r}")
        return self.name_to_id[name]

    def row(self, relation: int | str) -> np.ndarray:
        idx = self.id_of(relation) if isinstance(relation, str) else relation
        if not 0 <= idx < len(self):
            raise KeyError(f"unknown relation id {idx}")
        return self.embeddings[idx]

    def copy(self) -> "RelationTable":
        return RelationTable(dict(self.name_to_id), self.embeddings.copy())

    @classmethod
    def zeros(cls, names, d: int) -> "RelationTable":
        """All-zero rows; used by the relation-agnostic baseline."""
        names = list(names)
        _check_names(names)
        return cls({n: i for i, n in enumerate(names)},
                   np.zeros((len(names), d), dtype=np.float64))


def _check_names(names: list[str]) -> None:
    if not names:
        raise SchemaError("relation set must not be empty")
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate relation names in {names}")


def init_relation_table(names, d: int, rng: SeededRng) -> RelationTable:
    """One Gaussian(0, 0.02) row per relation, deterministic under seed."""
    names = list(names)
    _check_names(names)
    if d < 1:
        raise ValueError("embedding dimension must be positive")
    rows = rng.normal(len(names) * d, std=INIT_SCALE).reshape(len(names), d)
    return RelationTable({n: i for i, n in enumerate(names)}, rows)


def translate(head_embedding: np.ndarray, relation: int | str,
              table: RelationTable) -> np.ndarray:
    """head + h_k, elementwise, no normalization."""
    row = table.row(relation)
    head = np.asarray(head_embedding, dtype=np.float64)
    if head.shape != row.shape:
        raise ShapeError(
            f"head dim {head.shape} != relation dim {row.shape}")
    return head + row


def relational_score(h_i: np.ndarray, h_j: np.ndarray, relation: int | str,
                     table: RelationTable) -> float:
    """Directed similarity cosine(h_i + h_k, h_j) in [-1, 1]."""
    return cosine(translate(h_i, relation, table), h_j)


@dataclass
class ScoreWeights:
    """Non-negative weight per relation name; at least one positive."""

    weights: dict[str, float]

    def __post_init__(self):
        if any(w < 0 for w in self.weights.values()):
            raise SchemaError("relational weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise SchemaError("at least one relational weight must be positive")


def weighted_relational_score(h_i: np.ndarray, h_j: np.ndarray,
                              weights: ScoreWeights,
                              table: RelationTable) -> float:
    """sum_k w_k * cosine(h_i + h_k, h_j)."""
    total = 0.0
    for name, w in weights.weights.items():
        if name not in table.name_to_id:
            raise SchemaError(f"weight references unknown relation {name!r}")
        if w == 0.0:
            continue
        total += w * relational_score(h_i, h_j, name, table)
    return total


def relation_similarity_matrix(table: RelationTable) -> np.ndarray:
    """(R, R) matrix of pairwise cosine similarities between relation rows.

    Symmetric with a unit diagonal; any zero row is rejected.
    """
    rows = table.embeddings
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        dead = table.names[int(np.argmin(norms))]
        raise DegenerateVectorError(f"relation {dead!r} has a zero embedding")
    unit = rows / norms[:, None]
    sim = unit @ unit.T
    sim = np.clip(sim, -1.0, 1.0)
    # force exact symmetry and unit diagonal against rounding
    sim = (sim + sim.T) / 2.0
    np.fill_diagonal(sim, 1.0)
    return sim
