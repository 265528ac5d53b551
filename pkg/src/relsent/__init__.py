"""relsent: sentence embeddings with translation-based relation modeling.

Train a small text encoder jointly with per-relation embedding vectors so
that head + relation lands near tail, score sentence pairs per relation,
and evaluate with rank correlation and link-prediction metrics.
"""

from .encoder import (
    EncoderParams,
    TokenizedSentence,
    Vocab,
    build_vocab,
    encode_backward,
    encode_forward,
    init_encoder_params,
    tokenize,
)
from .errors import RelsentError
from .model import Model
from .numerics import AdamState, SeededRng, adam_step, cosine, finite_diff_check, log_sum_exp, seeded_shuffle
from .relation_model import (
    RelationTable,
    ScoreWeights,
    init_relation_table,
    relation_similarity_matrix,
    relational_score,
    translate,
    weighted_relational_score,
)

__version__ = "0.1.0"
