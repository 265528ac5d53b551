"""Versioned binary model persistence.

Layout: magic b"RSE1", a u32 little-endian header length, a UTF-8 JSON
header (format version, dims, vocab, relation names, config echo), then
all parameter matrices as little-endian float64 in row-major order:
embedding table, projection weight, projection bias, relation rows.
Loading re-validates structure before touching any parameter and bit-
exactly round-trips every value.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .encoder import PAD_TOKEN, UNK_TOKEN, EncoderParams, Vocab
from .errors import CorruptArtifactError
from .model import Model
from .relation_model import RelationTable

MAGIC = b"RSE1"
FORMAT_VERSION = 1


@dataclass
class ModelArtifact:
    """A model plus the config snapshot it was trained with."""

    model: Model
    config_echo: dict | None = None
    format_version: int = FORMAT_VERSION


def _header_dict(artifact: ModelArtifact) -> dict:
    m = artifact.model
    return {
        "format_version": artifact.format_version,
        "d_in": m.encoder.d_in,
        "d": m.encoder.d,
        "max_len": m.max_len,
        "vocab": m.vocab.id_to_token_list(),
        "relations": m.relations.names,
        "config": artifact.config_echo,
    }


def save_model(artifact: ModelArtifact, path) -> None:
    """Write the artifact atomically (temp file + rename)."""
    m = artifact.model
    header = json.dumps(_header_dict(artifact), ensure_ascii=False,
                        sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(block, dtype="<f8").tobytes()
        for block in (m.encoder.embedding_table, m.encoder.projection_weight,
                      m.encoder.projection_bias, m.relations.embeddings))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".relsent-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptArtifactError(
            f"truncated file: expected {n} bytes of {what}, got {len(data)}")
    return data


def load_model(path) -> ModelArtifact:
    """Read and fully validate a model file written by save_model."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != MAGIC:
            raise CorruptArtifactError(f"{path}: bad magic, not a model file")
        (header_len,) = struct.unpack("<I", _read_exact(fh, 4, "header length"))
        if header_len > 512 * 1024 * 1024:
            raise CorruptArtifactError("implausible header length")
        try:
            header = json.loads(_read_exact(fh, header_len, "header"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptArtifactError(f"unreadable header: {exc}") from exc
        payload = fh.read()

    if not isinstance(header, dict):
        raise CorruptArtifactError("header is not an object")
    if header.get("format_version") != FORMAT_VERSION:
        raise CorruptArtifactError(
            f"unsupported format version {header.get('format_version')!r}")
    try:
        d_in = int(header["d_in"])
        d = int(header["d"])
        max_len = int(header["max_len"])
        tokens = list(header["vocab"])
        relations = list(header["relations"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptArtifactError(f"malformed header field: {exc}") from exc
    if d_in < 1 or d < 1 or max_len < 1:
        raise CorruptArtifactError("dimensions must be positive")
    if len(tokens) < 2 or tokens[0] != PAD_TOKEN or tokens[1] != UNK_TOKEN:
        raise CorruptArtifactError("vocabulary must start with <pad>, <unk>")
    if len(set(tokens)) != len(tokens):
        raise CorruptArtifactError("duplicate vocabulary tokens")
    if not relations or len(set(relations)) != len(relations):
        raise CorruptArtifactError("relation names missing or duplicated")

    v = len(tokens)
    r = len(relations)
    counts = (v * d_in, d_in * d, d, r * d)
    expected = 8 * sum(counts)
    if len(payload) != expected:
        raise CorruptArtifactError(
            f"payload holds {len(payload)} bytes, header implies {expected}")

    blocks = []
    offset = 0
    for count in counts:
        blocks.append(np.frombuffer(
            payload, dtype="<f8", count=count, offset=offset
        ).astype(np.float64))
        offset += count * 8
    for block in blocks:
        if not np.all(np.isfinite(block)):
            raise CorruptArtifactError("non-finite parameter values")

    encoder = EncoderParams(
        blocks[0].reshape(v, d_in),
        blocks[1].reshape(d_in, d),
        blocks[2].reshape(d),
    )
    table = RelationTable(
        {name: i for i, name in enumerate(relations)},
        blocks[3].reshape(r, d),
    )
    vocab = Vocab({tok: i for i, tok in enumerate(tokens)})
    model = Model(vocab, encoder, table, max_len=max_len)
    return ModelArtifact(model, header.get("config"), FORMAT_VERSION)
