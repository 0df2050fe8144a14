"""Data model and ingestion: text documents, image-token sequences, embeddings, scores.

All loaded structures are immutable after construction and safe to share
read-only across threads.
"""

from __future__ import annotations

import csv
import json
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import CoreliteError

EMB_MAGIC = b"EMB1"
IMAGE_TOKEN_LEN = 32
_MAX_TOKEN_ID = (1 << 32) - 1

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize_text(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric code points.

    Deterministic by construction: no locale, no stemming, no stop words.
    """
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class TextDocument:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise CoreliteError("document id must be non-empty")


@dataclass(frozen=True)
class TokenSequence:
    id: str
    tokens: tuple[int, ...]

    def __post_init__(self):
        if not self.id:
            raise CoreliteError("sequence id must be non-empty")
        for t in self.tokens:
            if not (0 <= t <= _MAX_TOKEN_ID):
                raise CoreliteError(f"id={self.id}: token id {t} out of range")


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Dense n x d matrix of per-instance feature vectors with row ids."""

    ids: tuple[str, ...]
    data: np.ndarray  # float32, shape (n, d)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2:
            raise CoreliteError("embedding data must be 2-D")
        if arr.shape[1] <= 0:
            raise CoreliteError("embedding dimension must be positive")
        if len(self.ids) != arr.shape[0]:
            raise CoreliteError(
                f"id count {len(self.ids)} does not match row count {arr.shape[0]}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise CoreliteError("embedding ids must be unique")
        bad = ~np.isfinite(arr)
        if bad.any():
            row = int(np.nonzero(bad.any(axis=1))[0][0])
            raise CoreliteError(f"row {row}: non-finite value")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ScoreTable:
    """(model, dataset) -> recorded raw score, optionally with instance counts."""

    entries: dict[tuple[str, str], float]
    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for key, score in self.entries.items():
            if not math.isfinite(score):
                raise CoreliteError(f"score for {key} is not finite")
        for key, count in self.counts.items():
            if count <= 0:
                raise CoreliteError(f"count for {key} must be positive")

    def models(self) -> list[str]:
        return sorted({m for m, _ in self.entries})

    def datasets(self) -> list[str]:
        return sorted({d for _, d in self.entries})


@dataclass(frozen=True)
class ScaleSpec:
    """Per-dataset (min, max) normalization ranges; max strictly above min."""

    scales: dict[str, tuple[float, float]]

    def __post_init__(self):
        for dataset, (lo, hi) in self.scales.items():
            if not hi > lo:
                raise CoreliteError(f"scale for {dataset!r}: max must exceed min")


def load_text_corpus(path) -> list[TextDocument]:
    """Read line-delimited JSON records {"id": ..., "text": ...} in file order."""
    docs: list[TextDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CoreliteError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            for name in ("id", "text"):
                if name not in rec:
                    raise CoreliteError(f"line {lineno}: missing field {name}")
            doc_id, text = rec["id"], rec["text"]
            if not isinstance(doc_id, str) or not isinstance(text, str):
                raise CoreliteError(f"line {lineno}: id and text must be strings")
            if doc_id in seen:
                raise CoreliteError(f"duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append(TextDocument(doc_id, text))
    return docs


def load_token_corpus(path, expected_len: int = IMAGE_TOKEN_LEN) -> list[TokenSequence]:
    """Read line-delimited JSON records {"id": ..., "tokens": [...]}, validating length."""
    seqs: list[TokenSequence] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CoreliteError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            for name in ("id", "tokens"):
                if name not in rec:
                    raise CoreliteError(f"line {lineno}: missing field {name}")
            seq_id, tokens = rec["id"], rec["tokens"]
            if not isinstance(tokens, list) or not all(
                isinstance(t, int) and not isinstance(t, bool) for t in tokens
            ):
                raise CoreliteError(f"line {lineno}: tokens must be a list of integers")
            if len(tokens) != expected_len:
                raise CoreliteError(
                    f"id={seq_id}: length {len(tokens)}, expected {expected_len}"
                )
            if seq_id in seen:
                raise CoreliteError(f"duplicate id {seq_id!r}")
            seen.add(seq_id)
            seqs.append(TokenSequence(seq_id, tuple(tokens)))
    return seqs


def load_embeddings(data_path, ids_path) -> EmbeddingMatrix:
    """Read the EMB1 binary matrix plus its sidecar ids file."""
    raw = Path(data_path).read_bytes()
    if raw[:4] != EMB_MAGIC:
        raise CoreliteError(f"{data_path}: bad magic, expected {EMB_MAGIC!r}")
    if len(raw) < 12:
        raise CoreliteError(f"{data_path}: truncated header")
    n, d = struct.unpack_from("<II", raw, 4)
    if d == 0:
        raise CoreliteError(f"{data_path}: dimension must be positive")
    expected = 12 + 4 * n * d
    if len(raw) != expected:
        raise CoreliteError(
            f"{data_path}: payload is {len(raw) - 12} bytes, expected {expected - 12}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=12).reshape(n, d)

    ids_text = Path(ids_path).read_text(encoding="utf-8")
    ids = ids_text.split("\n")
    if ids and ids[-1] == "":
        ids.pop()
    if len(ids) != n:
        raise CoreliteError(
            f"{ids_path}: {len(ids)} ids for {n} rows in {data_path}"
        )
    return EmbeddingMatrix(tuple(ids), data.astype(np.float32))


def save_embeddings(matrix: EmbeddingMatrix, data_path, ids_path) -> None:
    """Write the EMB1 binary matrix and sidecar ids file (one id per line, LF)."""
    with open(data_path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<II", matrix.n, matrix.d))
        fh.write(matrix.data.astype("<f4").tobytes(order="C"))
    with open(ids_path, "w", encoding="utf-8", newline="\n") as fh:
        for row_id in matrix.ids:
            fh.write(row_id + "\n")


def load_scores(path) -> ScoreTable:
    """Read a model,dataset,score[,count] CSV into a ScoreTable."""
    entries: dict[tuple[str, str], float] = {}
    counts: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CoreliteError(f"{path}: empty file, expected a header") from None
        if header[:3] != ["model", "dataset", "score"]:
            raise CoreliteError(
                f"{path}: header must start with model,dataset,score"
            )
        has_count = len(header) > 3 and header[3] == "count"
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise CoreliteError(f"line {lineno}: expected at least 3 columns")
            model, dataset = row[0], row[1]
            try:
                score = float(row[2])
            except ValueError:
                raise CoreliteError(
                    f"line {lineno}: unparseable score {row[2]!r}"
                ) from None
            if not math.isfinite(score):
                raise CoreliteError(f"line {lineno}: score must be finite")
            key = (model, dataset)
            if key in entries:
                raise CoreliteError(f"duplicate (model, dataset) pair {key}")
            entries[key] = score
            if has_count and len(row) > 3 and row[3] != "":
                try:
                    count = int(row[3])
                except ValueError:
                    raise CoreliteError(
                        f"line {lineno}: unparseable count {row[3]!r}"
                    ) from None
                if count <= 0:
                    raise CoreliteError(f"line {lineno}: count must be positive")
                counts[key] = count
    return ScoreTable(entries, counts)
