"""8-gram overlap indexes over training corpora and benchmark contamination scans.

Text indexes track "meaningless" n-grams (those appearing more than
`freq_threshold` times in training data) so boilerplate matches can be
suppressed. Image indexes work over fixed-length 32-token sequences with
25 stride-1 windows each; an 8-token window hit corresponds to roughly a
quarter of the image overlapping.
"""

from __future__ import annotations

import enum
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import CoreliteError
from .corpus import IMAGE_TOKEN_LEN, TextDocument, TokenSequence, tokenize_text

NGI_MAGIC = b"NGI1"
NGI_VERSION = 1
_KIND_TEXT = 0
_KIND_IMAGE = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def _text_token_bytes(token: str) -> bytes:
    raw = token.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def hash_text_token(token: str) -> int:
    """Hash one word token: length-prefixed UTF-8 through FNV-1a."""
    return fnv1a64(_text_token_bytes(token))


def hash_text_ngram(tokens) -> int:
    """Hash a word n-gram: per-token length-prefixed UTF-8, in order."""
    return fnv1a64(b"".join(_text_token_bytes(t) for t in tokens))


def hash_image_window(tokens) -> int:
    """Hash an image-token window: 4-byte little-endian ids, in order."""
    return fnv1a64(struct.pack(f"<{len(tokens)}I", *tokens))


class ContaminationCategory(enum.Enum):
    CLEAN = "clean"
    DUPLICATE_IMAGE = "duplicate_image"
    SIMILAR_IMAGE = "similar_image"
    SIMILAR_QUESTION = "similar_question"


def categorize(text_hit: bool, image_hit: bool, exact_image: bool) -> ContaminationCategory:
    """Assign the single contamination category, image evidence first."""
    if exact_image and not image_hit:
        raise CoreliteError("exact_image requires image_hit")
    if exact_image:
        return ContaminationCategory.DUPLICATE_IMAGE
    if image_hit:
        return ContaminationCategory.SIMILAR_IMAGE
    if text_hit:
        return ContaminationCategory.SIMILAR_QUESTION
    return ContaminationCategory.CLEAN


@dataclass(frozen=True)
class InstanceOverlap:
    text_hit: bool
    image_hit: bool
    exact_image: bool
    category: ContaminationCategory
    matched_windows: int


@dataclass(frozen=True)
class OverlapReport:
    per_instance: dict[str, InstanceOverlap]
    text_overlap_pct: float
    image_overlap_pct: float

    def category_counts(self) -> dict[ContaminationCategory, int]:
        counts = {cat: 0 for cat in ContaminationCategory}
        for inst in self.per_instance.values():
            counts[inst.category] += 1
        return counts


@dataclass(frozen=True)
class TextNGramIndex:
    """Counts of word n-grams in training data plus the meaningless-gram sets.

    Keys are exact token tuples by default, or 64-bit FNV-1a hashes in
    hashed mode (memory saver at scale; identical scan results absent
    collisions).
    """

    n: int
    freq_threshold: int
    hashed: bool
    table: dict
    meaningless: frozenset
    meaningless_tokens: frozenset


@dataclass(frozen=True)
class ImageNGramIndex:
    """Counts of 8-token windows over 32-token image sequences.

    `exact_sequences` holds the full sequences (or their hashes) for
    duplicate detection. No frequency filtering is applied to images.
    """

    n: int
    hashed: bool
    table: dict
    exact_sequences: frozenset


def _text_windows(tokens: list[str], n: int):
    if len(tokens) < n:
        return
    yield from zip(*(tokens[i:] for i in range(n)))


def build_text_index(
    train: list[TextDocument],
    n: int = 8,
    freq_threshold: int = 10,
    hashed: bool = False,
) -> TextNGramIndex:
    """Count all word n-grams in the training corpus and derive the meaningless sets."""
    if n < 1:
        raise CoreliteError("n must be at least 1")
    if freq_threshold < 1:
        raise CoreliteError("freq_threshold must be at least 1")

    table: Counter = Counter()
    for doc in train:
        tokens = tokenize_text(doc.text)
        if hashed:
            table.update(hash_text_ngram(w) for w in _text_windows(tokens, n))
        else:
            table.update(_text_windows(tokens, n))

    meaningless = frozenset(k for k, c in table.items() if c > freq_threshold)

    tokens_of_meaningless: set = set()
    if hashed:
        # Hashed keys do not retain their tokens; recover them in a second
        # pass over the corpus.
        if meaningless:
            for doc in train:
                tokens = tokenize_text(doc.text)
                for window in _text_windows(tokens, n):
                    if hash_text_ngram(window) in meaningless:
                        tokens_of_meaningless.update(
                            hash_text_token(t) for t in window
                        )
    else:
        for key in meaningless:
            tokens_of_meaningless.update(key)

    return TextNGramIndex(
        n=n,
        freq_threshold=freq_threshold,
        hashed=hashed,
        table=dict(table),
        meaningless=meaningless,
        meaningless_tokens=frozenset(tokens_of_meaningless),
    )


def overlap_ratio(candidate, index: TextNGramIndex) -> float:
    """Fraction of a candidate n-gram's token positions found in meaningless n-grams.

    `candidate` is a token tuple (exact mode) or a tuple of token hashes
    (hashed mode), length index.n either way.
    """
    if len(candidate) != index.n:
        raise CoreliteError(
            f"candidate has {len(candidate)} tokens, index n is {index.n}"
        )
    if not index.meaningless_tokens:
        return 0.0
    hits = sum(1 for t in candidate if t in index.meaningless_tokens)
    return hits / index.n


def scan_text(
    bench: list[TextDocument],
    index: TextNGramIndex,
    ratio_threshold: float = 0.75,
) -> OverlapReport:
    """Flag benchmark documents sharing a qualifying n-gram with training data.

    A window qualifies when it is present in the training table, is not
    itself meaningless, and has overlap ratio below `ratio_threshold`.
    """
    per_instance: dict[str, InstanceOverlap] = {}
    hit_count = 0
    for doc in bench:
        tokens = tokenize_text(doc.text)
        if index.hashed:
            token_items = [hash_text_token(t) for t in tokens]
            keys = [
                hash_text_ngram(w) for w in _text_windows(tokens, index.n)
            ]
        else:
            token_items = tokens
            keys = list(_text_windows(tokens, index.n))

        matched = 0
        for pos, key in enumerate(keys):
            if key not in index.table or key in index.meaningless:
                continue
            window_items = tuple(token_items[pos : pos + index.n])
            if overlap_ratio(window_items, index) < ratio_threshold:
                matched += 1
        text_hit = matched > 0
        hit_count += text_hit
        per_instance[doc.id] = InstanceOverlap(
            text_hit=text_hit,
            image_hit=False,
            exact_image=False,
            category=categorize(text_hit, False, False),
            matched_windows=matched,
        )

    total = len(bench)
    pct = 100.0 * hit_count / total if total else 0.0
    return OverlapReport(per_instance, text_overlap_pct=pct, image_overlap_pct=0.0)


def build_image_index(
    train: list[TokenSequence], n: int = 8, hashed: bool = False
) -> ImageNGramIndex:
    """Index all stride-1 windows of the 32-token training sequences."""
    if not 1 <= n <= IMAGE_TOKEN_LEN:
        raise CoreliteError(f"n must be in 1..{IMAGE_TOKEN_LEN}")
    table: Counter = Counter()
    exact: set = set()
    for seq in train:
        if len(seq.tokens) != IMAGE_TOKEN_LEN:
            raise CoreliteError(
                f"id={seq.id}: length {len(seq.tokens)}, expected {IMAGE_TOKEN_LEN}"
            )
        windows = [
            seq.tokens[i : i + n] for i in range(IMAGE_TOKEN_LEN - n + 1)
        ]
        if hashed:
            table.update(hash_image_window(w) for w in windows)
            exact.add(hash_image_window(seq.tokens))
        else:
            table.update(windows)
            exact.add(seq.tokens)
    return ImageNGramIndex(
        n=n, hashed=hashed, table=dict(table), exact_sequences=frozenset(exact)
    )


def scan_image(bench: list[TokenSequence], index: ImageNGramIndex) -> OverlapReport:
    """Flag benchmark sequences whose windows (or whole sequence) hit the index."""
    per_instance: dict[str, InstanceOverlap] = {}
    hit_count = 0
    for seq in bench:
        if len(seq.tokens) != IMAGE_TOKEN_LEN:
            raise CoreliteError(
                f"id={seq.id}: length {len(seq.tokens)}, expected {IMAGE_TOKEN_LEN}"
            )
        windows = [
            seq.tokens[i : i + index.n]
            for i in range(IMAGE_TOKEN_LEN - index.n + 1)
        ]
        if index.hashed:
            keys = [hash_image_window(w) for w in windows]
            full = hash_image_window(seq.tokens)
        else:
            keys = windows
            full = seq.tokens
        matched = sum(1 for key in keys if key in index.table)
        exact_image = full in index.exact_sequences
        image_hit = matched > 0
        hit_count += image_hit
        per_instance[seq.id] = InstanceOverlap(
            text_hit=False,
            image_hit=image_hit,
            exact_image=exact_image,
            category=categorize(False, image_hit, exact_image),
            matched_windows=matched,
        )

    total = len(bench)
    pct = 100.0 * hit_count / total if total else 0.0
    return OverlapReport(per_instance, text_overlap_pct=0.0, image_overlap_pct=pct)


# --- index serialization ---------------------------------------------------
#
# Layout: magic "NGI1" | version u16 | n u16 | freq_threshold u32 |
# kind u8 | hashed u8 | entry count u64 | sorted (key, count) pairs |
# kind-specific trailer. All integers little-endian. Entries are sorted by
# serialized key bytes so files are byte-reproducible.


def _serialize_text_key(key, hashed: bool) -> bytes:
    if hashed:
        return struct.pack("<Q", key)
    return b"".join(_text_token_bytes(t) for t in key)


def _serialize_image_key(key, hashed: bool) -> bytes:
    if hashed:
        return struct.pack("<Q", key)
    return struct.pack(f"<{len(key)}I", *key)


def save_index(index, path) -> None:
    """Write a text or image n-gram index in the NGI1 binary format."""
    if isinstance(index, TextNGramIndex):
        kind, freq = _KIND_TEXT, index.freq_threshold
        ser = lambda k: _serialize_text_key(k, index.hashed)
    elif isinstance(index, ImageNGramIndex):
        kind, freq = _KIND_IMAGE, 0
        ser = lambda k: _serialize_image_key(k, index.hashed)
    else:
        raise CoreliteError(f"cannot serialize {type(index).__name__}")

    out = bytearray()
    out += NGI_MAGIC
    out += struct.pack("<HHIBB", NGI_VERSION, index.n, freq, kind, int(index.hashed))
    entries = sorted((ser(k), c) for k, c in index.table.items())
    out += struct.pack("<Q", len(entries))
    for key_bytes, count in entries:
        if kind == _KIND_TEXT and not index.hashed:
            out += struct.pack("<I", len(key_bytes))
        out += key_bytes
        out += struct.pack("<Q", count)

    if kind == _KIND_TEXT:
        if index.hashed:
            # Token hashes are not recoverable from hashed keys; persist them.
            toks = sorted(index.meaningless_tokens)
            out += struct.pack("<Q", len(toks))
            for t in toks:
                out += struct.pack("<Q", t)
    else:
        seqs = sorted(
            struct.pack("<Q", s) if index.hashed else struct.pack(f"<{len(s)}I", *s)
            for s in index.exact_sequences
        )
        out += struct.pack("<Q", len(seqs))
        for s in seqs:
            out += s

    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, data: bytes, path):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.off + size > len(self.data):
            raise CoreliteError(f"{self.path}: truncated index file")
        vals = struct.unpack_from(fmt, self.data, self.off)
        self.off += size
        return vals

    def raw(self, size: int) -> bytes:
        if self.off + size > len(self.data):
            raise CoreliteError(f"{self.path}: truncated index file")
        out = self.data[self.off : self.off + size]
        self.off += size
        return out


def load_index(path):
    """Read an NGI1 index file; returns a TextNGramIndex or ImageNGramIndex."""
    data = Path(path).read_bytes()
    if data[:4] != NGI_MAGIC:
        raise CoreliteError(f"{path}: bad magic, expected {NGI_MAGIC!r}")
    r = _Reader(data, path)
    r.off = 4
    version, n, freq, kind, hashed_flag = r.take("<HHIBB")
    if version != NGI_VERSION:
        raise CoreliteError(f"{path}: unsupported index version {version}")
    hashed = bool(hashed_flag)
    (count,) = r.take("<Q")

    table: dict = {}
    for _ in range(count):
        if hashed:
            (key,) = r.take("<Q")
        elif kind == _KIND_TEXT:
            (key_len,) = r.take("<I")
            key_bytes = r.raw(key_len)
            toks = []
            pos = 0
            while pos < key_len:
                (tok_len,) = struct.unpack_from("<I", key_bytes, pos)
                pos += 4
                toks.append(key_bytes[pos : pos + tok_len].decode("utf-8"))
                pos += tok_len
            key = tuple(toks)
        else:
            key = r.take(f"<{n}I")
        (c,) = r.take("<Q")
        table[key] = c

    if kind == _KIND_TEXT:
        meaningless = frozenset(k for k, c in table.items() if c > freq)
        if hashed:
            (tok_count,) = r.take("<Q")
            tokens_of_meaningless = frozenset(
                r.take("<Q")[0] for _ in range(tok_count)
            )
        else:
            toks: set = set()
            for key in meaningless:
                toks.update(key)
            tokens_of_meaningless = frozenset(toks)
        if r.off != len(data):
            raise CoreliteError(f"{path}: trailing bytes in index file")
        return TextNGramIndex(
            n=n,
            freq_threshold=freq,
            hashed=hashed,
            table=table,
            meaningless=meaningless,
            meaningless_tokens=tokens_of_meaningless,
        )

    (seq_count,) = r.take("<Q")
    seqs: set = set()
    for _ in range(seq_count):
        if hashed:
            seqs.add(r.take("<Q")[0])
        else:
            seqs.add(r.take(f"<{IMAGE_TOKEN_LEN}I"))
    if r.off != len(data):
        raise CoreliteError(f"{path}: trailing bytes in index file")
    return ImageNGramIndex(
        n=n, hashed=hashed, table=table, exact_sequences=frozenset(seqs)
    )
