"""Text preprocessing, vocabulary construction, and the derived tables
(Huffman coding, negative-sampling table, subsampling) that training consumes.

All products are immutable after construction and safe to share read-only
across training workers.
"""

from __future__ import annotations

import codecs
import heapq
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DecodeError,
    EmptyVocabularyError,
    InsufficientVocabularyError,
    TableTooSmallError,
)
from .validation import require_positive

# Maximal runs of Unicode letters or digits (underscore excluded); everything
# else is a separator.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_CHUNK_BYTES = 1 << 16


def tokenize(text: str) -> list[str]:
    """Lowercase `text` and split it into letter/digit-run tokens."""
    return _TOKEN_RE.findall(text.lower())


def _iter_byte_chunks(source) -> Iterator[bytes]:
    if isinstance(source, bytes):
        yield source
        return
    if isinstance(source, os.PathLike):
        with open(source, "rb") as fh:
            while chunk := fh.read(_CHUNK_BYTES):
                yield chunk
        return
    if hasattr(source, "read"):
        while chunk := source.read(_CHUNK_BYTES):
            yield chunk
        return
    yield from source


def decode_utf8_chunks(chunks: Iterable[bytes]) -> Iterator[str]:
    """Incrementally decode byte chunks, reporting absolute error offsets."""
    decoder = codecs.getincrementaldecoder("utf-8")()
    fed = 0
    for chunk in chunks:
        buffered = len(decoder.getstate()[0])
        try:
            text = decoder.decode(chunk)
        except UnicodeDecodeError as exc:
            raise DecodeError(fed - buffered + exc.start) from exc
        fed += len(chunk)
        if text:
            yield text
    buffered = len(decoder.getstate()[0])
    try:
        tail = decoder.decode(b"", final=True)
    except UnicodeDecodeError as exc:
        raise DecodeError(fed - buffered + exc.start) from exc
    if tail:
        yield tail


def preprocess(source) -> Iterator[str]:
    """Stream lowercased tokens from UTF-8 text.

    `source` may be a `str` (raw text), `bytes`, an `os.PathLike`, a binary
    file object, or an iterable of byte chunks. Tokens are maximal runs of
    Unicode letters or digits; all other characters separate tokens. Invalid
    UTF-8 raises :class:`DecodeError` with the offending byte offset.
    """
    if isinstance(source, str):
        yield from tokenize(source)
        return
    pending = ""
    for text in decode_utf8_chunks(_iter_byte_chunks(source)):
        text = pending + text.lower()
        tokens = _TOKEN_RE.findall(text)
        # A token touching the chunk edge may continue in the next chunk.
        if tokens and text and _TOKEN_RE.fullmatch(text[-1]):
            pending = tokens.pop()
        else:
            pending = ""
        yield from tokens
    if pending:
        yield pending


@dataclass(frozen=True)
class Vocabulary:
    """Retained words with dense ids assigned by descending count.

    Ties in count are broken lexicographically by surface form, so ids are
    deterministic for identical input.
    """

    words: list[str]
    counts: np.ndarray  # int64, parallel to `words`
    min_count: int
    id_of: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "id_of", {w: i for i, w in enumerate(self.words)})

    @property
    def entries(self) -> list[tuple[str, int]]:
        return [(w, int(c)) for w, c in zip(self.words, self.counts)]

    @property
    def total_tokens(self) -> int:
        """Pre-subsampling token count of retained words."""
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.id_of

    def frequency(self, word: str) -> float:
        """Corpus frequency fraction of `word` among retained tokens."""
        return float(self.counts[self.id_of[word]]) / self.total_tokens

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for word, count in zip(self.words, self.counts):
                fh.write(f"{word}\t{int(count)}\n")

    @classmethod
    def load_tsv(cls, path, min_count: int = 1) -> "Vocabulary":
        words, counts = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                surface, count = line.rstrip("\n").split("\t")
                words.append(surface)
                counts.append(int(count))
        return cls(words, np.asarray(counts, dtype=np.int64), min_count)


def build_vocab(tokens: Iterable[str], min_count: int = 5) -> Vocabulary:
    """Count tokens and keep those seen at least `min_count` times."""
    require_positive(min_count, "min_count")
    counts: dict[str, int] = {}
    for token in tokens:
        counts[token] = counts.get(token, 0) + 1
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabularyError(
            "no tokens met min_count"
            if counts
            else "token stream is empty"
        )
    kept.sort(key=lambda item: (-item[1], item[0]))
    words = [w for w, _ in kept]
    arr = np.asarray([c for _, c in kept], dtype=np.int64)
    return Vocabulary(words, arr, min_count)


@dataclass(frozen=True)
class HuffmanCoding:
    """Prefix-free binary codes and root-to-leaf internal-node paths.

    Internal nodes are numbered 0..V-2; entry `paths[w][j]` is the internal
    node whose binary decision is `codes[w][j]`.
    """

    codes: list[np.ndarray]  # uint8 per word
    paths: list[np.ndarray]  # int32 per word
    node_count: int

    def code_length(self, word_id: int) -> int:
        return len(self.codes[word_id])


def build_huffman(vocab: Vocabulary) -> HuffmanCoding:
    """Build the Huffman tree over word counts.

    The two lightest nodes merge first; the lighter child takes bit 0. Ties
    are broken by node id so the tree is deterministic.
    """
    n = len(vocab)
    if n < 2:
        raise InsufficientVocabularyError(
            f"Huffman coding needs at least 2 words, got {n}"
        )
    # Heap of (count, node_id); leaves are 0..n-1, internal nodes n..2n-2.
    heap: list[tuple[int, int]] = [
        (int(c), i) for i, c in enumerate(vocab.counts)
    ]
    heapq.heapify(heap)
    parent = np.zeros(2 * n - 1, dtype=np.int64)
    bit = np.zeros(2 * n - 1, dtype=np.uint8)
    next_id = n
    while len(heap) > 1:
        c0, n0 = heapq.heappop(heap)
        c1, n1 = heapq.heappop(heap)
        parent[n0], bit[n0] = next_id, 0
        parent[n1], bit[n1] = next_id, 1
        heapq.heappush(heap, (c0 + c1, next_id))
        next_id += 1
    root = next_id - 1
    codes, paths = [], []
    for leaf in range(n):
        rev_bits, rev_nodes = [], []
        node = leaf
        while node != root:
            rev_bits.append(bit[node])
            rev_nodes.append(parent[node] - n)  # internal-node row id
            node = parent[node]
        codes.append(np.asarray(rev_bits[::-1], dtype=np.uint8))
        paths.append(np.asarray(rev_nodes[::-1], dtype=np.int32))
    return HuffmanCoding(codes, paths, node_count=n - 1)


@dataclass(frozen=True)
class NegativeTable:
    """Word-id slots whose frequencies follow the power-smoothed unigram
    distribution to within one slot per word."""

    slots: np.ndarray  # int32
    power: float

    def __len__(self) -> int:
        return len(self.slots)


def build_negative_table(
    vocab: Vocabulary, power: float = 0.75, size: int = 10_000_000
) -> NegativeTable:
    if size < len(vocab):
        raise TableTooSmallError(
            f"table size {size} is smaller than the vocabulary ({len(vocab)})"
        )
    weights = np.power(vocab.counts.astype(np.float64), power)
    cumulative = np.cumsum(weights / weights.sum())
    positions = (np.arange(size, dtype=np.float64) + 0.5) / size
    slots = np.searchsorted(cumulative, positions, side="left")
    slots = np.minimum(slots, len(vocab) - 1).astype(np.int32)
    return NegativeTable(slots, power)


@dataclass(frozen=True)
class SubsampleParams:
    """Frequency threshold for down-sampling very frequent words."""

    threshold: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(
                f"subsample threshold must lie in (0, 1), got {self.threshold}"
            )


def keep_probability(freq_fraction: float, params: SubsampleParams) -> float:
    """Probability of keeping an occurrence of a word with the given
    corpus frequency fraction: min(1, (sqrt(f/t) + 1) * t/f)."""
    if freq_fraction <= 0:
        raise ValueError(f"frequency fraction must be positive, got {freq_fraction}")
    t = params.threshold
    f = freq_fraction
    return min(1.0, (np.sqrt(f / t) + 1.0) * (t / f))


def keep_probabilities(vocab: Vocabulary, threshold: float) -> np.ndarray:
    """Per-word keep probabilities; a threshold outside (0, 1) disables
    subsampling (all ones)."""
    if not 0.0 < threshold < 1.0:
        return np.ones(len(vocab), dtype=np.float64)
    params = SubsampleParams(threshold)
    total = vocab.total_tokens
    return np.asarray(
        [keep_probability(int(c) / total, params) for c in vocab.counts],
        dtype=np.float64,
    )
