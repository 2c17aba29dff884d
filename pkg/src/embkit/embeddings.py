"""Model representation: parameter matrices, the hashed character n-gram
index, word-vector composition, similarity queries, and serialization."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .corpus import Vocabulary
from .errors import NoRepresentationError, OOVError, ParseError, ZeroVectorError
from .validation import require, require_in, require_positive

ARCHS = ("skipgram", "cbow")
LOSSES = ("ns", "hs")
MODES = ("subword", "word2vec")

_FNV_OFFSET = 2166136261
_FNV_PRIME = 16777619


def fnv1a_32(data: bytes) -> int:
    """FNV-1a 32-bit hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFF
    return h


def ngram_hash(ngram: str, buckets: int) -> int:
    """Deterministic bucket id for an n-gram: FNV-1a 32-bit mod `buckets`."""
    require_positive(buckets, "buckets")
    return fnv1a_32(ngram.encode("utf-8")) % buckets


def extract_ngrams(word: str, minn: int, maxn: int) -> list[str]:
    """Character n-grams of `<word>` with lengths minn..maxn.

    The substring equal to the full wrapped form is excluded; the word
    itself is represented by its own vocabulary row instead. Positional
    duplicates are kept.
    """
    require(bool(word), "word must be non-empty")
    require(0 < minn <= maxn, f"need 0 < minn <= maxn, got ({minn}, {maxn})")
    wrapped = f"<{word}>"
    grams = []
    for n in range(minn, maxn + 1):
        for start in range(len(wrapped) - n + 1):
            gram = wrapped[start : start + n]
            if gram != wrapped:
                grams.append(gram)
    return grams


@dataclass(frozen=True)
class SubwordIndex:
    """Maps words to hashed n-gram bucket ids."""

    minn: int = 3
    maxn: int = 6
    buckets: int = 2_000_000

    def ngram_ids(self, word: str) -> np.ndarray:
        """Bucket ids of the word's n-grams, extraction order, duplicates kept."""
        grams = extract_ngrams(word, self.minn, self.maxn)
        return np.asarray(
            [ngram_hash(g, self.buckets) for g in grams], dtype=np.int64
        )


@dataclass(frozen=True)
class ModelConfig:
    """Training hyper-parameters.

    `sample` is the subsampling threshold; values outside (0, 1) disable
    subsampling.
    """

    dim: int = 300
    window: int = 4
    arch: str = "skipgram"
    loss: str = "ns"
    epochs: int = 10
    minn: int = 3
    maxn: int = 6
    mode: str = "subword"
    negatives: int = 5
    lr0: float = 0.05
    buckets: int = 2_000_000
    sample: float = 1e-4

    def __post_init__(self):
        require_positive(self.dim, "dim")
        require_positive(self.window, "window")
        require_positive(self.epochs, "epochs")
        require_in(self.arch, ARCHS, "arch")
        require_in(self.loss, LOSSES, "loss")
        require_in(self.mode, MODES, "mode")
        require(0 < self.minn <= self.maxn,
                f"need 0 < minn <= maxn, got ({self.minn}, {self.maxn})")
        if self.loss == "ns":
            require(self.negatives >= 1,
                    f"negatives must be >= 1 with ns loss, got {self.negatives}")
        require(self.lr0 > 0, f"lr0 must be positive, got {self.lr0}")
        require_positive(self.buckets, "buckets")

    @property
    def subword(self) -> bool:
        return self.mode == "subword"

    def to_dict(self) -> dict:
        return {
            "dim": self.dim, "window": self.window, "arch": self.arch,
            "loss": self.loss, "epochs": self.epochs, "minn": self.minn,
            "maxn": self.maxn, "mode": self.mode, "negatives": self.negatives,
            "lr0": self.lr0, "buckets": self.buckets, "sample": self.sample,
        }


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; raises on zero-length input vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine similarity of a zero vector is undefined")
    return float(np.dot(u, v) / (nu * nv))


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    # Zero rows stay zero rather than dividing by zero.
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


class WordVectorTable:
    """Static word → vector table, queryable, frequency-ordered.

    This is what `load_text` returns and what evaluation consumes; it has
    no training state.
    """

    def __init__(self, words: list[str], vectors: np.ndarray):
        require(len(words) == len(vectors),
                f"{len(words)} words but {len(vectors)} vector rows")
        self.words = list(words)
        self.vectors = np.asarray(vectors, dtype=np.float32)
        self.id_of = {w: i for i, w in enumerate(self.words)}

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.id_of

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self.id_of[word]]
        except KeyError:
            raise OOVError(word) from None

    def nearest_neighbors(self, word: str, k: int = 10) -> list[tuple[str, float]]:
        require_positive(k, "k")
        return _nearest(self, self.vector(word), exclude={word}, k=k)


def _nearest(table, query: np.ndarray, exclude: set, k: int) -> list[tuple[str, float]]:
    qnorm = np.linalg.norm(np.asarray(query, dtype=np.float64))
    if qnorm == 0.0:
        raise ZeroVectorError("nearest-neighbor query vector is zero")
    scores = _unit_rows(table.vectors.astype(np.float64)) @ (query / qnorm)
    # Stable sort on negated scores: ties resolve to the lower word id.
    order = np.argsort(-scores, kind="stable")
    out = []
    for idx in order:
        word = table.words[idx]
        if word in exclude:
            continue
        out.append((word, float(scores[idx])))
        if len(out) == k:
            break
    return out


class EmbeddingModel:
    """Input/output parameter matrices plus vocabulary and config.

    Rows 0..V-1 of `input_matrix` are word vectors; rows V.. are n-gram
    bucket vectors (subword mode only). `output_matrix` holds context rows
    (negative sampling) or internal-node rows (hierarchical softmax).
    Mutable during training, read-only afterwards.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        config: ModelConfig,
        input_matrix: np.ndarray,
        output_matrix: np.ndarray,
    ):
        self.vocab = vocab
        self.config = config
        self.input_matrix = input_matrix
        self.output_matrix = output_matrix
        self.subwords = (
            SubwordIndex(config.minn, config.maxn, config.buckets)
            if config.subword
            else None
        )

    @classmethod
    def initialize(cls, vocab: Vocabulary, config: ModelConfig, seed: int) -> "EmbeddingModel":
        """Fresh model: input rows uniform in [-1/dim, 1/dim], output rows zero."""
        v = len(vocab)
        rows = v + (config.buckets if config.subword else 0)
        rng = np.random.default_rng(seed)
        bound = 1.0 / config.dim
        input_matrix = rng.uniform(-bound, bound, size=(rows, config.dim)).astype(np.float32)
        out_rows = v - 1 if config.loss == "hs" else v
        output_matrix = np.zeros((out_rows, config.dim), dtype=np.float32)
        return cls(vocab, config, input_matrix, output_matrix)

    @property
    def dim(self) -> int:
        return self.config.dim

    def input_row_ids(self, word: str) -> np.ndarray:
        """Rows of `input_matrix` that compose the word's vector."""
        v = len(self.vocab)
        word_id = self.vocab.id_of.get(word)
        if self.subwords is None:
            if word_id is None:
                raise OOVError(word)
            return np.asarray([word_id], dtype=np.int64)
        gram_rows = self.subwords.ngram_ids(word) + v
        if word_id is None:
            if len(gram_rows) == 0:
                raise NoRepresentationError(
                    f"{word!r} is out of vocabulary and too short for n-grams"
                )
            return gram_rows
        return np.concatenate(([word_id], gram_rows))

    def word_vector(self, word: str) -> np.ndarray:
        """Compose the word's vector: mean of its word row and n-gram rows.

        word2vec mode returns the word's row alone and raises
        :class:`OOVError` for unknown words. Subword mode composes unknown
        words from n-grams alone and raises :class:`NoRepresentationError`
        when there are none.
        """
        rows = self.input_row_ids(word)
        return self.input_matrix[rows].mean(axis=0, dtype=np.float64).astype(np.float32)

    def cosine(self, w1: str, w2: str) -> float:
        return cosine(self.word_vector(w1), self.word_vector(w2))

    def to_table(self) -> WordVectorTable:
        """Composed vectors for every vocabulary word, id order."""
        vecs = np.empty((len(self.vocab), self.dim), dtype=np.float32)
        for i, word in enumerate(self.vocab.words):
            vecs[i] = self.word_vector(word)
        return WordVectorTable(self.vocab.words, vecs)

    def nearest_neighbors(self, word: str, k: int = 10) -> list[tuple[str, float]]:
        require_positive(k, "k")
        query = self.word_vector(word)
        return _nearest(self.to_table(), query, exclude={word}, k=k)


def save_text(model_or_table, path) -> None:
    """Write `V dim` header then one `word v1 .. vd` line per word.

    Values carry 9 significant digits so float32 entries round-trip
    exactly.
    """
    table = model_or_table.to_table() if isinstance(model_or_table, EmbeddingModel) else model_or_table
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word, row in zip(table.words, table.vectors):
            values = " ".join(f"{x:.9g}" for x in row)
            fh.write(f"{word} {values}\n")


def _looks_like_header(parts: list[str]) -> bool:
    if len(parts) != 2:
        return False
    try:
        v, dim = int(parts[0]), int(parts[1])
    except ValueError:
        return False
    return v > 0 and dim > 0


def load_text(path) -> WordVectorTable:
    """Read a text table back; the `V dim` header is optional."""
    words: list[str] = []
    rows: list[np.ndarray] = []
    expected = None  # (V, dim) from the header if present
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if line_no == 1 and _looks_like_header(parts):
                expected = (int(parts[0]), int(parts[1]))
                continue
            if len(parts) < 2:
                raise ParseError(line_no, "expected a word and at least one value")
            word = parts[0]
            try:
                row = np.asarray([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError as exc:
                raise ParseError(line_no, f"bad vector value ({exc})") from None
            if dim is None:
                dim = len(row)
                if expected and expected[1] != dim:
                    raise ParseError(
                        line_no, f"header declares dim {expected[1]}, row has {dim}"
                    )
            elif len(row) != dim:
                raise ParseError(line_no, f"expected {dim} values, got {len(row)}")
            words.append(word)
            rows.append(row)
    if not rows:
        raise ParseError(1, "no vector rows found")
    if expected and expected[0] != len(rows):
        raise ParseError(
            len(rows) + 1, f"header declares {expected[0]} rows, file has {len(rows)}"
        )
    return WordVectorTable(words, np.vstack(rows))


_MAGIC = b"EMBKIT\x00"
_BINARY_VERSION = 1


def save_binary(model: EmbeddingModel, path) -> None:
    """Checkpoint the full model (exact float32 bits) to `path`.

    Layout: 7-byte magic, u32 LE format version, u64 LE metadata length,
    UTF-8 JSON metadata, raw C-order float32 input then output matrices.
    """
    meta = {
        "config": model.config.to_dict(),
        "words": model.vocab.words,
        "counts": [int(c) for c in model.vocab.counts],
        "min_count": model.vocab.min_count,
        "input_shape": list(model.input_matrix.shape),
        "output_shape": list(model.output_matrix.shape),
    }
    blob = json.dumps(meta, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _BINARY_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(model.input_matrix, dtype=np.float32).tobytes())
        fh.write(np.ascontiguousarray(model.output_matrix, dtype=np.float32).tobytes())


def load_binary(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ParseError(0, "not a recognized model checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _BINARY_VERSION:
            raise ParseError(0, f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        config = ModelConfig(**meta["config"])
        vocab = Vocabulary(
            meta["words"],
            np.asarray(meta["counts"], dtype=np.int64),
            meta["min_count"],
        )
        in_shape = tuple(meta["input_shape"])
        out_shape = tuple(meta["output_shape"])
        input_matrix = np.frombuffer(
            fh.read(4 * in_shape[0] * in_shape[1]), dtype=np.float32
        ).reshape(in_shape).copy()
        output_matrix = np.frombuffer(
            fh.read(4 * out_shape[0] * out_shape[1]), dtype=np.float32
        ).reshape(out_shape).copy()
    return EmbeddingModel(vocab, config, input_matrix, output_matrix)
