"""SGD training: skipgram/CBoW context generation, negative-sampling and
hierarchical-softmax updates, linear learning-rate decay, hogwild workers.

Two routes produce models. `backend="kernel"` runs the compiled fused loop
from `_kernels` (the production path). `backend="reference"` composes the
plain numpy operations defined here (`make_contexts`, `compose_hidden`,
`ns_update`, `hs_update`) in Python; it is slow but transparent, and both
routes consume the same rng stream, so tests can require them to agree.
"""

from __future__ import annotations

import os
import sys
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import _kernels as _k
from .corpus import (
    HuffmanCoding,
    NegativeTable,
    Vocabulary,
    build_huffman,
    build_negative_table,
    build_vocab,
    keep_probabilities,
    tokenize,
)
from .embeddings import EmbeddingModel, ModelConfig
from .errors import ConfigError, NoRepresentationError, OOVError
from .validation import require, require_positive

LR_FLOOR_FACTOR = 1e-5
_CHUNK_SENTENCES = 512


class LcgRandom:
    """word2vec-style 64-bit LCG; identical stream to the compiled kernels."""

    def __init__(self, state: int):
        self.state = np.uint64(state)

    # numba boxes uint64 returns as plain ints; re-wrap so the next call
    # dispatches on the uint64 signature again.

    def uniform(self) -> float:
        state, u = _k.lcg_uniform(self.state)
        self.state = np.uint64(state)
        return u

    def window(self, window: int) -> int:
        state, b = _k.draw_window(self.state, window)
        self.state = np.uint64(state)
        return b

    def negative_slot(self, table_len: int) -> int:
        state, s = _k.draw_negative_slot(self.state, table_len)
        self.state = np.uint64(state)
        return s


@dataclass
class TrainState:
    tokens_processed: int = 0
    lr_current: float = 0.0
    loss_running: float = 0.0


def lr_schedule(lr0: float, progress: float) -> float:
    """Linear decay lr0*(1-progress), floored at 1e-5*lr0."""
    require(0.0 <= progress <= 1.0, f"progress must be in [0,1], got {progress}")
    return max(lr0 * (1.0 - progress), LR_FLOOR_FACTOR * lr0)


def context_positions(i: int, b: int, n: int) -> list[int]:
    """Positions within b of i, excluding i, clipped to 0..n-1."""
    return [j for j in range(max(0, i - b), min(n - 1, i + b) + 1) if j != i]


def make_contexts(
    sentence: Sequence[int], window: int, rng: LcgRandom
) -> list[tuple[int, list[int]]]:
    """Positions paired with their effective-window context positions.

    For each position one half-window b is drawn uniformly from 1..window;
    the context is every other position within b, clipped to the sentence.
    """
    require_positive(window, "window")
    n = len(sentence)
    return [(i, context_positions(i, rng.window(window), n)) for i in range(n)]


def draw_negatives(
    rng: LcgRandom, table: NegativeTable, negatives: int, target: int
) -> np.ndarray:
    """Sample negative word ids; a draw colliding with the target is redrawn
    up to 10 times and then skipped, so fewer than `negatives` may return."""
    out = []
    for _ in range(negatives):
        for _attempt in range(11):
            cand = int(table.slots[rng.negative_slot(len(table.slots))])
            if cand != target:
                out.append(cand)
                break
    return np.asarray(out, dtype=np.int64)


def _sigmoid_values(x: np.ndarray, exact: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if exact:
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    idx = np.clip(((x + _k.MAX_SIGMOID) * _k.SIGMOID_TABLE_SIZE
                   / (2.0 * _k.MAX_SIGMOID)).astype(np.int64),
                  0, _k.SIGMOID_TABLE_SIZE)
    return _k.SIG_TABLE[idx]


def _log_sigmoid_values(x: np.ndarray, exact: bool) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if exact:
        return -np.logaddexp(0.0, -x)
    idx = np.clip(((x + _k.MAX_SIGMOID) * _k.SIGMOID_TABLE_SIZE
                   / (2.0 * _k.MAX_SIGMOID)).astype(np.int64),
                  0, _k.SIGMOID_TABLE_SIZE)
    return _k.LOGSIG_TABLE[idx]


def ns_loss(
    hidden: np.ndarray,
    target: int,
    negative_ids: Sequence[int],
    output_matrix: np.ndarray,
    exact_sigmoid: bool = True,
) -> float:
    """-log sigma(o_t.h) - sum_k log sigma(-o_k.h), no side effects."""
    hidden = np.asarray(hidden, dtype=np.float64)
    rows = np.concatenate(([target], np.asarray(negative_ids, dtype=np.int64)))
    dots = output_matrix[rows].astype(np.float64) @ hidden
    signs = np.full(len(rows), -1.0)
    signs[0] = 1.0
    return float(-_log_sigmoid_values(signs * dots, exact_sigmoid).sum())


def ns_update(
    hidden: np.ndarray,
    target: int,
    table: NegativeTable,
    negatives: int,
    lr: float,
    output_matrix: np.ndarray,
    rng: LcgRandom,
    *,
    negative_ids: Sequence[int] | None = None,
    exact_sigmoid: bool = False,
) -> tuple[np.ndarray, float]:
    """One negative-sampling step against `target`.

    Returns (dL/d hidden, loss). Gradients and the loss are evaluated at
    the initial row values; output rows are then updated in place by
    lr*(label - sigma)*hidden. Pass `negative_ids` to pin the sample
    (tests); otherwise they are drawn from `table` via `rng`.
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    if negative_ids is None:
        negative_ids = draw_negatives(rng, table, negatives, target)
    rows = np.concatenate(([target], np.asarray(negative_ids, dtype=np.int64)))
    labels = np.zeros(len(rows))
    labels[0] = 1.0
    initial = output_matrix[rows].astype(np.float64)
    dots = initial @ hidden
    sig = _sigmoid_values(dots, exact_sigmoid)
    signs = np.where(labels == 1.0, 1.0, -1.0)
    loss = float(-_log_sigmoid_values(signs * dots, exact_sigmoid).sum())
    grad_hidden = ((sig - labels)[:, None] * initial).sum(axis=0)
    # np.add.at so duplicate negative rows accumulate rather than collapse
    np.add.at(output_matrix, rows, (lr * (labels - sig))[:, None] * hidden)
    return grad_hidden, loss


def hs_loss(
    hidden: np.ndarray,
    target: int,
    coding: HuffmanCoding,
    output_matrix: np.ndarray,
    exact_sigmoid: bool = True,
) -> float:
    hidden = np.asarray(hidden, dtype=np.float64)
    path = coding.paths[target]
    codes = coding.codes[target].astype(np.float64)
    dots = output_matrix[path].astype(np.float64) @ hidden
    return float(-_log_sigmoid_values((1.0 - 2.0 * codes) * dots, exact_sigmoid).sum())


def hs_update(
    hidden: np.ndarray,
    target: int,
    coding: HuffmanCoding,
    lr: float,
    output_matrix: np.ndarray,
    *,
    exact_sigmoid: bool = False,
) -> tuple[np.ndarray, float]:
    """One hierarchical-softmax step along the target's Huffman path.

    Returns (dL/d hidden, loss); node rows are updated in place.
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    path = coding.paths[target]
    codes = coding.codes[target].astype(np.float64)
    labels = 1.0 - codes
    initial = output_matrix[path].astype(np.float64)
    dots = initial @ hidden
    sig = _sigmoid_values(dots, exact_sigmoid)
    loss = float(-_log_sigmoid_values((1.0 - 2.0 * codes) * dots, exact_sigmoid).sum())
    grad_hidden = ((sig - labels)[:, None] * initial).sum(axis=0)
    np.add.at(output_matrix, path, (lr * (labels - sig))[:, None] * hidden)
    return grad_hidden, loss


def hs_log_probability(
    hidden: np.ndarray,
    word_id: int,
    coding: HuffmanCoding,
    output_matrix: np.ndarray,
) -> float:
    """log P(word | hidden) implied by the Huffman factorization."""
    return -hs_loss(hidden, word_id, coding, output_matrix, exact_sigmoid=True)


def compose_hidden(model: EmbeddingModel, target_or_context, config=None):
    """Hidden vector for one update: a single word id (skipgram) or a
    sequence of context ids (CBoW, mean of composed vectors). Returns None
    for an empty context (the pair is skipped)."""
    ids = np.atleast_1d(np.asarray(target_or_context, dtype=np.int64))
    if ids.size == 0:
        return None
    acc = np.zeros(model.dim, dtype=np.float64)
    for wid in ids:
        word = model.vocab.words[wid]
        rows = model.input_row_ids(word)
        acc += model.input_matrix[rows].astype(np.float64).mean(axis=0)
    return acc / ids.size


def build_row_index(vocab: Vocabulary, config: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """CSR map word id -> input rows (own row first, then n-gram rows)."""
    v = len(vocab)
    if not config.subword:
        return (np.arange(v, dtype=np.int64),
                np.arange(v + 1, dtype=np.int64))
    from .embeddings import SubwordIndex

    index = SubwordIndex(config.minn, config.maxn, config.buckets)
    ids: list[np.ndarray] = []
    off = np.zeros(v + 1, dtype=np.int64)
    for i, word in enumerate(vocab.words):
        rows = np.concatenate(([i], index.ngram_ids(word) + v))
        ids.append(rows)
        off[i + 1] = off[i] + len(rows)
    return np.concatenate(ids), off


def _flatten_coding(coding: HuffmanCoding) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    off = np.zeros(len(coding.codes) + 1, dtype=np.int64)
    for i, code in enumerate(coding.codes):
        off[i + 1] = off[i] + len(code)
    codes = np.concatenate(coding.codes) if coding.codes else np.empty(0, np.uint8)
    paths = np.concatenate(coding.paths) if coding.paths else np.empty(0, np.int32)
    return codes.astype(np.uint8), paths.astype(np.int32), off


def _iter_lines(corpus) -> Iterator[str]:
    if isinstance(corpus, (str, os.PathLike)):
        with open(corpus, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from corpus


def encode_sentences(lines: Iterable[str], vocab: Vocabulary) -> Iterator[np.ndarray]:
    """Token-id arrays per line; words outside the vocabulary are dropped,
    empty results are skipped."""
    for line in lines:
        ids = [vocab.id_of[t] for t in tokenize(line) if t in vocab.id_of]
        if ids:
            yield np.asarray(ids, dtype=np.int32)


def _iter_chunks(sentences: Iterator[np.ndarray], chunk_sentences: int):
    batch: list[np.ndarray] = []
    for sent in sentences:
        batch.append(sent)
        if len(batch) >= chunk_sentences:
            yield batch
            batch = []
    if batch:
        yield batch


def _pack(batch: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    offsets = np.zeros(len(batch) + 1, dtype=np.int64)
    for i, sent in enumerate(batch):
        offsets[i + 1] = offsets[i] + len(sent)
    return np.concatenate(batch), offsets


def train(
    corpus,
    vocab: Vocabulary,
    config: ModelConfig,
    seed: int = 1,
    workers: int = 1,
    backend: str = "kernel",
    negative_table_size: int = 10_000_000,
    verbose: bool = False,
) -> EmbeddingModel:
    """Train a model for exactly `config.epochs` passes over `corpus`.

    `corpus` is a file path or an iterable of text lines; each line is a
    sentence and contexts never cross lines. With workers=1 the result is
    bit-reproducible for a fixed seed; more workers trade determinism for
    speed (hogwild updates without locks). The returned model carries
    `epoch_losses` (mean per-target loss per epoch) and `train_state`.
    """
    require_positive(workers, "workers")
    if backend not in ("kernel", "reference"):
        raise ConfigError(f"unknown backend {backend!r}")
    if backend == "reference" and workers != 1:
        raise ConfigError("the reference backend is single-worker only")
    if not isinstance(corpus, (str, os.PathLike, Sequence)):
        corpus = list(corpus)  # epochs re-iterate the corpus

    ss = np.random.SeedSequence(seed)
    init_ss, lcg_ss = ss.spawn(2)
    model = EmbeddingModel.initialize(vocab, config, init_ss)
    row_ids, row_off = build_row_index(vocab, config)
    if config.loss == "hs":
        coding = build_huffman(vocab)
        codes, paths, code_off = _flatten_coding(coding)
        neg_table = np.empty(0, dtype=np.int32)
        table = None
    else:
        table = build_negative_table(vocab, size=max(negative_table_size, len(vocab)))
        neg_table = table.slots
        coding = None
        codes = np.empty(0, dtype=np.uint8)
        paths = np.empty(0, dtype=np.int32)
        code_off = np.zeros(1, dtype=np.int64)
    keep_prob = keep_probabilities(vocab, config.sample)
    total_planned = np.int64(config.epochs) * np.int64(vocab.total_tokens)

    progress = np.zeros(workers, dtype=np.int64)
    loss_sum = np.zeros(workers, dtype=np.float64)
    loss_count = np.zeros(workers, dtype=np.int64)
    states = lcg_ss.generate_state(workers, dtype=np.uint64)

    epoch_losses: list[float] = []
    started = time.monotonic()

    def run_kernel_chunks(worker: int) -> None:
        lines = _iter_lines(corpus)
        if workers > 1:
            lines = (ln for idx, ln in enumerate(lines) if idx % workers == worker)
        state = np.uint64(states[worker])
        for batch in _iter_chunks(encode_sentences(lines, vocab), _CHUNK_SENTENCES):
            tokens, offsets = _pack(batch)
            # re-wrap immediately: the boxed return is a plain int, and
            # letting it dispatch the next call would compile a signed
            # specialization that wraps the state negative
            state = np.uint64(_k.train_chunk(
                tokens, offsets, model.input_matrix, model.output_matrix,
                row_ids, row_off, codes, paths, code_off, neg_table,
                keep_prob, config.arch == "skipgram", config.loss == "ns",
                config.negatives, config.window, config.lr0, total_planned,
                progress, worker, state, loss_sum, loss_count,
            ))
            if verbose and worker == 0:
                _emit_progress(progress, loss_sum, loss_count,
                               config, total_planned, started)
        states[worker] = state

    def run_reference() -> None:
        rng = LcgRandom(states[0])
        in_mat, out_mat = model.input_matrix, model.output_matrix
        for sent in encode_sentences(_iter_lines(corpus), vocab):
            done = int(progress.sum())
            lr = max(config.lr0 * (1.0 - done / total_planned),
                     LR_FLOOR_FACTOR * config.lr0)
            kept = _subsample(sent, keep_prob, rng)
            progress[0] += len(sent)
            # window draws interleave with negative draws, position by
            # position, exactly as the fused kernel consumes the stream
            for i in range(len(kept)):
                ctx = context_positions(i, rng.window(config.window), len(kept))
                if config.arch == "skipgram":
                    for j in ctx:
                        hidden = _compose_csr(in_mat, row_ids, row_off, [kept[i]])
                        grad, loss = _apply_update(
                            hidden, int(kept[j]), out_mat, table, coding,
                            config, lr, rng)
                        _backprop_input(in_mat, row_ids, row_off,
                                        [kept[i]], -lr * grad)
                        loss_sum[0] += loss
                        loss_count[0] += 1
                else:
                    if not ctx:
                        continue
                    context_ids = [int(kept[j]) for j in ctx]
                    hidden = _compose_csr(in_mat, row_ids, row_off, context_ids)
                    grad, loss = _apply_update(
                        hidden, int(kept[i]), out_mat, table, coding,
                        config, lr, rng)
                    _backprop_input(in_mat, row_ids, row_off,
                                    context_ids, -lr * grad)
                    loss_sum[0] += loss
                    loss_count[0] += 1
        states[0] = rng.state

    for epoch in range(config.epochs):
        before_sum, before_count = loss_sum.sum(), loss_count.sum()
        if backend == "reference":
            run_reference()
        elif workers == 1:
            run_kernel_chunks(0)
        else:
            threads = [
                threading.Thread(target=run_kernel_chunks, args=(w,))
                for w in range(workers)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        seen = loss_count.sum() - before_count
        epoch_losses.append(
            float((loss_sum.sum() - before_sum) / seen) if seen else float("nan")
        )
        if verbose:
            print(f"epoch {epoch + 1}/{config.epochs} "
                  f"loss {epoch_losses[-1]:.4f}", file=sys.stderr)

    done = int(progress.sum())
    model.epoch_losses = epoch_losses
    model.train_state = TrainState(
        tokens_processed=done,
        lr_current=lr_schedule(config.lr0, min(1.0, done / int(total_planned))),
        loss_running=float(loss_sum.sum() / max(1, loss_count.sum())),
    )
    return model


def _emit_progress(progress, loss_sum, loss_count, config, total_planned, started):
    done = int(progress.sum())
    elapsed = max(time.monotonic() - started, 1e-9)
    lr = max(config.lr0 * (1.0 - done / int(total_planned)),
             LR_FLOOR_FACTOR * config.lr0)
    loss = loss_sum.sum() / max(1, loss_count.sum())
    print(f"\rlr {lr:.5f}  loss {loss:.4f}  tokens/s {done / elapsed:,.0f}  "
          f"progress {100.0 * done / int(total_planned):.1f}%",
          end="", file=sys.stderr, flush=True)


def _subsample(sent: np.ndarray, keep_prob: np.ndarray, rng: LcgRandom) -> np.ndarray:
    kept = []
    for wid in sent:
        kp = keep_prob[wid]
        if kp < 1.0 and rng.uniform() >= kp:
            continue
        kept.append(wid)
    return np.asarray(kept, dtype=np.int32)


def _compose_csr(in_mat, row_ids, row_off, word_ids) -> np.ndarray:
    # sum rows then multiply by the reciprocal, never divide: the fused
    # kernel scales this way, and the two must round identically
    acc = np.zeros(in_mat.shape[1], dtype=np.float64)
    for wid in word_ids:
        rows = row_ids[row_off[wid] : row_off[wid + 1]]
        word_sum = in_mat[rows].astype(np.float64).sum(axis=0)
        acc += word_sum * (1.0 / len(rows))
    return acc * (1.0 / len(word_ids))


def _backprop_input(in_mat, row_ids, row_off, word_ids, step: np.ndarray) -> None:
    # the full hidden step goes to every constituent row, unscaled
    for wid in word_ids:
        rows = row_ids[row_off[wid] : row_off[wid + 1]]
        np.add.at(in_mat, rows, step)


def _apply_update(hidden, target, out_mat, table, coding, config, lr, rng):
    if config.loss == "ns":
        return ns_update(hidden, target, table, config.negatives, lr, out_mat, rng)
    return hs_update(hidden, target, coding, lr, out_mat)


class EmbeddingVectorizer(BaseEstimator, TransformerMixin):
    """Scikit-learn style wrapper: fit trains embeddings on an iterable of
    text lines, transform maps documents to mean word vectors.

    Documents with no representable token transform to the zero vector.
    """

    def __init__(
        self,
        dim: int = 100,
        window: int = 4,
        arch: str = "skipgram",
        loss: str = "ns",
        epochs: int = 5,
        minn: int = 3,
        maxn: int = 6,
        mode: str = "subword",
        negatives: int = 5,
        lr0: float = 0.05,
        buckets: int = 200_000,
        sample: float = 1e-4,
        min_count: int = 5,
        workers: int = 1,
        seed: int = 1,
    ):
        self.dim = dim
        self.window = window
        self.arch = arch
        self.loss = loss
        self.epochs = epochs
        self.minn = minn
        self.maxn = maxn
        self.mode = mode
        self.negatives = negatives
        self.lr0 = lr0
        self.buckets = buckets
        self.sample = sample
        self.min_count = min_count
        self.workers = workers
        self.seed = seed

    def _config(self) -> ModelConfig:
        return ModelConfig(
            dim=self.dim, window=self.window, arch=self.arch, loss=self.loss,
            epochs=self.epochs, minn=self.minn, maxn=self.maxn, mode=self.mode,
            negatives=self.negatives, lr0=self.lr0, buckets=self.buckets,
            sample=self.sample,
        )

    def fit(self, X, y=None):
        lines = list(X)
        config = self._config()
        vocab = build_vocab(
            (t for line in lines for t in tokenize(line)), self.min_count
        )
        self.vocab_ = vocab
        self.model_ = train(
            lines, vocab, config, seed=self.seed, workers=self.workers,
            negative_table_size=max(len(vocab), 1_000_000),
        )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise ConfigError("EmbeddingVectorizer.transform called before fit")
        docs = list(X)
        out = np.zeros((len(docs), self.dim), dtype=np.float32)
        for i, doc in enumerate(docs):
            vecs = []
            for token in tokenize(doc):
                try:
                    vecs.append(self.model_.word_vector(token))
                except (OOVError, NoRepresentationError):
                    continue
            if vecs:
                out[i] = np.mean(vecs, axis=0)
        return out
