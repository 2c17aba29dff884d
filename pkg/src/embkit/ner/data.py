"""Tagged-corpus ingestion (CoNLL-style and sentence-id CSV), label and
token inventories, deterministic splits, and tensor batching."""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, InsufficientDataError, ParseError
from ..validation import require

OUTSIDE_TAG = "O"
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
IGNORE_LABEL_ID = -1  # loss and metrics skip these positions


@dataclass(frozen=True)
class TaggedSentence:
    tokens: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        require(len(self.tokens) == len(self.labels) >= 1,
                "tokens and labels must be equal-length and non-empty")

    def __len__(self) -> int:
        return len(self.tokens)


class LabelSet:
    """Dense ids for the tag inventory; built from training data only."""

    def __init__(self, labels: Sequence[str]):
        ordered = sorted(set(labels))
        require(OUTSIDE_TAG in ordered,
                f"label inventory must contain the outside tag {OUTSIDE_TAG!r}")
        self.labels = ordered
        self.id_of = {lab: i for i, lab in enumerate(ordered)}
        self._warned_unseen: set[str] = set()

    @classmethod
    def from_sentences(cls, sentences: Iterable[TaggedSentence]) -> "LabelSet":
        return cls([lab for s in sentences for lab in s.labels])

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def outside_id(self) -> int:
        return self.id_of[OUTSIDE_TAG]

    def encode(self, label: str) -> int:
        idx = self.id_of.get(label)
        if idx is None:
            # tags unseen at training time degrade to O rather than crash
            if label not in self._warned_unseen:
                warnings.warn(f"unseen label {label!r} mapped to {OUTSIDE_TAG!r}")
                self._warned_unseen.add(label)
            return self.outside_id
        return idx

    def decode(self, idx: int) -> str:
        return self.labels[idx]


class TokenVocab:
    """Token ids for the tagger; id 0 pads, id 1 is the unknown token."""

    def __init__(self, words: Sequence[str]):
        seen = dict.fromkeys(words)
        self.words = [PAD_TOKEN, UNK_TOKEN, *seen]
        self.id_of = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def from_sentences(cls, sentences: Iterable[TaggedSentence]) -> "TokenVocab":
        return cls([t for s in sentences for t in s.tokens])

    def __len__(self) -> int:
        return len(self.words)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    def encode(self, token: str) -> int:
        return self.id_of.get(token, self.unk_id)


def load_conll(path) -> list[TaggedSentence]:
    """Token-per-line files: whitespace-separated columns, first column the
    token, last column the label, blank line between sentences."""
    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    labels: list[str] = []
    ncols = None

    def flush():
        nonlocal ncols
        if tokens:
            sentences.append(TaggedSentence(tuple(tokens), tuple(labels)))
            tokens.clear()
            labels.clear()
        ncols = None

    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                flush()
                continue
            cols = line.split()
            if len(cols) < 2:
                raise ParseError(line_no, "expected at least token and label columns")
            if ncols is None:
                ncols = len(cols)
            elif len(cols) != ncols:
                raise ParseError(
                    line_no,
                    f"inconsistent column count within a sentence "
                    f"({len(cols)} vs {ncols})",
                )
            tokens.append(cols[0])
            labels.append(cols[-1])
    flush()
    return sentences


def load_gmb_csv(path) -> list[TaggedSentence]:
    """CSV rows of (sentence-id, token, ..., tag); a non-empty sentence-id
    starts a new sentence and empty ids continue the current one."""
    sentences: list[TaggedSentence] = []
    tokens: list[str] = []
    labels: list[str] = []

    def flush():
        if tokens:
            sentences.append(TaggedSentence(tuple(tokens), tuple(labels)))
            tokens.clear()
            labels.clear()

    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row or not any(f.strip() for f in row):
                continue
            if line_no == 1 and row[0].strip().lower().startswith("sentence"):
                continue  # header
            if len(row) < 3:
                raise ParseError(line_no, f"expected at least 3 columns, got {len(row)}")
            marker, token, tag = row[0].strip(), row[1], row[-1].strip()
            if marker:
                flush()
            if not token:
                raise ParseError(line_no, "empty token field")
            tokens.append(token)
            labels.append(tag)
    flush()
    return sentences


def split_dataset(
    sentences: Sequence[TaggedSentence], seed: int
) -> tuple[list[TaggedSentence], list[TaggedSentence], list[TaggedSentence]]:
    """Deterministic shuffle, then a 70:15:15 split.

    Train and dev sizes round down; the test split takes the remainder, so
    the three parts partition the input exactly.
    """
    n = len(sentences)
    require(n >= 3, f"need at least 3 sentences to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(0.7 * n)
    n_dev = int(0.15 * n)
    shuffled = [sentences[i] for i in perm]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


def make_batches(
    sentences: Sequence[TaggedSentence],
    token_vocab: TokenVocab,
    label_set: LabelSet,
    batch_size: int,
    max_len: int,
    rng: np.random.Generator | None = None,
):
    """Padded (token_ids, label_ids, pad_mask) LongTensor/BoolTensor batches.

    Sentences longer than max_len are truncated with a warning. Pass `rng`
    to shuffle sentence order (training); omit it for evaluation order.
    """
    import torch

    if not sentences:
        raise InsufficientDataError("no sentences to batch")
    order = list(range(len(sentences)))
    if rng is not None:
        order = list(rng.permutation(len(sentences)))
    truncated = 0
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [sentences[i] for i in order[start : start + batch_size]]
        lengths = []
        for s in chunk:
            if len(s) > max_len:
                truncated += 1
            lengths.append(min(len(s), max_len))
        width = max(lengths)
        tok = torch.zeros((len(chunk), width), dtype=torch.long)
        lab = torch.full((len(chunk), width), IGNORE_LABEL_ID, dtype=torch.long)
        pad = torch.ones((len(chunk), width), dtype=torch.bool)
        for r, s in enumerate(chunk):
            ids = [token_vocab.encode(t) for t in s.tokens[:max_len]]
            labs = [label_set.encode(t) for t in s.labels[:max_len]]
            tok[r, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            lab[r, : len(labs)] = torch.tensor(labs, dtype=torch.long)
            pad[r, : len(ids)] = False
        batches.append((tok, lab, pad))
    if truncated:
        warnings.warn(f"{truncated} sentences truncated to max_len={max_len}")
    return batches
