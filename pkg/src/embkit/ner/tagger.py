"""Estimator-style interface: fit on (token sequences, label sequences),
predict label sequences."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ..embeddings import WordVectorTable
from ..errors import ConfigError
from ..validation import require
from .data import OUTSIDE_TAG, TaggedSentence
from .training import TransformerTaggerConfig, evaluate_tagger, train_tagger


class TransformerTagger(BaseEstimator):
    """Sequence labeller over a self-attention encoder.

    X is a list of token lists, y a matching list of label lists. A slice
    of the training data (validation_fraction) is held out to checkpoint
    on; the fitted model is the best-on-held-out state. Pass a
    WordVectorTable as `embeddings` to use frozen pretrained vectors.
    """

    def __init__(
        self,
        model_dim: int = 300,
        layers: int = 6,
        heads: int = 6,
        ff_dim: int | None = None,
        dropout: float = 0.1,
        optimizer: str = "adam",
        lr: float = 1e-3,
        batch_size: int = 64,
        epochs: int = 20,
        max_len: int = 128,
        validation_fraction: float = 0.15,
        embeddings: WordVectorTable | None = None,
        seed: int = 1,
    ):
        self.model_dim = model_dim
        self.layers = layers
        self.heads = heads
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.optimizer = optimizer
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.max_len = max_len
        self.validation_fraction = validation_fraction
        self.embeddings = embeddings
        self.seed = seed

    def _config(self) -> TransformerTaggerConfig:
        return TransformerTaggerConfig(
            model_dim=self.model_dim,
            layers=self.layers,
            heads=self.heads,
            ff_dim=self.ff_dim,
            dropout=self.dropout,
            optimizer=self.optimizer,
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            max_len=self.max_len,
            seed=self.seed,
        )

    def fit(self, X: Sequence[Sequence[str]], y: Sequence[Sequence[str]]):
        require(len(X) == len(y) > 0, "X and y must be equal-length and non-empty")
        require(0.0 <= self.validation_fraction < 1.0,
                "validation_fraction must be in [0, 1)")
        sentences = [TaggedSentence(tuple(t), tuple(l)) for t, l in zip(X, y)]
        n_dev = int(self.validation_fraction * len(sentences))
        if n_dev > 0:
            perm = np.random.default_rng(self.seed).permutation(len(sentences))
            shuffled = [sentences[i] for i in perm]
            train, dev = shuffled[n_dev:], shuffled[:n_dev]
        else:
            # no held-out slice: checkpoint against the training data itself
            train, dev = sentences, sentences
        self.model_, self.dev_losses_, self.token_vocab_, self.label_set_ = (
            train_tagger(self._config(), train, dev, pretrained=self.embeddings)
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ConfigError("tagger is not fitted; call fit first")

    def predict(self, X: Sequence[Sequence[str]]) -> list[list[str]]:
        import torch

        self._check_fitted()
        out: list[list[str]] = []
        with torch.no_grad():
            for tokens in X:
                if not tokens:
                    out.append([])
                    continue
                kept = list(tokens)[: self.max_len]
                ids = torch.tensor(
                    [[self.token_vocab_.encode(t) for t in kept]], dtype=torch.long
                )
                pad = torch.zeros_like(ids, dtype=torch.bool)
                pred = self.model_(ids, pad).argmax(dim=-1)[0]
                labels = [self.label_set_.decode(int(i)) for i in pred]
                # truncated tail falls back to the outside tag
                labels += [OUTSIDE_TAG] * (len(tokens) - len(kept))
                out.append(labels)
        return out

    def score(self, X: Sequence[Sequence[str]], y: Sequence[Sequence[str]]) -> float:
        """Micro F1 on (X, y)."""
        self._check_fitted()
        sentences = [TaggedSentence(tuple(t), tuple(l)) for t, l in zip(X, y)]
        metrics = evaluate_tagger(self.model_, sentences, self.token_vocab_,
                                  self.label_set_, batch_size=self.batch_size)
        return metrics.f1
