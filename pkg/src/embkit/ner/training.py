"""Tagger training with strict-improvement checkpointing, token-level
micro-averaged scoring, random hyperparameter search, and the repeated-run
protocol that aggregates over seeds."""

from __future__ import annotations

import copy
import json
import math
import os
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import torch

from ..embeddings import WordVectorTable
from ..errors import DivergenceError, InsufficientDataError
from ..validation import require, require_in, require_positive
from .data import (
    IGNORE_LABEL_ID,
    LabelSet,
    TaggedSentence,
    TokenVocab,
    make_batches,
)
from .model import TokenTagger, build_embedding_layer
from .optim import make_optimizer

SEARCH_OPTIMIZERS = ("adam", "rmsprop")
SEARCH_LAYERS = tuple(range(6, 13))
SEARCH_HEADS = tuple(range(2, 7))


@dataclass(frozen=True)
class TransformerTaggerConfig:
    model_dim: int = 300
    layers: int = 6
    heads: int = 6
    ff_dim: int | None = None  # None means 4 * model_dim
    dropout: float = 0.1
    optimizer: str = "adam"
    lr: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    max_len: int = 128
    scale_embeddings: bool = True
    seed: int = 1

    def __post_init__(self):
        require_positive(self.model_dim, "model_dim")
        require_positive(self.layers, "layers")
        require_positive(self.heads, "heads")
        require(self.model_dim % self.heads == 0,
                f"model_dim {self.model_dim} not divisible by heads {self.heads}")
        require(0.0 <= self.dropout < 1.0, "dropout must be in [0, 1)")
        require_in(self.optimizer, SEARCH_OPTIMIZERS, "optimizer")
        require_positive(self.lr, "lr")
        require_positive(self.batch_size, "batch_size")
        require_positive(self.epochs, "epochs")
        require_positive(self.max_len, "max_len")
        if self.ff_dim is not None:
            require_positive(self.ff_dim, "ff_dim")

    def to_dict(self) -> dict:
        return {
            "model_dim": self.model_dim,
            "layers": self.layers,
            "heads": self.heads,
            "ff_dim": self.ff_dim,
            "dropout": self.dropout,
            "optimizer": self.optimizer,
            "lr": self.lr,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "max_len": self.max_len,
            "scale_embeddings": self.scale_embeddings,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
        }


def micro_scores(true_ids: np.ndarray, pred_ids: np.ndarray, outside_id: int) -> Metrics:
    """Token-level micro precision/recall/F1.

    Positions where both sides agree on the outside tag carry no credit:
    a true positive is a correct non-outside prediction, a false positive
    any wrong non-outside prediction, a false negative any missed
    non-outside truth. A wrong entity tag on an entity token counts as
    both a false positive and a false negative.
    """
    true_ids = np.asarray(true_ids)
    pred_ids = np.asarray(pred_ids)
    require(true_ids.shape == pred_ids.shape, "prediction/label length mismatch")
    tp = int(np.sum((pred_ids == true_ids) & (true_ids != outside_id)))
    fp = int(np.sum((pred_ids != outside_id) & (pred_ids != true_ids)))
    fn = int(np.sum((true_ids != outside_id) & (pred_ids != true_ids)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = float(np.mean(pred_ids == true_ids)) if len(true_ids) else 0.0
    return Metrics(precision, recall, f1, accuracy)


def _collect_predictions(model: TokenTagger, batches) -> tuple[np.ndarray, np.ndarray]:
    model.eval()
    trues, preds = [], []
    with torch.no_grad():
        for tok, lab, pad in batches:
            logits = model(tok, pad)
            keep = lab.reshape(-1) != IGNORE_LABEL_ID
            trues.append(lab.reshape(-1)[keep].numpy())
            preds.append(logits.argmax(dim=-1).reshape(-1)[keep].numpy())
    return np.concatenate(trues), np.concatenate(preds)


def evaluate_tagger(
    model: TokenTagger,
    sentences: Sequence[TaggedSentence],
    token_vocab: TokenVocab,
    label_set: LabelSet,
    batch_size: int = 64,
) -> Metrics:
    if not sentences:
        raise InsufficientDataError("no sentences to evaluate")
    batches = make_batches(sentences, token_vocab, label_set,
                           batch_size, model.max_len)
    true_ids, pred_ids = _collect_predictions(model, batches)
    return micro_scores(true_ids, pred_ids, label_set.outside_id)


def _mean_loss(model: TokenTagger, batches) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for tok, lab, pad in batches:
            logits = model(tok, pad)
            n = int((lab != IGNORE_LABEL_ID).sum())
            loss = torch.nn.functional.cross_entropy(
                logits.reshape(-1, logits.shape[-1]), lab.reshape(-1),
                ignore_index=IGNORE_LABEL_ID, reduction="sum",
            )
            total += float(loss)
            count += n
    return total / count


def train_tagger(
    config: TransformerTaggerConfig,
    train: Sequence[TaggedSentence],
    dev: Sequence[TaggedSentence],
    token_vocab: TokenVocab | None = None,
    label_set: LabelSet | None = None,
    pretrained: WordVectorTable | None = None,
    verbose: bool = False,
) -> tuple[TokenTagger, list[float], TokenVocab, LabelSet]:
    """Train for exactly config.epochs, checkpointing on the dev loss.

    The checkpoint advances only on strict improvement, and the returned
    model carries the checkpointed weights, not the final-epoch ones.
    Returns (model, per-epoch dev losses, token_vocab, label_set).
    """
    if not train:
        raise InsufficientDataError("empty training split")
    if not dev:
        raise InsufficientDataError("empty dev split")
    if token_vocab is None:
        token_vocab = TokenVocab.from_sentences(train)
    if label_set is None:
        label_set = LabelSet.from_sentences(train)

    torch.manual_seed(config.seed)
    embedding = build_embedding_layer(
        token_vocab, config.model_dim, pretrained=pretrained, seed=config.seed
    )
    model = TokenTagger(
        embedding,
        n_labels=len(label_set),
        layers=config.layers,
        heads=config.heads,
        ff_dim=config.ff_dim,
        dropout=config.dropout,
        max_len=config.max_len,
        scale_embeddings=config.scale_embeddings,
    )
    optimizer = make_optimizer(config.optimizer, model.parameters(), lr=config.lr)

    shuffle_rng = np.random.default_rng(config.seed)
    dev_batches = make_batches(dev, token_vocab, label_set,
                               config.batch_size, config.max_len)
    dev_losses: list[float] = []
    best_loss = math.inf
    best_state = None

    for epoch in range(config.epochs):
        model.train()
        batches = make_batches(train, token_vocab, label_set,
                               config.batch_size, config.max_len, rng=shuffle_rng)
        for tok, lab, pad in batches:
            optimizer.zero_grad()
            logits = model(tok, pad)
            loss = torch.nn.functional.cross_entropy(
                logits.reshape(-1, logits.shape[-1]), lab.reshape(-1),
                ignore_index=IGNORE_LABEL_ID,
            )
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch + 1}"
                )
            loss.backward()
            optimizer.step()
        dev_loss = _mean_loss(model, dev_batches)
        if not math.isfinite(dev_loss):
            raise DivergenceError(f"non-finite dev loss at epoch {epoch + 1}")
        dev_losses.append(dev_loss)
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_state = copy.deepcopy(model.state_dict())
        if verbose:
            print(f"epoch {epoch + 1}/{config.epochs} dev_loss={dev_loss:.4f}")

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return model, dev_losses, token_vocab, label_set


def search_space() -> list[tuple[str, int, int]]:
    return [
        (opt, layers, heads)
        for opt in SEARCH_OPTIMIZERS
        for layers in SEARCH_LAYERS
        for heads in SEARCH_HEADS
    ]


def hyperparam_search(
    base_config: TransformerTaggerConfig,
    train: Sequence[TaggedSentence],
    dev: Sequence[TaggedSentence],
    budget: int = 45,
    proxy_epochs: int = 3,
    seed: int = 1,
    pretrained: WordVectorTable | None = None,
    verbose: bool = False,
) -> tuple[TransformerTaggerConfig, list[dict]]:
    """Uniform random search without replacement over optimizer, depth,
    and head count; each trial trains a reduced-epoch proxy and scores
    dev F1. Budgets at or above the space size visit every point.

    Head counts that do not divide the model dimension are dropped from
    the space; at the default dimension of 300 nothing is dropped.
    """
    require_positive(budget, "budget")
    require_positive(proxy_epochs, "proxy_epochs")
    space = [p for p in search_space() if base_config.model_dim % p[2] == 0]
    require(bool(space),
            f"no head count in {SEARCH_HEADS} divides model_dim "
            f"{base_config.model_dim}")
    rng = np.random.default_rng(seed)
    if budget >= len(space):
        picked = list(range(len(space)))
    else:
        picked = list(rng.permutation(len(space))[:budget])
    token_vocab = TokenVocab.from_sentences(train)
    label_set = LabelSet.from_sentences(train)
    trials: list[dict] = []
    best_f1, best_config = -1.0, None
    for rank, idx in enumerate(picked):
        opt, layers, heads = space[idx]
        config = replace(base_config, optimizer=opt, layers=layers,
                         heads=heads, epochs=proxy_epochs)
        model, _, _, _ = train_tagger(
            config, train, dev, token_vocab=token_vocab,
            label_set=label_set, pretrained=pretrained,
        )
        metrics = evaluate_tagger(model, dev, token_vocab, label_set,
                                  batch_size=config.batch_size)
        trials.append({
            "trial": rank,
            "optimizer": opt,
            "layers": layers,
            "heads": heads,
            "dev": metrics.to_dict(),
        })
        if metrics.f1 > best_f1:
            best_f1 = metrics.f1
            best_config = replace(config, epochs=base_config.epochs)
        if verbose:
            print(f"trial {rank}: {opt} layers={layers} heads={heads} "
                  f"f1={metrics.f1:.4f}")
    return best_config, trials


def run_protocol(
    config: TransformerTaggerConfig,
    train: Sequence[TaggedSentence],
    dev: Sequence[TaggedSentence],
    test: Sequence[TaggedSentence],
    runs: int = 5,
    seeds: Sequence[int] | None = None,
    pretrained: WordVectorTable | None = None,
    out_path: str | os.PathLike | None = None,
    return_best: bool = False,
    verbose: bool = False,
):
    """Repeat training `runs` times with distinct seeds and aggregate.

    A failed run is recorded and the remaining runs continue; the report
    carries partial=True in that case. Means are over completed runs.
    With return_best, also returns the highest-dev-F1 run's artifacts as
    a (model, token_vocab, label_set, seed) tuple, or None if all failed.
    """
    require_positive(runs, "runs")
    if seeds is None:
        seeds = [config.seed + i for i in range(runs)]
    require(len(seeds) == runs, f"need {runs} seeds, got {len(seeds)}")
    require(len(set(seeds)) == runs, "seeds must be distinct")

    results: list[dict] = []
    errors: list[dict] = []
    best = None
    best_f1 = -1.0
    for run_idx, seed in enumerate(seeds):
        run_config = replace(config, seed=int(seed))
        try:
            model, dev_losses, token_vocab, label_set = train_tagger(
                run_config, train, dev, pretrained=pretrained, verbose=verbose
            )
            dev_metrics = evaluate_tagger(model, dev, token_vocab, label_set,
                                          batch_size=config.batch_size)
            test_metrics = evaluate_tagger(model, test, token_vocab, label_set,
                                           batch_size=config.batch_size)
            results.append({
                "run": run_idx,
                "seed": int(seed),
                "dev_losses": dev_losses,
                "dev": dev_metrics.to_dict(),
                "test": test_metrics.to_dict(),
            })
            if return_best and dev_metrics.f1 > best_f1:
                best_f1 = dev_metrics.f1
                best = (model, token_vocab, label_set, int(seed))
        except (DivergenceError, InsufficientDataError) as exc:
            errors.append({"run": run_idx, "seed": int(seed), "error": str(exc)})
            warnings.warn(f"run {run_idx} failed: {exc}")

    def mean_of(split: str) -> dict | None:
        if not results:
            return None
        keys = results[0][split].keys()
        return {k: float(np.mean([r[split][k] for r in results])) for k in keys}

    report = {
        "config": config.to_dict(),
        "runs": results,
        "mean": {"dev": mean_of("dev"), "test": mean_of("test")},
        "partial": bool(errors),
        "errors": errors,
    }
    if out_path is not None:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    if return_best:
        return report, best
    return report


def save_checkpoint(
    path: str | os.PathLike,
    model,
    config: TransformerTaggerConfig,
    token_vocab: TokenVocab,
    label_set: LabelSet,
    split_seed: int | None = None,
):
    torch.save(
        {
            "state_dict": model.state_dict(),
            "config": config.to_dict(),
            "token_words": token_vocab.words[2:],  # pad and unk re-added on load
            "labels": label_set.labels,
            "split_seed": split_seed,
        },
        path,
    )


def load_checkpoint(path: str | os.PathLike):
    """Returns (model, config, token_vocab, label_set, split_seed)."""
    from .model import TokenTagger, build_embedding_layer

    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = TransformerTaggerConfig(**payload["config"])
    token_vocab = TokenVocab(payload["token_words"])
    label_set = LabelSet(payload["labels"])
    embedding = build_embedding_layer(token_vocab, config.model_dim,
                                      seed=config.seed)
    model = TokenTagger(
        embedding,
        n_labels=len(label_set),
        layers=config.layers,
        heads=config.heads,
        ff_dim=config.ff_dim,
        dropout=config.dropout,
        max_len=config.max_len,
        scale_embeddings=config.scale_embeddings,
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, config, token_vocab, label_set, payload.get("split_seed")
