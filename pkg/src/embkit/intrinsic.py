"""Intrinsic evaluation: analogy-set parsing and schema validation,
3CosAdd analogy scoring, and word-pair similarity correlations."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingModel, WordVectorTable, _unit_rows
from .errors import (
    InsufficientDataError,
    NoRepresentationError,
    OOVError,
    ParseError,
    ZeroVectorError,
)
from .validation import require, require_positive

SEMANTIC = "semantic"
SYNTACTIC = "syntactic"


def section_category(name: str) -> str:
    """gram*-prefixed sections are syntactic, the rest semantic."""
    return SYNTACTIC if name.startswith("gram") else SEMANTIC


@dataclass(frozen=True)
class AnalogyTestSet:
    """Ordered sections of 4-word questions (a, b, c, d)."""

    sections: list[tuple[str, list[tuple[str, str, str, str]]]]

    def __post_init__(self):
        names = [name for name, _ in self.sections]
        require(len(names) == len(set(names)), "section names must be unique")
        for name, questions in self.sections:
            for q in questions:
                require(len(q) == 4 and all(q),
                        f"section {name!r}: every question needs 4 non-empty words")

    @property
    def section_counts(self) -> dict[str, int]:
        return {name: len(qs) for name, qs in self.sections}

    def total(self, category: str | None = None) -> int:
        return sum(
            len(qs)
            for name, qs in self.sections
            if category is None or section_category(name) == category
        )

    def questions(self) -> Iterable[tuple[str, tuple[str, str, str, str]]]:
        for name, qs in self.sections:
            for q in qs:
                yield name, q


def parse_analogy(source) -> AnalogyTestSet:
    """Parse the `: section` / 4-words-per-line analogy format.

    `source` is a path or an iterable of lines. Comment-free format: every
    non-header, non-blank line must hold exactly four words.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return parse_analogy(list(fh))
    sections: list[tuple[str, list[tuple[str, str, str, str]]]] = []
    current: list[tuple[str, str, str, str]] | None = None
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith(": "):
            sections.append((line[2:].strip(), []))
            current = sections[-1][1]
            continue
        words = line.split()
        if len(words) != 4:
            raise ParseError(line_no, f"expected 4 words, got {len(words)}")
        if current is None:
            raise ParseError(line_no, "question appears before any ': section' header")
        current.append(tuple(words))
    return AnalogyTestSet(sections)


# Published composition of the Swedish analogy test set, by section.
SWEDISH_SECTION_COUNTS = {
    "capital-common-countries": 342,
    "capital-world": 7832,
    "currency": 42,
    "city-in-state": 1892,
    "family": 272,
    "gram2-opposite": 2652,
    "gram3-comparative": 2162,
    "gram4-superlative": 1980,
    "gram6-nationality-adjective": 12,
    "gram7-past-tense": 1891,
    "gram8-plural": 1560,
}
SWEDISH_SEMANTIC_TOTAL = 10_380
SWEDISH_SYNTACTIC_TOTAL = 10_257
GOOGLE_SEMANTIC_TOTAL = 8_869
GOOGLE_SYNTACTIC_TOTAL = 10_675


@dataclass
class ValidationReport:
    section_counts: dict[str, int]
    semantic_total: int
    syntactic_total: int
    total: int
    discrepancies: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def to_dict(self) -> dict:
        return {
            "section_counts": self.section_counts,
            "semantic_total": self.semantic_total,
            "syntactic_total": self.syntactic_total,
            "total": self.total,
            "discrepancies": self.discrepancies,
            "ok": self.ok,
        }


def summarize_totals(test_set: AnalogyTestSet) -> tuple[int, int, int]:
    """(semantic, syntactic, overall) question counts."""
    sem = test_set.total(SEMANTIC)
    syn = test_set.total(SYNTACTIC)
    return sem, syn, sem + syn


def validate_swedish(test_set: AnalogyTestSet) -> ValidationReport:
    """Check a parsed set against the Swedish set's published composition.

    Mismatches are reported item by item, never raised.
    """
    counts = test_set.section_counts
    sem, syn, total = summarize_totals(test_set)
    report = ValidationReport(counts, sem, syn, total)
    for name, expected in SWEDISH_SECTION_COUNTS.items():
        got = counts.get(name)
        if got is None:
            report.discrepancies.append(f"missing section {name!r} (expected {expected})")
        elif got != expected:
            report.discrepancies.append(
                f"section {name!r}: expected {expected} questions, found {got}"
            )
    for name in counts:
        if name not in SWEDISH_SECTION_COUNTS:
            report.discrepancies.append(f"unexpected section {name!r}")
    checks = [
        ("semantic total", sem, SWEDISH_SEMANTIC_TOTAL),
        ("syntactic total", syn, SWEDISH_SYNTACTIC_TOTAL),
        ("overall total", total, SWEDISH_SEMANTIC_TOTAL + SWEDISH_SYNTACTIC_TOTAL),
    ]
    for label, got, expected in checks:
        if got != expected:
            report.discrepancies.append(f"{label}: expected {expected}, found {got}")
    return report


def _as_table(model_or_table) -> WordVectorTable:
    if isinstance(model_or_table, EmbeddingModel):
        return model_or_table.to_table()
    return model_or_table


def _unit(v: np.ndarray) -> np.ndarray:
    # zero vectors pass through unchanged so a degenerate input word
    # contributes nothing rather than raising
    n = np.linalg.norm(v)
    return v if n == 0.0 else v / n


def solve_analogy(
    model_or_table,
    a: str,
    b: str,
    c: str,
    exclude_inputs: bool = True,
) -> tuple[str, float]:
    """3CosAdd: the vocabulary word nearest to unit(b) - unit(a) + unit(c).

    Returns (word, cosine to the offset vector). Inputs are excluded from
    the candidates when `exclude_inputs` is set. Raises KeyError-family
    OOV errors for unrepresentable inputs; the evaluation harness counts
    those as skipped.
    """
    table = _as_table(model_or_table)
    if isinstance(model_or_table, EmbeddingModel):
        vec = model_or_table.word_vector
    else:
        vec = table.vector
    query = (
        _unit(np.asarray(vec(b), dtype=np.float64))
        - _unit(np.asarray(vec(a), dtype=np.float64))
        + _unit(np.asarray(vec(c), dtype=np.float64))
    )
    qnorm = np.linalg.norm(query)
    if qnorm == 0.0:
        raise ZeroVectorError("analogy offset vector is zero")
    scores = _unit_rows(table.vectors.astype(np.float64)) @ (query / qnorm)
    if exclude_inputs:
        for w in (a, b, c):
            idx = table.id_of.get(w)
            if idx is not None:
                scores[idx] = -np.inf
    best = int(np.argmax(scores))  # first index wins ties
    return table.words[best], float(scores[best])


@dataclass
class SectionResult:
    correct: int = 0
    attempted: int = 0
    skipped: int = 0

    @property
    def accuracy(self) -> float | None:
        if self.attempted == 0:
            return None
        return 100.0 * self.correct / self.attempted


@dataclass
class AnalogyReport:
    sections: dict[str, SectionResult]

    def _aggregate(self, category: str | None = None) -> SectionResult:
        agg = SectionResult()
        for name, r in self.sections.items():
            if category is None or section_category(name) == category:
                agg.correct += r.correct
                agg.attempted += r.attempted
                agg.skipped += r.skipped
        return agg

    @property
    def overall(self) -> SectionResult:
        return self._aggregate()

    @property
    def semantic(self) -> SectionResult:
        return self._aggregate(SEMANTIC)

    @property
    def syntactic(self) -> SectionResult:
        return self._aggregate(SYNTACTIC)

    @property
    def accuracy(self) -> float | None:
        return self.overall.accuracy

    def to_dict(self) -> dict:
        def enc(r: SectionResult) -> dict:
            return {"correct": r.correct, "attempted": r.attempted,
                    "skipped": r.skipped, "accuracy": r.accuracy}

        return {
            "sections": {name: enc(r) for name, r in self.sections.items()},
            "semantic": enc(self.semantic),
            "syntactic": enc(self.syntactic),
            "overall": enc(self.overall),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def format_text(self) -> str:
        lines = [f"{'section':<32} {'acc%':>7} {'correct':>8} {'attempted':>10} {'skipped':>8}"]
        rows = list(self.sections.items()) + [
            ("[semantic]", self.semantic),
            ("[syntactic]", self.syntactic),
            ("[overall]", self.overall),
        ]
        for name, r in rows:
            acc = f"{r.accuracy:.2f}" if r.accuracy is not None else "n/a"
            lines.append(f"{name:<32} {acc:>7} {r.correct:>8} {r.attempted:>10} {r.skipped:>8}")
        return "\n".join(lines)


def eval_analogy(
    model_or_table,
    test_set: AnalogyTestSet,
    restrict_vocab: int = 300_000,
    case_fold: bool = True,
    compose_oov: bool = False,
) -> AnalogyReport:
    """Score a test set with 3CosAdd over the frequency-truncated vocabulary.

    Questions with any word missing from the (case-folded, truncated)
    vocabulary are skipped, not composed, matching the common evaluation
    tool; `compose_oov=True` instead composes missing a/b/c query words
    from subwords when the model supports it (the answer word d must still
    be in vocabulary).
    """
    require_positive(restrict_vocab, "restrict_vocab")
    table = _as_table(model_or_table)
    model = model_or_table if isinstance(model_or_table, EmbeddingModel) else None
    words = table.words[:restrict_vocab]
    vectors = table.vectors[: len(words)].astype(np.float64)
    fold = (lambda w: w.lower()) if case_fold else (lambda w: w)
    # on fold collisions the most frequent (earliest) surface wins
    lookup: dict[str, int] = {}
    for i, w in enumerate(words):
        lookup.setdefault(fold(w), i)
    units = _unit_rows(vectors)

    def query_vector(word: str) -> np.ndarray | None:
        idx = lookup.get(word)
        if idx is not None:
            return units[idx]
        if compose_oov and model is not None and model.config.subword:
            try:
                return _unit(model.word_vector(word).astype(np.float64))
            except (OOVError, NoRepresentationError):
                return None
        return None

    report = AnalogyReport({})
    for name, _qs in test_set.sections:
        report.sections[name] = SectionResult()
    for name, (a, b, c, d) in test_set.questions():
        result = report.sections[name]
        fa, fb, fc, fd = fold(a), fold(b), fold(c), fold(d)
        answer = lookup.get(fd)
        va, vb, vc = query_vector(fa), query_vector(fb), query_vector(fc)
        if answer is None or va is None or vb is None or vc is None:
            result.skipped += 1
            continue
        query = vb - va + vc
        scores = units @ query
        for w in (fa, fb, fc):
            idx = lookup.get(w)
            if idx is not None:
                scores[idx] = -np.inf
        predicted = int(np.argmax(scores))
        result.attempted += 1
        if predicted == answer:
            result.correct += 1
    return report


@dataclass(frozen=True)
class WordPairSet:
    pairs: list[tuple[str, str, float]]

    def __post_init__(self):
        for w1, w2, score in self.pairs:
            require(np.isfinite(score), f"non-finite score for pair ({w1}, {w2})")

    def __len__(self) -> int:
        return len(self.pairs)


def parse_wordpairs(source) -> WordPairSet:
    """Read `word1 <sep> word2 <sep> score` rows; separator (tab, comma, or
    whitespace) is sniffed, and a single header line is tolerated."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return parse_wordpairs(list(fh))
    lines = [ln.rstrip("\n") for ln in source]
    pairs: list[tuple[str, str, float]] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if "\t" in line:
            fields = line.split("\t")
        elif "," in line:
            fields = next(csv.reader(io.StringIO(line)))
        else:
            fields = line.split()
        fields = [f.strip() for f in fields]
        if len(fields) < 3:
            raise ParseError(line_no, f"expected 3 fields, got {len(fields)}")
        try:
            score = float(fields[2])
        except ValueError:
            if line_no == 1 and not pairs:
                continue  # header line
            raise ParseError(line_no, f"bad score value {fields[2]!r}") from None
        pairs.append((fields[0], fields[1], score))
    return WordPairSet(pairs)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Plain linear correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    require(len(x) == len(y), "input lengths differ")
    if len(x) < 2:
        raise InsufficientDataError("need at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if denom == 0.0:
        raise InsufficientDataError("zero variance input")
    return float((dx * dy).sum() / denom)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation: pearson over average ranks."""
    return pearson(average_ranks(x), average_ranks(y))


@dataclass
class WordPairReport:
    pearson: float
    spearman: float
    oov_fraction: float
    used: int
    total: int

    def to_dict(self) -> dict:
        return {
            "pearson": self.pearson, "spearman": self.spearman,
            "oov_fraction": self.oov_fraction,
            "used": self.used, "total": self.total,
        }


def eval_wordpairs(model_or_table, pairs: WordPairSet) -> WordPairReport:
    """Correlate model cosine similarities against human pair scores.

    Pair words are matched case-folded. Pairs with an unrepresentable word
    are skipped and counted into `oov_fraction`.
    """
    model = model_or_table if isinstance(model_or_table, EmbeddingModel) else None
    table = None if model is not None else _as_table(model_or_table)
    model_scores, human_scores = [], []
    skipped = 0
    for w1, w2, human in pairs.pairs:
        try:
            if model is not None:
                v1 = model.word_vector(w1.lower())
                v2 = model.word_vector(w2.lower())
            else:
                v1 = table.vector(w1.lower())
                v2 = table.vector(w2.lower())
            n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
            if n1 == 0.0 or n2 == 0.0:
                skipped += 1
                continue
            score = float(np.dot(v1.astype(np.float64), v2.astype(np.float64)) / (n1 * n2))
        except (OOVError, NoRepresentationError):
            skipped += 1
            continue
        model_scores.append(score)
        human_scores.append(human)
    if len(model_scores) < 2:
        raise InsufficientDataError(
            f"only {len(model_scores)} usable pairs out of {len(pairs)}"
        )
    return WordPairReport(
        pearson=pearson(model_scores, human_scores),
        spearman=spearman(model_scores, human_scores),
        oov_fraction=skipped / len(pairs) if len(pairs) else 0.0,
        used=len(model_scores),
        total=len(pairs),
    )
