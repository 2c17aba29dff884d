"""Shared test data builders: a synthetic corpus with planted analogy
structure, and analogy test sets with prescribed section counts."""

from __future__ import annotations

import numpy as np

from embkit.intrinsic import SWEDISH_SECTION_COUNTS

# Real per-section sizes of the widely used English analogy set; the
# validator tests build synthetic sets with exactly these shapes.
GOOGLE_SECTION_COUNTS = {
    "capital-common-countries": 506,
    "capital-world": 4524,
    "currency": 866,
    "city-in-state": 2467,
    "family": 506,
    "gram1-adjective-to-adverb": 992,
    "gram2-opposite": 812,
    "gram3-comparative": 1332,
    "gram4-superlative": 1122,
    "gram5-present-participle": 1056,
    "gram6-nationality-adjective": 1599,
    "gram7-past-tense": 1560,
    "gram8-plural": 1332,
    "gram9-plural-verbs": 870,
}


def synthetic_analogy_lines(section_counts: dict[str, int]) -> list[str]:
    """An analogy file with exactly the requested question count per section."""
    lines = []
    for name, count in section_counts.items():
        lines.append(f": {name}")
        lines.extend(f"q{i}a q{i}b q{i}c q{i}d" for i in range(count))
    return lines


def swedish_shaped_lines() -> list[str]:
    return synthetic_analogy_lines(SWEDISH_SECTION_COUNTS)


def google_shaped_lines() -> list[str]:
    return synthetic_analogy_lines(GOOGLE_SECTION_COUNTS)


def planted_corpus(
    seed: int = 101,
    n_pairs: int = 20,
    n_fillers: int = 160,
    target_tokens: int = 200_000,
    rel_share: float = 0.7,
    cls_share: float = 0.25,
):
    """Corpus where capital/country word pairs co-occur inside shared
    templates, so the pair offset becomes a recoverable direction.

    Returns (lines, capitals, countries). Words are random 4-5 letter
    strings; ~70% of sentences state a pair relation through shared glue
    words, ~25% give each class its own context words, the rest is filler.
    """
    rng = np.random.default_rng(seed)
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    seen: set[str] = set()

    def word() -> str:
        while True:
            w = "".join(rng.choice(letters, size=int(rng.integers(4, 6))))
            if w not in seen:
                seen.add(w)
                return w

    capitals = [word() for _ in range(n_pairs)]
    countries = [word() for _ in range(n_pairs)]
    glue = [word() for _ in range(4)]
    cap_ctx = [word() for _ in range(4)]
    cou_ctx = [word() for _ in range(4)]
    fillers = [word() for _ in range(n_fillers)]

    lines: list[str] = []
    tokens = 0
    while tokens < target_tokens:
        r = rng.random()
        if r < rel_share:
            i = int(rng.integers(n_pairs))
            s = [str(rng.choice(glue)), capitals[i], countries[i],
                 str(rng.choice(glue))]
        elif r < rel_share + cls_share / 2:
            i = int(rng.integers(n_pairs))
            s = [str(rng.choice(cap_ctx)), capitals[i], str(rng.choice(cap_ctx))]
        elif r < rel_share + cls_share:
            i = int(rng.integers(n_pairs))
            s = [str(rng.choice(cou_ctx)), countries[i], str(rng.choice(cou_ctx))]
        else:
            s = [str(w) for w in rng.choice(fillers, size=8)]
        lines.append(" ".join(s))
        tokens += len(s)
    return lines, capitals, countries


def planted_questions(capitals, countries):
    return [
        (capitals[a], countries[a], capitals[b], countries[b])
        for a in range(len(capitals))
        for b in range(len(capitals))
        if a != b
    ]


def brute_force_analogy(table, test_set, restrict_vocab, case_fold):
    """Independent per-question 3CosAdd scan used as the evaluation oracle."""
    words = table.words[:restrict_vocab]
    fold = (lambda w: w.lower()) if case_fold else (lambda w: w)
    index = {}
    for i, w in enumerate(words):
        f = fold(w)
        if f not in index:
            index[f] = i
    mat = table.vectors[: len(words)].astype(np.float64)
    norms = np.linalg.norm(mat, axis=1)
    norms[norms == 0] = 1.0
    unit = mat / norms[:, None]
    outcomes = {}
    for name, (a, b, c, d) in test_set.questions():
        a, b, c, d = fold(a), fold(b), fold(c), fold(d)
        if any(w not in index for w in (a, b, c, d)):
            outcomes.setdefault(name, []).append("skip")
            continue
        query = unit[index[b]] - unit[index[a]] + unit[index[c]]
        best, best_score = -1, -np.inf
        for i in range(len(words)):
            if i in (index[a], index[b], index[c]):
                continue
            s = float(unit[i] @ query)
            if s > best_score:
                best, best_score = i, s
        outcomes.setdefault(name, []).append(
            "correct" if best == index[d] else "wrong"
        )
    return outcomes
