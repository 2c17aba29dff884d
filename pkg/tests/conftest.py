import numpy as np
import pytest

from embkit.corpus import build_vocab
from embkit.embeddings import ModelConfig
from embkit.trainer import train


def synthetic_lines(seed: int = 0, n_words: int = 40, n_sentences: int = 400):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(n_words)]
    return [
        " ".join(rng.choice(words, size=rng.integers(4, 10)))
        for _ in range(n_sentences)
    ]


@pytest.fixture(scope="session")
def corpus_lines():
    return synthetic_lines()


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory, corpus_lines):
    path = tmp_path_factory.mktemp("corpus") / "corpus.txt"
    path.write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def small_vocab(corpus_lines):
    return build_vocab(
        (tok for line in corpus_lines for tok in line.split()), min_count=1
    )


@pytest.fixture(scope="session")
def small_model(corpus_lines, small_vocab):
    """A small trained subword model shared by read-only tests."""
    config = ModelConfig(dim=16, epochs=2, buckets=4000)
    return train(corpus_lines, small_vocab, config, seed=7)
