"""Word and subword embedding toolkit: training, intrinsic evaluation,
a Transformer sequence tagger for extrinsic evaluation, and bootstrap
significance testing.

Importing the package pulls in no deep-learning dependencies; the tagger
subpackage (`embkit.ner`) imports torch lazily on first use.
"""

__version__ = "0.1.0"

from .corpus import (
    HuffmanCoding,
    NegativeTable,
    SubsampleParams,
    Vocabulary,
    build_huffman,
    build_negative_table,
    build_vocab,
    keep_probability,
    preprocess,
    tokenize,
)
from .embeddings import (
    EmbeddingModel,
    ModelConfig,
    SubwordIndex,
    WordVectorTable,
    cosine,
    extract_ngrams,
    load_binary,
    load_text,
    ngram_hash,
    save_binary,
    save_text,
)
from .errors import (
    ConfigError,
    DecodeError,
    EmbkitError,
    EmptyVocabularyError,
    InsufficientDataError,
    InsufficientVocabularyError,
    NoRepresentationError,
    OOVError,
    ParseError,
    TableTooSmallError,
    ZeroVectorError,
)
from .intrinsic import (
    AnalogyReport,
    AnalogyTestSet,
    SectionResult,
    ValidationReport,
    WordPairReport,
    WordPairSet,
    average_ranks,
    eval_analogy,
    eval_wordpairs,
    parse_analogy,
    parse_wordpairs,
    pearson,
    section_category,
    solve_analogy,
    spearman,
    summarize_totals,
    validate_swedish,
)
from .stats import (
    BootstrapResult,
    bootstrap_ci_diff,
    load_metric_values,
    percentile,
    read_metric_file,
    values_from_runs,
)
from .trainer import (
    EmbeddingVectorizer,
    LcgRandom,
    TrainState,
    compose_hidden,
    draw_negatives,
    hs_log_probability,
    hs_loss,
    hs_update,
    lr_schedule,
    make_contexts,
    ns_loss,
    ns_update,
    train,
)

__all__ = [
    "__version__",
    "HuffmanCoding", "NegativeTable", "SubsampleParams", "Vocabulary",
    "build_huffman", "build_negative_table", "build_vocab",
    "keep_probability", "preprocess", "tokenize",
    "EmbeddingModel", "ModelConfig", "SubwordIndex", "WordVectorTable",
    "cosine", "extract_ngrams", "load_binary", "load_text", "ngram_hash",
    "save_binary", "save_text",
    "ConfigError", "DecodeError", "EmbkitError", "EmptyVocabularyError",
    "InsufficientDataError", "InsufficientVocabularyError",
    "NoRepresentationError", "OOVError", "ParseError", "TableTooSmallError",
    "ZeroVectorError",
    "EmbeddingVectorizer", "LcgRandom", "TrainState", "compose_hidden",
    "draw_negatives", "hs_log_probability", "hs_loss", "hs_update",
    "lr_schedule", "make_contexts", "ns_loss", "ns_update", "train",
    "AnalogyReport", "AnalogyTestSet", "SectionResult", "ValidationReport",
    "WordPairReport", "WordPairSet", "average_ranks", "eval_analogy",
    "eval_wordpairs", "parse_analogy", "parse_wordpairs", "pearson",
    "section_category", "solve_analogy", "spearman", "summarize_totals",
    "validate_swedish",
    "BootstrapResult", "bootstrap_ci_diff", "load_metric_values",
    "percentile", "read_metric_file", "values_from_runs",
]
