"""Sequence labelling on top of the trained embeddings: data ingestion,
a self-attention token tagger, in-repo optimizers, and the training,
search, and repeated-run protocols.

Importing this subpackage pulls in torch; the top-level package does not.
"""

from .data import (
    IGNORE_LABEL_ID,
    OUTSIDE_TAG,
    PAD_TOKEN,
    UNK_TOKEN,
    LabelSet,
    TaggedSentence,
    TokenVocab,
    load_conll,
    load_gmb_csv,
    make_batches,
    split_dataset,
)
from .model import (
    EncoderLayer,
    MultiHeadSelfAttention,
    TokenTagger,
    build_embedding_layer,
    sinusoidal_positions,
)
from .optim import Adam, Optimizer, RMSProp, make_optimizer
from .tagger import TransformerTagger
from .training import (
    Metrics,
    TransformerTaggerConfig,
    evaluate_tagger,
    hyperparam_search,
    load_checkpoint,
    micro_scores,
    run_protocol,
    save_checkpoint,
    search_space,
    train_tagger,
)

__all__ = [
    "IGNORE_LABEL_ID",
    "OUTSIDE_TAG",
    "PAD_TOKEN",
    "UNK_TOKEN",
    "LabelSet",
    "TaggedSentence",
    "TokenVocab",
    "load_conll",
    "load_gmb_csv",
    "make_batches",
    "split_dataset",
    "EncoderLayer",
    "MultiHeadSelfAttention",
    "TokenTagger",
    "build_embedding_layer",
    "sinusoidal_positions",
    "Adam",
    "Optimizer",
    "RMSProp",
    "make_optimizer",
    "TransformerTagger",
    "Metrics",
    "TransformerTaggerConfig",
    "evaluate_tagger",
    "hyperparam_search",
    "load_checkpoint",
    "micro_scores",
    "run_protocol",
    "save_checkpoint",
    "search_space",
    "train_tagger",
]
