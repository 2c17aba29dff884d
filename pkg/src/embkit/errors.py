"""Exception types shared across the toolkit."""


class EmbkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(EmbkitError, ValueError):
    """Invalid or contradictory configuration."""


class DecodeError(EmbkitError, ValueError):
    """Input text is not valid UTF-8.

    Carries the absolute byte offset of the offending byte.
    """

    def __init__(self, offset, message=None):
        self.offset = offset
        super().__init__(message or f"invalid UTF-8 at byte offset {offset}")


class EmptyVocabularyError(EmbkitError, ValueError):
    """No tokens survived vocabulary construction."""


class InsufficientVocabularyError(EmbkitError, ValueError):
    """Vocabulary too small for the requested structure (e.g. Huffman tree)."""


class TableTooSmallError(EmbkitError, ValueError):
    """Negative-sampling table smaller than the vocabulary."""


class OOVError(EmbkitError, KeyError):
    """Word has no vocabulary entry and cannot be represented."""


class NoRepresentationError(EmbkitError, ValueError):
    """Out-of-vocabulary word yields no character n-grams to compose from."""


class ZeroVectorError(EmbkitError, ValueError):
    """Cosine similarity is undefined for a zero vector."""


class ParseError(EmbkitError, ValueError):
    """Malformed line in an input file.

    Carries the 1-based line number.
    """

    def __init__(self, line_no, message):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class InsufficientDataError(EmbkitError, ValueError):
    """Too few usable data points for the requested statistic."""


class DivergenceError(EmbkitError, RuntimeError):
    """Training produced a non-finite loss."""
