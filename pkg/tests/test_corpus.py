import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from embkit.corpus import (
    HuffmanCoding,
    SubsampleParams,
    Vocabulary,
    build_huffman,
    build_negative_table,
    build_vocab,
    decode_utf8_chunks,
    keep_probabilities,
    keep_probability,
    preprocess,
    tokenize,
)
from embkit.errors import (
    DecodeError,
    EmptyVocabularyError,
    InsufficientVocabularyError,
    TableTooSmallError,
)


class TestTokenize:
    def test_strips_punctuation(self):
        assert tokenize("Mosul.") == ["mosul"]

    def test_keeps_digits_and_nonascii(self):
        assert tokenize("år 2019") == ["år", "2019"]

    def test_apostrophe_splits(self):
        assert tokenize("don't") == ["don", "t"]

    def test_underscore_is_a_separator(self):
        assert tokenize("a_b") == ["a", "b"]

    def test_empty(self):
        assert tokenize("") == []
        assert tokenize("...!?") == []

    def test_lowercases(self):
        assert tokenize("Stockholm OCH Göteborg") == ["stockholm", "och", "göteborg"]

    @given(st.text(max_size=200))
    def test_idempotent_over_own_output(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


class TestPreprocess:
    def test_str_is_raw_text(self):
        assert list(preprocess("Hello, World!")) == ["hello", "world"]

    def test_bytes(self):
        assert list(preprocess("år 2019!".encode())) == ["år", "2019"]

    def test_path(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("One two,\nthree.", encoding="utf-8")
        assert list(preprocess(p)) == ["one", "two", "three"]

    def test_file_object(self):
        fh = io.BytesIO("alpha beta\ngamma".encode())
        assert list(preprocess(fh)) == ["alpha", "beta", "gamma"]

    def test_token_spanning_chunk_boundary(self):
        assert list(preprocess([b"hel", b"lo world"])) == ["hello", "world"]

    def test_multibyte_split_across_chunks(self):
        data = "ok år".encode()
        # split in the middle of the two-byte å
        chunks = [data[:4], data[4:]]
        assert list(preprocess(chunks)) == ["ok", "år"]

    def test_decode_error_offset(self):
        with pytest.raises(DecodeError) as exc:
            list(preprocess([b"ok ", b"\xff fin"]))
        assert exc.value.offset == 3

    def test_decode_error_truncated_tail(self):
        # lone continuation start at the very end of the stream
        with pytest.raises(DecodeError):
            list(preprocess([b"ab \xc3"]))

    def test_decode_offset_counts_all_chunks(self):
        chunks = [b"abcd ", b"efgh ", b"\x80"]
        with pytest.raises(DecodeError) as exc:
            list(preprocess(chunks))
        assert exc.value.offset == 10


class TestDecodeChunks:
    def test_reassembles(self):
        text = "ett två tre åäö"
        data = text.encode()
        pieces = [data[i : i + 3] for i in range(0, len(data), 3)]
        assert "".join(decode_utf8_chunks(pieces)) == text


class TestBuildVocab:
    def test_orders_by_count_then_surface(self):
        tokens = list("aaaa" "bb" "c" "d")
        v = build_vocab(tokens, min_count=1)
        assert v.words == ["a", "b", "c", "d"]
        assert list(v.counts) == [4, 2, 1, 1]

    def test_min_count_filters(self):
        v = build_vocab(["x"] * 5 + ["y"] * 4, min_count=5)
        assert v.words == ["x"]

    def test_empty_raises(self):
        with pytest.raises(EmptyVocabularyError):
            build_vocab(["rare"], min_count=2)

    def test_id_lookup_and_frequency(self):
        v = build_vocab(list("aaab"), min_count=1)
        assert v.id_of["a"] == 0
        assert "b" in v
        assert v.total_tokens == 4
        assert v.frequency("a") == pytest.approx(0.75)

    def test_tsv_round_trip(self, tmp_path):
        v = build_vocab(list("aaaa" "bb" "cc"), min_count=1)
        p = tmp_path / "vocab.tsv"
        v.save_tsv(p)
        back = Vocabulary.load_tsv(p)
        assert back.words == v.words
        assert list(back.counts) == list(v.counts)


class TestHuffman:
    def vocab(self, counts: dict[str, int]) -> Vocabulary:
        tokens = [w for w, c in counts.items() for _ in range(c)]
        return build_vocab(tokens, min_count=1)

    def test_known_code_lengths(self):
        coding = build_huffman(self.vocab({"a": 4, "b": 2, "c": 1, "d": 1}))
        assert [coding.code_length(i) for i in range(4)] == [1, 2, 3, 3]

    def test_two_words(self):
        coding = build_huffman(self.vocab({"a": 3, "b": 1}))
        assert [coding.code_length(i) for i in range(2)] == [1, 1]
        assert {int(coding.codes[0][0]), int(coding.codes[1][0])} == {0, 1}

    def test_too_small(self):
        with pytest.raises(InsufficientVocabularyError):
            build_huffman(self.vocab({"only": 3}))

    def test_node_count_and_path_range(self):
        coding = build_huffman(self.vocab({"a": 5, "b": 3, "c": 2, "d": 1, "e": 1}))
        # node_count is the number of internal nodes, which sizes the
        # hierarchical-softmax output matrix
        assert coding.node_count == 5 - 1
        root = 5 - 2  # internal ids 0..V-2, root is the last created
        for path in coding.paths:
            assert path[0] == root
            assert all(0 <= n <= root for n in path)

    @staticmethod
    def assert_prefix_free_and_kraft(coding: HuffmanCoding):
        codes = ["".join(str(b) for b in c) for c in coding.codes]
        assert len(set(codes)) == len(codes)
        for i, a in enumerate(codes):
            for j, b in enumerate(codes):
                if i != j:
                    assert not b.startswith(a)
        assert sum(Fraction(1, 2 ** len(c)) for c in codes) == 1

    def test_prefix_free_and_kraft_random(self):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(2, 40))
            counts = {f"w{i}": int(rng.integers(1, 1000)) for i in range(n)}
            self.assert_prefix_free_and_kraft(build_huffman(self.vocab(counts)))

    def test_lengths_sorted_against_counts(self):
        # more frequent words never get longer codes
        coding = build_huffman(self.vocab({"a": 40, "b": 20, "c": 10, "d": 5, "e": 1}))
        lengths = [coding.code_length(i) for i in range(5)]
        assert lengths == sorted(lengths)


class TestNegativeTable:
    def test_power_smoothed_proportions(self):
        v = build_vocab(["a"] * 16 + ["b"], min_count=1)
        size = 90_000
        table = build_negative_table(v, power=0.75, size=size)
        frac_a = np.mean(table.slots == 0)
        # 16^0.75 = 8, so a should hold 8/9 of the slots
        assert abs(frac_a - 8 / 9) <= 1.5 / size * 9

    def test_every_word_gets_a_slot(self):
        v = build_vocab(["a"] * 1000 + ["b"] * 3 + ["c"] * 2, min_count=1)
        table = build_negative_table(v, size=10_000)
        assert set(np.unique(table.slots)) == {0, 1, 2}

    def test_too_small(self):
        v = build_vocab(list("ab" * 3), min_count=1)
        with pytest.raises(TableTooSmallError):
            build_negative_table(v, size=1)

    def test_slots_in_range_and_monotone(self):
        v = build_vocab(["x"] * 9 + ["y"] * 3 + ["z"], min_count=1)
        table = build_negative_table(v, size=1000)
        assert table.slots.min() == 0
        assert table.slots.max() == 2
        assert (np.diff(table.slots) >= 0).all()


class TestSubsampling:
    def test_hand_values(self):
        p = SubsampleParams(threshold=1e-4)
        assert keep_probability(4e-4, p) == pytest.approx(0.75)
        assert keep_probability(1e-2, p) == pytest.approx(0.11)

    def test_clip_at_threshold(self):
        p = SubsampleParams(threshold=1e-4)
        # raw value at f = t is 2, clipped to 1
        assert keep_probability(1e-4, p) == 1.0
        assert keep_probability(1e-5, p) == 1.0

    def test_monotone_decreasing_beyond_threshold(self):
        p = SubsampleParams(threshold=1e-3)
        freqs = np.geomspace(1e-3, 0.5, 50)
        probs = [keep_probability(f, p) for f in freqs]
        assert all(x <= 1.0 for x in probs)
        assert all(a >= b for a, b in zip(probs, probs[1:]))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            SubsampleParams(0.0)
        with pytest.raises(ValueError):
            SubsampleParams(1.0)

    def test_disabled_threshold_keeps_all(self):
        v = build_vocab(["a"] * 50 + ["b"], min_count=1)
        assert (keep_probabilities(v, 0.0) == 1.0).all()
        assert (keep_probabilities(v, 1.0) == 1.0).all()

    def test_vector_matches_scalar(self):
        v = build_vocab(["a"] * 50 + ["b"] * 2, min_count=1)
        probs = keep_probabilities(v, 0.05)
        expected = [
            keep_probability(c / v.total_tokens, SubsampleParams(0.05))
            for c in v.counts
        ]
        assert probs == pytest.approx(expected)
