import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corelite import CoreliteError
from corelite.corpus import (
    EmbeddingMatrix,
    tokenize_text,
    load_embeddings,
    load_scores,
    load_text_corpus,
    load_token_corpus,
    save_embeddings,
)


class TestTokenize:
    def test_empty(self):
        assert tokenize_text("") == []

    def test_case_folding_and_punctuation(self):
        assert tokenize_text("The cat, the CAT.") == ["the", "cat", "the", "cat"]

    def test_mixed_alphanumeric(self):
        assert tokenize_text("GPT-4o scores 92.0") == ["gpt", "4o", "scores", "92", "0"]

    def test_underscore_splits(self):
        assert tokenize_text("foo_bar") == ["foo", "bar"]

    @given(st.text(max_size=200))
    def test_idempotent_on_joined_output(self, text):
        tokens = tokenize_text(text)
        assert tokenize_text(" ".join(tokens)) == tokens


class TestTextCorpus:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("")
        assert load_text_corpus(p) == []

    def test_order_preserved(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(
            '{"id": "a", "text": "hello"}\n{"id": "b", "text": "world"}\n'
        )
        docs = load_text_corpus(p)
        assert [d.id for d in docs] == ["a", "b"]
        assert docs[1].text == "world"

    def test_missing_id_names_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(
            '{"id": "a", "text": "x"}\n{"id": "b", "text": "y"}\n{"text": "z"}\n'
        )
        with pytest.raises(CoreliteError, match="line 3: missing field id"):
            load_text_corpus(p)

    def test_duplicate_id_named(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "a", "text": "x"}\n{"id": "a", "text": "y"}\n')
        with pytest.raises(CoreliteError, match="'a'"):
            load_text_corpus(p)

    def test_load_twice_identical(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "a", "text": "x"}\n{"id": "b", "text": ""}\n')
        assert load_text_corpus(p) == load_text_corpus(p)


class TestTokenCorpus:
    def _write(self, tmp_path, records):
        p = tmp_path / "t.jsonl"
        p.write_text("".join(json.dumps(r) + "\n" for r in records))
        return p

    def test_valid_32(self, tmp_path):
        p = self._write(tmp_path, [{"id": "img1", "tokens": list(range(32))}])
        seqs = load_token_corpus(p)
        assert len(seqs) == 1
        assert seqs[0].tokens == tuple(range(32))

    def test_wrong_length_names_id(self, tmp_path):
        p = self._write(tmp_path, [{"id": "img7", "tokens": list(range(31))}])
        with pytest.raises(CoreliteError, match="id=img7: length 31, expected 32"):
            load_token_corpus(p)

    def test_empty_file(self, tmp_path):
        p = self._write(tmp_path, [])
        assert load_token_corpus(p) == []

    def test_negative_token_rejected(self, tmp_path):
        p = self._write(tmp_path, [{"id": "x", "tokens": [-1] + list(range(31))}])
        with pytest.raises(CoreliteError, match="out of range"):
            load_token_corpus(p)


class TestEmbeddings:
    def test_zero_rows(self, tmp_path):
        m = EmbeddingMatrix((), np.zeros((0, 4), dtype=np.float32))
        save_embeddings(m, tmp_path / "e.bin", tmp_path / "e.ids")
        loaded = load_embeddings(tmp_path / "e.bin", tmp_path / "e.ids")
        assert loaded.n == 0 and loaded.d == 4

    def test_2x3_payload(self, tmp_path):
        data = np.arange(6, dtype=np.float32).reshape(2, 3)
        save_embeddings(
            EmbeddingMatrix(("a", "b"), data), tmp_path / "e.bin", tmp_path / "e.ids"
        )
        loaded = load_embeddings(tmp_path / "e.bin", tmp_path / "e.ids")
        assert loaded.data.shape == (2, 3)
        np.testing.assert_array_equal(loaded.data, data)

    def test_nan_reports_row(self, tmp_path):
        data = np.zeros((7, 2), dtype=np.float32)
        data[5, 1] = np.nan
        with pytest.raises(CoreliteError, match="row 5: non-finite value"):
            EmbeddingMatrix(tuple(f"r{i}" for i in range(7)), data)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "e.bin"
        p.write_bytes(b"XXXX" + b"\x00" * 8)
        (tmp_path / "e.ids").write_text("")
        with pytest.raises(CoreliteError, match="bad magic"):
            load_embeddings(p, tmp_path / "e.ids")

    def test_truncated_payload(self, tmp_path):
        data = np.zeros((2, 3), dtype=np.float32)
        save_embeddings(
            EmbeddingMatrix(("a", "b"), data), tmp_path / "e.bin", tmp_path / "e.ids"
        )
        raw = (tmp_path / "e.bin").read_bytes()
        (tmp_path / "e.bin").write_bytes(raw[:-4])
        with pytest.raises(CoreliteError, match="payload"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "e.ids")

    def test_id_count_mismatch(self, tmp_path):
        data = np.zeros((2, 3), dtype=np.float32)
        save_embeddings(
            EmbeddingMatrix(("a", "b"), data), tmp_path / "e.bin", tmp_path / "e.ids"
        )
        (tmp_path / "e.ids").write_text("a\n")
        with pytest.raises(CoreliteError, match="1 ids for 2 rows"):
            load_embeddings(tmp_path / "e.bin", tmp_path / "e.ids")

    @given(
        st.integers(min_value=1, max_value=8),
        st.integers(min_value=1, max_value=6),
        st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_roundtrip_bit_identical(self, tmp_path_factory, n, d, bits):
        rng = np.random.default_rng(bits)
        data = rng.standard_normal((n, d)).astype(np.float32)
        ids = tuple(f"id{i}" for i in range(n))
        tmp = tmp_path_factory.mktemp("emb")
        save_embeddings(EmbeddingMatrix(ids, data), tmp / "e.bin", tmp / "e.ids")
        loaded = load_embeddings(tmp / "e.bin", tmp / "e.ids")
        assert loaded.ids == ids
        assert loaded.data.tobytes() == data.tobytes()


class TestScores:
    def test_header_only(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("model,dataset,score\n")
        assert load_scores(p).entries == {}

    def test_two_rows(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("model,dataset,score\nm1,ai2d,66.6\nm1,mme,1841.8\n")
        table = load_scores(p)
        assert table.entries == {("m1", "ai2d"): 66.6, ("m1", "mme"): 1841.8}

    def test_duplicate_pair(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("model,dataset,score\nm1,ai2d,66.6\nm1,ai2d,50.0\n")
        with pytest.raises(CoreliteError, match="duplicate"):
            load_scores(p)

    def test_unparseable_score(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("model,dataset,score\nm1,ai2d,high\n")
        with pytest.raises(CoreliteError, match="unparseable score"):
            load_scores(p)

    def test_counts_column(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("model,dataset,score,count\nm1,ai2d,66.6,3088\n")
        table = load_scores(p)
        assert table.counts[("m1", "ai2d")] == 3088
