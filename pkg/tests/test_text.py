import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from crave import text
from crave.errors import MisalignedTags, NoLevels
from crave.text import PhraseSpan


def test_tokenize():
    assert text.tokenize_words("A red fox.") == ["a", "red", "fox"]
    assert text.tokenize_words("") == []


def test_tokenize_roundtrip_random_ascii():
    rng = np.random.default_rng(0)
    alphabet = [chr(c) for c in range(32, 127)]
    for _ in range(100):
        s = "".join(rng.choice(alphabet, rng.integers(0, 80)))
        toks = text.tokenize_words(s)
        assert text.tokenize_words(" ".join(toks)) == toks


def test_chunk_examples():
    assert text.chunk_phrases(["the", "icy", "river"], ["DET", "ADJ", "NOUN"]) == [PhraseSpan(0, 3, "NP")]
    assert text.chunk_phrases(["fox"], ["NOUN"]) == [PhraseSpan(0, 1, "NP")]
    assert text.chunk_phrases(["runs", "over"], ["VERB", "ADP"]) == [PhraseSpan(0, 2, "VP")]


def test_chunk_sentence():
    toks = text.tokenize_words("a red fox runs across the snowy field")
    spans = text.chunk_phrases(toks, text.LexiconTagger()(toks))
    assert spans == [PhraseSpan(0, 3, "NP"), PhraseSpan(3, 5, "VP"), PhraseSpan(5, 8, "NP")]


def test_chunk_misaligned():
    with pytest.raises(MisalignedTags):
        text.chunk_phrases(["a", "b"], ["DET"])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.sampled_from(text.TAGS), max_size=30))
def test_spans_disjoint_sorted(tags):
    spans = text.chunk_phrases(list(range(len(tags))), tags)
    for s in spans:
        assert 0 <= s.start < s.end <= len(tags)
    for a, b in zip(spans, spans[1:]):
        assert a.end <= b.start


def test_lexicon_file(tmp_path):
    p = tmp_path / "lex.tsv"
    p.write_text("zebra\tNOUN\ngallops\tverb\n")
    tagger = text.LexiconTagger.from_file(p)
    assert tagger(["zebra", "gallops", "the"]) == ["NOUN", "VERB", "OTHER"]


def test_pool_identity_and_symmetry():
    emb = torch.randn(4, 3, dtype=torch.float64)
    out = text.pool_phrase_embeddings(emb, [PhraseSpan(2, 3, "NP")])
    assert torch.equal(out[0], emb[2])
    v = torch.randn(3, dtype=torch.float64)
    out = text.pool_phrase_embeddings(torch.stack([v, -v]), [PhraseSpan(0, 2, "NP")])
    assert torch.count_nonzero(out) == 0


def test_pool_mean_oracle():
    rng = np.random.default_rng(1)
    emb = rng.normal(size=(5, 4))
    out = text.pool_phrase_embeddings(torch.as_tensor(emb), [PhraseSpan(1, 4, "NP")]).numpy()
    want = [(emb[1, d] + emb[2, d] + emb[3, d]) / 3 for d in range(4)]
    np.testing.assert_allclose(out[0], want, atol=1e-12)


def test_pool_empty_and_permutation():
    emb = torch.randn(6, 3, dtype=torch.float64)
    assert text.pool_phrase_embeddings(emb, []).shape == (0, 3)
    spans = [PhraseSpan(0, 2, "NP"), PhraseSpan(2, 3, "VP"), PhraseSpan(3, 6, "NP")]
    out = text.pool_phrase_embeddings(emb, spans)
    perm = [2, 0, 1]
    out_p = text.pool_phrase_embeddings(emb, [spans[i] for i in perm])
    assert torch.allclose(out_p, out[perm])


def test_bundle_single_word():
    e = torch.randn(1, 5, dtype=torch.float64)
    f_enc = torch.randn(5, dtype=torch.float64)
    b = text.build_bundle(f_enc, e, [PhraseSpan(0, 1, "NP")])
    assert torch.equal(b.paragraph, f_enc)
    assert torch.equal(b.word, e[0]) and torch.equal(b.phrase, e[0])


def test_bundle_phrase_fallback():
    e = torch.randn(3, 5, dtype=torch.float64)
    b = text.build_bundle(torch.randn(5, dtype=torch.float64), e, [])
    assert b.phrase_from_words and "phrase" in b.levels_present
    assert torch.equal(b.phrase, b.word)


def test_bundle_composition_oracle_and_span_order():
    rng = np.random.default_rng(2)
    e = rng.normal(size=(7, 4))
    f_enc = rng.normal(size=4)
    spans = [PhraseSpan(0, 2, "NP"), PhraseSpan(3, 4, "VP"), PhraseSpan(4, 7, "NP")]
    b = text.build_bundle(torch.as_tensor(f_enc), torch.as_tensor(e), spans)
    phrase_rows = [e[s.start:s.end].sum(0) / (s.end - s.start) for s in spans]
    np.testing.assert_allclose(b.phrase.numpy(), sum(phrase_rows) / 3, atol=1e-12)
    np.testing.assert_allclose(b.word.numpy(), e.sum(0) / 7, atol=1e-12)
    b2 = text.build_bundle(torch.as_tensor(f_enc), torch.as_tensor(e), spans[::-1])
    assert torch.allclose(b.phrase, b2.phrase, atol=1e-15)


def test_bundle_levels():
    e = torch.randn(3, 4, dtype=torch.float64)
    with pytest.raises(NoLevels):
        text.build_bundle(torch.randn(4), e, [], levels=())
    b = text.build_bundle(torch.randn(4), e, [], levels=("word",))
    assert b.levels_present == ("word",) and b.paragraph is None


def test_levels_distinct_in_general_position():
    rng = np.random.default_rng(3)
    toks = text.tokenize_words("a young girl dances in the bright market near the old bridge")
    spans = text.chunk_phrases(toks, text.LexiconTagger()(toks))
    for _ in range(20):
        e = torch.as_tensor(rng.normal(size=(len(toks), 8)))
        b = text.build_bundle(torch.as_tensor(rng.normal(size=8)), e, spans)
        vecs = b.vectors()
        for i in range(3):
            for j in range(i + 1, 3):
                cos = torch.dot(vecs[i], vecs[j]) / (vecs[i].norm() * vecs[j].norm())
                assert cos < 1 - 1e-6
