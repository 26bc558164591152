"""Prompt decomposition into paragraph / phrase / word levels.

Phrases come from a small rule-based chunker over a six-tag POS set
(DET, ADJ, NOUN, VERB, ADP, OTHER). Tagging is a lexicon lookup so the
whole path is hermetic; swap in any callable ``tokens -> tags``.
"""
import re
from dataclasses import dataclass

import torch

from .errors import MisalignedTags, NoLevels

TAGS = ("DET", "ADJ", "NOUN", "VERB", "ADP", "OTHER")
LEVELS = ("paragraph", "phrase", "word")

_WORD_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")


def tokenize_words(text):
    """Lowercased alphanumeric words; punctuation and whitespace separate."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class PromptText:
    text: str
    word_tokens: tuple
    char_count: int

    @classmethod
    def from_text(cls, text):
        return cls(text, tuple(tokenize_words(text)), len(text))


@dataclass(frozen=True)
class PhraseSpan:
    start: int
    end: int
    label: str  # "NP" or "VP"


# Closed-class words plus vocabulary common in video-generation prompts.
_DEFAULT_LEXICON = {
    **dict.fromkeys("a an the this that these those its his her their our my your some every each".split(), "DET"),
    **dict.fromkeys(
        "in on at over under above below across through into onto along around behind beside between "
        "near with without from to of by toward towards beneath against among during past".split(),
        "ADP",
    ),
    **dict.fromkeys(
        "red blue green yellow white black golden silver small large tall tiny huge old young bright dark "
        "icy snowy sunny foggy misty calm busy quiet slow fast gentle soft warm cold wooden ancient modern "
        "vast dense lush colorful vibrant dramatic cinematic serene majestic wide distant rocky sandy".split(),
        "ADJ",
    ),
    **dict.fromkeys(
        "walks walk runs run flies fly swims swim jumps jump dances dance rides ride moves move sits sit "
        "stands stand looks look turns turn falls fall rises rise flows flow drifts drift glides glide "
        "sways sway plays play holds hold carries carry crosses cross climbs climb waves wave "
        "is are walking running flying swimming dancing riding moving sitting standing flowing "
        "drifting gliding playing holding".split(),
        "VERB",
    ),
    **dict.fromkeys(
        "man woman person child girl boy dog cat bird fox horse fish car street city river lake ocean sea "
        "sky sun moon cloud clouds tree trees forest mountain mountains field grass snow rain water beach "
        "road bridge building house window light lights camera shot scene background foreground sunset "
        "sunrise night day wind leaves flowers flower stone rock waves boat train crowd hair dress face "
        "hand hands eyes volcano aurora desert village market".split(),
        "NOUN",
    ),
}


class LexiconTagger:
    """Token -> tag lookup; unknown tokens are tagged OTHER."""

    def __init__(self, lexicon=None):
        self.lexicon = dict(_DEFAULT_LEXICON if lexicon is None else lexicon)
        bad = {t for t in self.lexicon.values() if t not in TAGS}
        if bad:
            raise ValueError(f"unknown tags in lexicon: {sorted(bad)}")

    @classmethod
    def from_file(cls, path, extend_default=False):
        lex = dict(_DEFAULT_LEXICON) if extend_default else {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                token, _, tag = line.partition("\t")
                lex[token.strip().lower()] = tag.strip().upper()
        return cls(lex)

    def __call__(self, tokens):
        return [self.lexicon.get(t, "OTHER") for t in tokens]


def chunk_phrases(tokens, pos_tags):
    """Left-greedy shallow chunking.

    Noun phrase: ``DET? ADJ* NOUN+`` (maximal). Verb phrase: ``VERB ADP?``.
    Returned spans are disjoint and sorted by start.
    """
    if len(tokens) != len(pos_tags):
        raise MisalignedTags(f"{len(tokens)} tokens but {len(pos_tags)} tags")
    n, i, spans = len(pos_tags), 0, []
    while i < n:
        j = i
        if j < n and pos_tags[j] == "DET":
            j += 1
        while j < n and pos_tags[j] == "ADJ":
            j += 1
        k = j
        while k < n and pos_tags[k] == "NOUN":
            k += 1
        if k > j:
            spans.append(PhraseSpan(i, k, "NP"))
            i = k
            continue
        if pos_tags[i] == "VERB":
            end = i + 2 if i + 1 < n and pos_tags[i + 1] == "ADP" else i + 1
            spans.append(PhraseSpan(i, end, "VP"))
            i = end
            continue
        i += 1
    return spans


def pool_phrase_embeddings(word_embeddings, spans):
    """Mean of word embeddings inside each span, one row per span.

    An empty span list gives a ``(0, D)`` matrix.
    """
    emb = torch.as_tensor(word_embeddings)
    n = emb.shape[0]
    for s in spans:
        if not 0 <= s.start < s.end <= n:
            raise ValueError(f"span ({s.start}, {s.end}) outside [0, {n})")
    if not spans:
        return emb.new_zeros((0, emb.shape[1]))
    return torch.stack([emb[s.start:s.end].mean(dim=0) for s in spans])


@dataclass(frozen=True)
class GranularityBundle:
    paragraph: torch.Tensor = None
    phrase: torch.Tensor = None
    word: torch.Tensor = None
    levels_present: tuple = ()
    phrase_from_words: bool = False  # phrase level fell back to word level

    def vectors(self):
        return [getattr(self, lvl) for lvl in self.levels_present]


def build_bundle(f_enc, word_embeddings, spans, levels=LEVELS):
    levels = tuple(lvl for lvl in LEVELS if lvl in set(levels))
    if not levels:
        raise NoLevels("at least one granularity level is required")
    words = torch.as_tensor(word_embeddings)
    out = {}
    if "paragraph" in levels:
        out["paragraph"] = torch.as_tensor(f_enc)
    needs_words = "word" in levels or ("phrase" in levels and not spans)
    if needs_words and words.shape[0] < 1:
        raise NoLevels("word level needs at least one word embedding")
    if "word" in levels or needs_words:
        word_vec = words.mean(dim=0)
    if "word" in levels:
        out["word"] = word_vec
    fallback = False
    if "phrase" in levels:
        if spans:
            out["phrase"] = pool_phrase_embeddings(words, spans).mean(dim=0)
        else:
            out["phrase"] = word_vec
            fallback = True
    return GranularityBundle(levels_present=levels, phrase_from_words=fallback, **out)
