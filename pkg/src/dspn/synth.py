"""Synthetic review generator: the oracle corpus for acceptance testing.

Each review mentions K aspects; every mentioned aspect contributes its
keywords plus sentiment words matching its sampled polarity, and the star
label is derived from the importance-weighted aspect polarities. A model
that truly aggregates word -> aspect -> review sentiment can recover the
aspect structure from the star labels alone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import POLARITIES, POLARITY_SCORE, AspectSchema, Corpus, Review, Vocabulary


@dataclass
class GenConfig:
    aspects: dict[str, list[str]]      # aspect name -> disjoint keyword pool
    positive_words: list[str]
    neutral_words: list[str]
    negative_words: list[str]
    filler_words: list[str] = field(default_factory=list)
    size: int = 1000
    multi_aspect_prob: float = 0.5
    max_aspects: int = 2               # K per multi-aspect review drawn from [2, max_aspects]
    min_len: int = 8
    max_len: int = 18
    content_fraction: float = 0.75     # rest of each review is filler
    score_margin: float = 0.1          # keep scores away from the rating band edges

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if not 0.0 <= self.multi_aspect_prob <= 1.0:
            raise ValueError("multi_aspect_prob must lie in [0, 1]")
        if not 0.0 < self.content_fraction <= 1.0:
            raise ValueError("content_fraction must lie in (0, 1]")
        if not 0.0 <= self.score_margin < 1.0 / 3.0:
            raise ValueError("score_margin must lie in [0, 1/3)")
        if self.max_aspects < 2:
            raise ValueError("max_aspects must be >= 2")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("bad review length range")
        seen = {}
        for name, pool in self.aspects.items():
            if not pool:
                raise ValueError(f"aspect {name!r} has an empty keyword pool")
            for kw in pool:
                if kw in seen:
                    raise ValueError(
                        f"overlapping aspect keyword sets: {kw!r} in {seen[kw]!r} and {name!r}")
                seen[kw] = name
        for label, pool in (("positive", self.positive_words),
                            ("neutral", self.neutral_words),
                            ("negative", self.negative_words)):
            if not pool:
                raise ValueError(f"empty {label} lexicon")

    def lexicon(self, polarity: str) -> list[str]:
        return {"positive": self.positive_words,
                "neutral": self.neutral_words,
                "negative": self.negative_words}[polarity]

    def word_pool(self) -> list[str]:
        """All generator words, deduplicated, in a fixed order."""
        out, seen = [], set()
        for name in self.aspects:
            for w in self.aspects[name]:
                if w not in seen:
                    seen.add(w)
                    out.append(w)
        for pool in (self.positive_words, self.neutral_words, self.negative_words,
                     self.filler_words):
            for w in pool:
                if w not in seen:
                    seen.add(w)
                    out.append(w)
        return out

    def schema(self) -> AspectSchema:
        return AspectSchema(list(self.aspects), {n: list(p) for n, p in self.aspects.items()})

    def to_obj(self) -> dict:
        return {
            "aspects": {n: list(p) for n, p in self.aspects.items()},
            "positive_words": list(self.positive_words),
            "neutral_words": list(self.neutral_words),
            "negative_words": list(self.negative_words),
            "filler_words": list(self.filler_words),
            "size": self.size,
            "multi_aspect_prob": self.multi_aspect_prob,
            "max_aspects": self.max_aspects,
            "min_len": self.min_len,
            "max_len": self.max_len,
            "content_fraction": self.content_fraction,
            "score_margin": self.score_margin,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "GenConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown generator config keys: {sorted(unknown)}")
        return cls(**obj)


def load_gen_config(path) -> GenConfig:
    with open(path, encoding="utf-8") as fh:
        return GenConfig.from_obj(json.load(fh))


def _stars_for_score(score: float) -> int:
    if score > 1.0 / 3.0:
        return 5 if score >= 2.0 / 3.0 else 4
    if score < -1.0 / 3.0:
        return 1 if score <= -2.0 / 3.0 else 2
    return 3


def synth_corpus(cfg: GenConfig, seed: int) -> Corpus:
    """Generate a corpus with gold aspect labels and derived star labels.

    Each aspect draws its sentiment words from its own slice of the polarity
    lexicon (slice k of N for aspect k, when the lexicon is large enough).
    Real reviews bind sentiment vocabulary to aspects the same way (dishes
    are "bland", staff is "rude"); without that binding a bag-of-words
    encoder has no signal to attribute sentiment in multi-aspect reviews.

    Stars are scored from the sentiment words actually emitted, not from the
    latent mixture weights, so the rating is a function of the token bag the
    way a reviewer's stars reflect what they wrote. Draws whose score lands
    within score_margin of a rating band edge (+-1/3) are redrawn: at these
    word counts such reviews are rating coin flips.
    """
    rng = np.random.default_rng(seed)
    vocab = Vocabulary(cfg.word_pool(), min_count=1)
    names = list(cfg.aspects)
    n_aspects = len(names)
    reviews = []
    for i in range(cfg.size):
        for _ in range(32):
            multi = n_aspects >= 2 and rng.random() < cfg.multi_aspect_prob
            k = int(rng.integers(2, min(cfg.max_aspects, n_aspects) + 1)) if multi else 1
            picked = [names[j] for j in rng.choice(n_aspects, size=k, replace=False)]
            polarities = [POLARITIES[j] for j in rng.integers(0, 3, size=k)]
            weights = rng.uniform(0.5, 1.5, size=k)
            weights = weights / weights.sum()

            length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
            content = max(2 * k, int(round(cfg.content_fraction * length)))
            words: list[str] = []
            signed = 0.0
            n_sent_total = 0
            for name, pol, w in zip(picked, polarities, weights):
                c = max(2, int(round(w * content)))
                n_sent = max(1, c // 2)
                n_kw = c - n_sent
                pool = cfg.aspects[name]
                lex = cfg.lexicon(pol)
                per_aspect = len(lex) // n_aspects
                if per_aspect:
                    a = names.index(name)
                    lex = lex[a * per_aspect:(a + 1) * per_aspect]
                words += [pool[j] for j in rng.integers(0, len(pool), size=n_kw)]
                words += [lex[j] for j in rng.integers(0, len(lex), size=n_sent)]
                signed += n_sent * POLARITY_SCORE[pol]
                n_sent_total += n_sent
            score = signed / n_sent_total
            if min(abs(score - 1.0 / 3.0), abs(score + 1.0 / 3.0)) >= cfg.score_margin:
                break
        n_fill = max(0, length - len(words))
        if n_fill and cfg.filler_words:
            words += [cfg.filler_words[j]
                      for j in rng.integers(0, len(cfg.filler_words), size=n_fill)]
        order = rng.permutation(len(words))
        words = [words[j] for j in order]

        reviews.append(Review(
            id=f"synth-{i:05d}",
            tokens=vocab.encode(words),
            stars=_stars_for_score(score),
            gold_aspects=dict(zip(picked, polarities)),
        ))
    return Corpus(reviews, vocab)


def default_gen_config(size: int = 1000, multi_aspect_prob: float = 0.5) -> GenConfig:
    """Five restaurant-flavored aspects; 198 distinct words, vocab 200 with specials."""
    return GenConfig(
        aspects={
            "food": ["food", "pasta", "pizza", "steak", "dessert", "menu", "soup", "salad"],
            "service": ["service", "waiter", "staff", "host", "manager", "server",
                        "reception", "bartender"],
            "price": ["price", "bill", "cost", "charge", "value", "fee", "budget", "tab"],
            "ambience": ["ambience", "decor", "music", "lighting", "seating", "patio",
                         "interior", "vibe"],
            "location": ["location", "parking", "street", "neighborhood", "downtown",
                         "corner", "block", "district"],
        },
        positive_words=[
            "great", "delicious", "friendly", "excellent", "amazing", "wonderful", "perfect",
            "lovely", "fantastic", "fresh", "attentive", "cozy", "charming", "superb", "tasty",
            "prompt", "generous", "clean", "warm", "brilliant", "delightful", "crisp",
            "helpful", "outstanding", "smooth"],
        negative_words=[
            "terrible", "rude", "bland", "awful", "horrible", "slow", "dirty", "overpriced",
            "stale", "noisy", "cramped", "cold", "greasy", "disappointing", "burnt", "soggy",
            "expensive", "unfriendly", "broken", "dull", "chaotic", "sloppy", "tasteless",
            "harsh", "miserable"],
        neutral_words=[
            "okay", "average", "standard", "typical", "ordinary", "acceptable", "fine",
            "moderate", "fair", "usual", "plain", "regular", "routine", "expected", "common",
            "middling", "unremarkable", "passable", "adequate", "normal", "basic", "simple",
            "reasonable", "conventional", "indifferent"],
        filler_words=[
            "the", "a", "an", "and", "or", "but", "we", "i", "they", "it", "was", "were",
            "is", "are", "had", "have", "this", "that", "with", "for", "from", "very",
            "quite", "really", "just", "here", "there", "again", "visit", "place", "time",
            "night", "evening", "lunch", "dinner", "table", "went", "came", "ordered",
            "tried", "got", "felt", "seemed", "looked", "overall", "definitely", "maybe",
            "perhaps", "today", "yesterday", "weekend", "friends", "family", "group",
            "party", "birthday", "date", "stop", "trip", "experience", "moment", "while",
            "after", "before", "during", "around", "nearby", "inside", "outside", "though",
            "although", "however", "still", "then", "also", "too", "some", "any", "few",
            "most", "more", "less", "enough"],
        size=size,
        multi_aspect_prob=multi_aspect_prob,
    )
