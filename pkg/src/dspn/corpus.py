"""Corpus ingestion, tokenization, label mapping, subsampling, and statistics.

Corpus files are UTF-8 JSON lines, one review per line:
    {"id": "...", "text": "...", "stars": 4,
     "aspects": [{"name": "food", "polarity": "positive"}, ...],
     "pseudo_label": "negative"}
stars, aspects, and pseudo_label are optional.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

POLARITIES = ("negative", "neutral", "positive")  # fixed class order; one-hot order everywhere
POLARITY_INDEX = {name: i for i, name in enumerate(POLARITIES)}
POLARITY_SCORE = {"negative": -1.0, "neutral": 0.0, "positive": 1.0}

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"
UNK_ID = 0
PAD_ID = 1

DEFAULT_MAX_LEN = 100
DEFAULT_MIN_COUNT = 2


def polarity_onehot(polarity: str) -> np.ndarray:
    vec = np.zeros(3)
    vec[POLARITY_INDEX[polarity]] = 1.0
    return vec


def tokenize(text: str) -> list[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace.

    Keeps alphanumeric characters of any script, so pre-segmented Chinese
    text passes through unchanged.
    """
    cleaned = "".join(c if c.isalnum() else " " for c in text.lower())
    return cleaned.split()


class Vocabulary:
    """token -> id map with UNK=0 and PAD=1 reserved."""

    def __init__(self, tokens: list[str], min_count: int = DEFAULT_MIN_COUNT):
        self.id_to_token = [UNK_TOKEN, PAD_TOKEN] + list(tokens)
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        self.min_count = min_count

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def fingerprint(self) -> str:
        payload = "\n".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    @classmethod
    def build(cls, token_seqs, min_count: int = DEFAULT_MIN_COUNT) -> "Vocabulary":
        """Count tokens over all sequences, keep those seen >= min_count.

        Kept tokens are ordered by (-count, token) so construction is
        deterministic regardless of input dict/file ordering quirks.
        """
        counts = Counter()
        for seq in token_seqs:
            counts.update(seq)
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        return cls(kept, min_count=min_count)


@dataclass
class Review:
    id: str
    tokens: list[int]
    stars: int | None = None
    gold_aspects: dict[str, str] | None = None  # aspect name -> polarity
    pseudo_label: str | None = None


@dataclass
class Corpus:
    reviews: list[Review]
    vocab: Vocabulary

    def __len__(self) -> int:
        return len(self.reviews)

    def by_id(self, review_id: str) -> Review:
        for r in self.reviews:
            if r.id == review_id:
                return r
        raise ValueError(f"no review with id {review_id!r}")


def _parse_record(obj, lineno: int) -> tuple[str, str, int | None, dict | None, str | None]:
    if not isinstance(obj, dict):
        raise ValueError(f"record is not an object at line {lineno}")
    rid = obj.get("id")
    text = obj.get("text")
    if not isinstance(rid, str) or not rid:
        raise ValueError(f"missing or invalid id at line {lineno}")
    if not isinstance(text, str):
        raise ValueError(f"missing or invalid text at line {lineno}")
    stars = obj.get("stars")
    if stars is not None:
        if isinstance(stars, bool) or not isinstance(stars, int):
            raise ValueError(f"stars must be an integer at line {lineno}")
        if not 1 <= stars <= 5:
            raise ValueError(f"stars out of range at line {lineno}")
    aspects = obj.get("aspects")
    gold = None
    if aspects is not None:
        if not isinstance(aspects, list):
            raise ValueError(f"aspects must be an array at line {lineno}")
        gold = {}
        for item in aspects:
            if not isinstance(item, dict) or "name" not in item or "polarity" not in item:
                raise ValueError(f"malformed aspect entry at line {lineno}")
            name, pol = item["name"], item["polarity"]
            if pol not in POLARITIES:
                raise ValueError(f"unknown polarity {pol!r} at line {lineno}")
            if name in gold:
                raise ValueError(f"duplicate aspect {name!r} at line {lineno}")
            gold[name] = pol
    pseudo = obj.get("pseudo_label")
    if pseudo is not None and pseudo not in POLARITIES:
        raise ValueError(f"unknown polarity {pseudo!r} at line {lineno}")
    return rid, text, stars, gold, pseudo


def load_corpus(path, vocab="build", max_len: int = DEFAULT_MAX_LEN,
                min_count: int = DEFAULT_MIN_COUNT) -> Corpus:
    """Read a JSON-lines corpus file. vocab is an existing Vocabulary or "build".

    Reviews come back in file order; unknown tokens map to UNK; token
    sequences are truncated to max_len.
    """
    parsed = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"malformed record at line {lineno}: {exc.msg}") from exc
            rid, text, stars, gold, pseudo = _parse_record(obj, lineno)
            if rid in seen_ids:
                raise ValueError(f"duplicate review id {rid!r} at line {lineno}")
            seen_ids.add(rid)
            words = tokenize(text)[:max_len]
            if not words:
                raise ValueError(f"no tokens after filtering at line {lineno}")
            parsed.append((rid, words, stars, gold, pseudo))
    if vocab == "build":
        vocab = Vocabulary.build((words for _, words, *_ in parsed), min_count=min_count)
    reviews = [Review(rid, vocab.encode(words), stars, gold, pseudo)
               for rid, words, stars, gold, pseudo in parsed]
    return Corpus(reviews, vocab)


def save_corpus(corpus: Corpus, path) -> None:
    """Write a corpus back to JSON lines.

    Token ids are rendered through the vocabulary; UNK positions are written
    as the literal "<unk>" so a reload with the same vocabulary reproduces
    the ids (unless the corpus legitimately contains the token "unk").
    """
    with open(path, "w", encoding="utf-8") as fh:
        for r in corpus.reviews:
            obj = {"id": r.id, "text": " ".join(corpus.vocab.decode(r.tokens))}
            if r.stars is not None:
                obj["stars"] = r.stars
            if r.gold_aspects is not None:
                obj["aspects"] = [{"name": n, "polarity": p} for n, p in r.gold_aspects.items()]
            if r.pseudo_label is not None:
                obj["pseudo_label"] = r.pseudo_label
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def map_star_to_polarity(stars: int) -> str:
    """1-2 -> negative, 3 -> neutral, 4-5 -> positive."""
    if isinstance(stars, bool) or not isinstance(stars, int) or not 1 <= stars <= 5:
        raise ValueError(f"stars out of range: {stars!r}")
    if stars <= 2:
        return "negative"
    if stars == 3:
        return "neutral"
    return "positive"


def derive_review_label(gold_aspects) -> str:
    """Aggregate aspect polarities into a review label.

    Scores {-1, 0, +1} are averaged; the mean must strictly exceed +1/3
    (resp. fall below -1/3) to leave the neutral dead-zone.
    """
    if hasattr(gold_aspects, "items"):
        pairs = list(gold_aspects.items())
    else:
        pairs = list(gold_aspects)
    if not pairs:
        raise ValueError("cannot derive a label from an empty annotation set")
    mean = sum(POLARITY_SCORE[p] for _, p in pairs) / len(pairs)
    if mean > 1.0 / 3.0:
        return "positive"
    if mean < -1.0 / 3.0:
        return "negative"
    return "neutral"


def review_label(review: Review, label_source: str) -> str:
    """Resolve the review-level training label under the configured source."""
    if label_source == "stars":
        if review.stars is None:
            raise ValueError(f"review {review.id!r} has no star rating")
        return map_star_to_polarity(review.stars)
    if label_source == "pseudo":
        if review.pseudo_label is None:
            raise ValueError(f"review {review.id!r} has no pseudo label")
        return review.pseudo_label
    if label_source == "derived_from_aspects":
        if not review.gold_aspects:
            raise ValueError(f"review {review.id!r} has no aspect annotations")
        return derive_review_label(review.gold_aspects)
    raise ValueError(f"unknown label_source {label_source!r}")


@dataclass
class CorpusStats:
    split: str
    n_reviews: int
    overall: dict[str, int] = field(default_factory=dict)      # polarity/unlabeled -> reviews
    aspect_sent: dict[str, int] = field(default_factory=dict)  # polarity/absent -> cells
    ma: float = 0.0
    mas: float = 0.0


def corpus_stats(corpus: Corpus, n_aspects: int | None = None, split: str = "all") -> CorpusStats:
    """MA/MAS and label-count summary over one corpus (one split).

    MA = fraction of reviews with >= 2 annotated aspects; MAS additionally
    requires >= 2 distinct polarities among the annotated (non-absent)
    aspects. The absent count is measured against n_aspects when given,
    otherwise against the set of aspect names observed in the corpus.
    """
    n = len(corpus.reviews)
    if n == 0:
        raise ValueError("empty corpus")
    annotated = [r for r in corpus.reviews if r.gold_aspects]
    if not annotated:
        raise ValueError("no aspect annotations in corpus")
    names = set()
    for r in annotated:
        names.update(r.gold_aspects)
    total_aspects = n_aspects if n_aspects is not None else len(names)

    overall = {p: 0 for p in POLARITIES}
    overall["unlabeled"] = 0
    for r in corpus.reviews:
        if r.stars is None:
            overall["unlabeled"] += 1
        else:
            overall[map_star_to_polarity(r.stars)] += 1

    aspect_sent = {p: 0 for p in POLARITIES}
    labels = 0
    multi = 0
    multi_sent = 0
    for r in corpus.reviews:
        gold = r.gold_aspects or {}
        for pol in gold.values():
            aspect_sent[pol] += 1
        labels += len(gold)
        if len(gold) >= 2:
            multi += 1
            if len(set(gold.values())) >= 2:
                multi_sent += 1
    aspect_sent["absent"] = n * total_aspects - labels
    return CorpusStats(split=split, n_reviews=n, overall=overall,
                       aspect_sent=aspect_sent, ma=multi / n, mas=multi_sent / n)


def budget_subsample(corpus: Corpus, label_budget: int, seed: int) -> Corpus:
    """Keep a uniform random subset of gold aspect labels, drop the rest.

    Review texts and star/pseudo labels are untouched; only aspect
    annotations are thinned. Deterministic given seed.
    """
    cells = []
    for idx, r in enumerate(corpus.reviews):
        for name in (r.gold_aspects or {}):
            cells.append((idx, name))
    if label_budget < 0 or label_budget > len(cells):
        raise ValueError(f"label budget {label_budget} exceeds available labels ({len(cells)})")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(cells), size=label_budget, replace=False) if cells else []
    keep = {cells[int(i)] for i in chosen}
    reviews = []
    for idx, r in enumerate(corpus.reviews):
        gold = None
        if r.gold_aspects:
            kept = {n: p for n, p in r.gold_aspects.items() if (idx, n) in keep}
            gold = kept if kept else None
        reviews.append(Review(r.id, list(r.tokens), r.stars, gold, r.pseudo_label))
    return Corpus(reviews, corpus.vocab)


@dataclass
class AspectSchema:
    names: list[str]
    seeds: dict[str, list[str]]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("aspect names must be unique")
        if len(self.names) < 2:
            raise ValueError("schema needs at least 2 aspects")
        for name in self.names:
            if not self.seeds.get(name):
                raise ValueError(f"aspect {name!r} has no seed keywords")

    @property
    def n(self) -> int:
        return len(self.names)

    def fingerprint(self) -> str:
        payload = json.dumps(
            [{"name": n, "seeds": self.seeds[n]} for n in self.names],
            sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def to_obj(self) -> dict:
        return {"aspects": [{"name": n, "seeds": list(self.seeds[n])} for n in self.names]}

    @classmethod
    def from_obj(cls, obj) -> "AspectSchema":
        if not isinstance(obj, dict) or not isinstance(obj.get("aspects"), list):
            raise ValueError("schema must be an object with an 'aspects' array")
        names, seeds = [], {}
        for item in obj["aspects"]:
            if not isinstance(item, dict) or "name" not in item or "seeds" not in item:
                raise ValueError("each schema aspect needs 'name' and 'seeds'")
            names.append(item["name"])
            seeds[item["name"]] = list(item["seeds"])
        return cls(names, seeds)


def load_schema(path) -> AspectSchema:
    with open(path, encoding="utf-8") as fh:
        return AspectSchema.from_obj(json.load(fh))


def save_schema(schema: AspectSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_obj(), fh, indent=2, sort_keys=True)
        fh.write("\n")
