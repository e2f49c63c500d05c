"""Pretrained masked-LM wrapper: pooled review vectors, per-word states.

The encoder tokenizes into subword pieces; the engine consumes one row
per word. Piece rows are therefore mean-pooled back to the word that
produced them and the boundary markers ([CLS]/[SEP]) are dropped, so a
record's n equals the engine tokenizer's token count for the same text.

Word sequences whose piece count exceeds the encoder's position budget
are run in several windows split at word boundaries; the pooled review
vector then comes from the first window, the rows from all of them.
"""

import sys
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .corpus import read_reviews, read_schema, split_words
from .interchange import EmbeddingWriter

DEFAULT_MAX_LEN = 100     # word cap per review, matching the engine
BATCH_REVIEWS = 16
ASPECT_RECORD_PREFIX = "aspect::"


def load_encoder(model_path):
    """Tokenizer and model from a local directory or installed model name.

    The model is put in eval mode; the tokenizer must be a fast one
    (piece-to-word alignment uses its word_ids API).
    """
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_path)
        model = AutoModel.from_pretrained(model_path)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot load encoder {model_path!r}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise ValueError(f"encoder {model_path!r} has no fast tokenizer; "
                         "piece-to-word alignment needs one")
    if tokenizer.cls_token_id is None or tokenizer.sep_token_id is None:
        raise ValueError(f"encoder {model_path!r} lacks [CLS]/[SEP] markers")
    if getattr(model.config, "hidden_size", None) is None:
        raise ValueError(f"encoder {model_path!r} does not expose a hidden size")
    model.eval()
    return tokenizer, model


def _word_pieces(tokenizer, words: list[str]) -> tuple[list[int], list[int]]:
    """Piece ids and the index of the word each piece came from.

    Normalization can erase a word outright (stripped marks, exotic
    codepoints); such words get the unknown piece so every word keeps at
    least one row and alignment with the engine tokenizer survives.
    """
    enc = tokenizer(words, is_split_into_words=True, add_special_tokens=False)
    ids, word_of = enc["input_ids"], enc.word_ids()
    if len(set(word_of)) == len(words):
        return ids, word_of
    unk = tokenizer.unk_token_id
    if unk is None:
        raise ValueError("tokenizer erased a word and has no unknown piece")
    ids, word_of = [], []
    for w, word in enumerate(words):
        enc_w = tokenizer([word], is_split_into_words=True, add_special_tokens=False)
        piece_ids = enc_w["input_ids"] or [unk]
        ids.extend(piece_ids)
        word_of.extend([w] * len(piece_ids))
    return ids, word_of


def _windows(ids: list[int], word_of: list[int], limit: int):
    """Split a piece sequence at word boundaries into runs of <= limit.

    A single word longer than the whole budget is cut mid-word; its rows
    land in consecutive windows and the pooling step reunites them.
    """
    if limit < 1:
        raise ValueError("encoder position budget too small for any content")
    runs = []
    start = 0
    while start < len(ids):
        stop = min(start + limit, len(ids))
        if stop < len(ids):
            back = stop
            while back > start and word_of[back] == word_of[back - 1]:
                back -= 1
            if back > start:
                stop = back
        runs.append((ids[start:stop], word_of[start:stop]))
        start = stop
    return runs


def encode_words(batch: list[list[str]], tokenizer, model):
    """Pooled vector and per-word rows for each word sequence in batch.

    Returns (Z, Hs): Z float32 of shape (len(batch), d_w), Hs a list of
    float32 arrays of shape (n_i, d_w) with n_i == len(batch[i]). All
    sequences must be non-empty. One forward pass serves the whole batch;
    windows of the same sequence are adjacent rows.
    """
    if any(not words for words in batch):
        raise ValueError("cannot encode an empty word sequence")
    limit = int(getattr(model.config, "max_position_embeddings", 512)) - 2
    cls_id, sep_id = tokenizer.cls_token_id, tokenizer.sep_token_id
    pad_id = tokenizer.pad_token_id or 0

    runs = []                 # (sample index, piece ids, word indices)
    for i, words in enumerate(batch):
        ids, word_of = _word_pieces(tokenizer, words)
        for run_ids, run_words in _windows(ids, word_of, limit):
            runs.append((i, run_ids, run_words))

    longest = max(len(ids) for _, ids, _ in runs) + 2
    input_ids = torch.full((len(runs), longest), pad_id, dtype=torch.long)
    mask = torch.zeros((len(runs), longest), dtype=torch.long)
    for r, (_, ids, _) in enumerate(runs):
        row = [cls_id] + ids + [sep_id]
        input_ids[r, :len(row)] = torch.tensor(row, dtype=torch.long)
        mask[r, :len(row)] = 1
    with torch.inference_mode():
        out = model(input_ids=input_ids, attention_mask=mask)
    hidden = out.last_hidden_state.numpy().astype(np.float32, copy=False)
    pooled = getattr(out, "pooler_output", None)
    if pooled is not None:
        pooled = pooled.numpy().astype(np.float32, copy=False)

    d_w = hidden.shape[2]
    Z = np.zeros((len(batch), d_w), dtype=np.float32)
    Hs: list[np.ndarray] = [None] * len(batch)
    rows: list[list] = [[] for _ in batch]      # content rows per sample
    words_of: list[list[int]] = [[] for _ in batch]
    first_run = {}
    for r, (i, ids, run_words) in enumerate(runs):
        first_run.setdefault(i, r)
        rows[i].append(hidden[r, 1:1 + len(ids)])   # drop [CLS]; [SEP] and pad lie beyond
        words_of[i].extend(run_words)
    for i, words in enumerate(batch):
        R = np.concatenate(rows[i], axis=0)
        w = np.asarray(words_of[i])
        H = np.stack([R[w == k].mean(axis=0) for k in range(len(words))])
        Hs[i] = H.astype(np.float32, copy=False)
        if pooled is not None:
            Z[i] = pooled[first_run[i]]
        else:
            Z[i] = R.mean(axis=0)               # headless encoders: mean over content rows
    return Z, Hs


@dataclass
class ExportReport:
    n_written: int
    n_skipped: int
    n_aspects: int
    d_w: int


def export_embeddings(corpus_path, model_path, out_path,
                      max_len: int = DEFAULT_MAX_LEN, schema_path=None,
                      batch_reviews: int = BATCH_REVIEWS, log=None) -> ExportReport:
    """Embed every review in a corpus file into the interchange format.

    Records are written in corpus order. A review whose text yields no
    words is skipped with a warning on log (stderr by default). With a
    schema, one "aspect::<name>" record per aspect follows the reviews:
    the seed keywords read as one sentence, one row per seed word, for
    the engine's seed-initialized aspect matrix.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if batch_reviews < 1:
        raise ValueError("batch_reviews must be >= 1")
    log = log if log is not None else sys.stderr
    reviews = read_reviews(corpus_path)
    aspects = read_schema(schema_path) if schema_path is not None else []
    tokenizer, model = load_encoder(model_path)
    d_w = int(model.config.hidden_size)

    n_skipped = 0
    pending: list[tuple[str, list[str]]] = []
    with EmbeddingWriter(out_path, d_w) as writer:
        def flush():
            if not pending:
                return
            Z, Hs = encode_words([w for _, w in pending], tokenizer, model)
            for i, (rid, _) in enumerate(pending):
                writer.add(rid, Z[i], Hs[i])
            pending.clear()

        for rid, text in reviews:
            words = split_words(text)[:max_len]
            if not words:
                print(f"warning: review {rid!r} has no content tokens; skipped",
                      file=log)
                n_skipped += 1
                continue
            pending.append((rid, words))
            if len(pending) == batch_reviews:
                flush()
        flush()

        for name, seeds in aspects:
            words = split_words(" ".join(seeds))[:max_len]
            if not words:
                raise ValueError(f"aspect {name!r} has no encodable seed words")
            pending.append((ASPECT_RECORD_PREFIX + name, words))
        flush()

    return ExportReport(n_written=len(reviews) - n_skipped, n_skipped=n_skipped,
                        n_aspects=len(aspects), d_w=d_w)
