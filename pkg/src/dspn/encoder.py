"""Sentence and token encodings feeding both halves of the model.

Two modes. Trainable: a bag-of-embeddings encoder whose table lives in the
ParamSet (H rows are token embeddings, z is their mean, so z stays
differentiable w.r.t. the table). Precomputed: contextual embeddings are
ingested from the binary interchange file and treated as frozen inputs.

Both modules of the model consume the same EncodedReview per review.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .corpus import AspectSchema, Review, Vocabulary
from .gradkernel import ParamSet

EMBED_MAGIC = b"DSPNEMB1"
EMBEDDING_PARAM = "embedding"

# Reserved record-id prefix for aspect seed-sentence embeddings inside a
# precomputed file; review ids must not use it.
ASPECT_RECORD_PREFIX = "aspect::"


@dataclass
class EncoderConfig:
    mode: str = "trainable"   # "trainable" | "precomputed"
    d_w: int = 32             # 768 is the usual precomputed width
    vocab_size: int = 0
    max_len: int = 100

    def __post_init__(self):
        if self.mode not in ("trainable", "precomputed"):
            raise ValueError(f"unknown encoder mode {self.mode!r}")
        if self.d_w < 2:
            raise ValueError("d_w must be >= 2")


@dataclass
class EncodedReview:
    z: np.ndarray   # (d_w,)
    H: np.ndarray   # (n, d_w), row j is token j
    n: int


def init_embeddings(params: ParamSet, vocab_size: int, d_w: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Trainable table, uniform in [-0.1, 0.1] from the run seed."""
    return params.add(EMBEDDING_PARAM, rng.uniform(-0.1, 0.1, size=(vocab_size, d_w)))


def encode(review: Review, source) -> EncodedReview:
    """Encode one review.

    source is either a ParamSet holding the trainable embedding table, or the
    id -> EncodedReview map returned by load_precomputed.
    """
    if isinstance(source, ParamSet):
        table = source[EMBEDDING_PARAM]
        if not review.tokens:
            raise ValueError(f"review {review.id!r} has no tokens")
        ids = np.asarray(review.tokens, dtype=np.intp)
        if ids.min() < 0 or ids.max() >= table.shape[0]:
            raise ValueError(f"token id out of range in review {review.id!r}")
        H = table[ids]                      # fancy indexing copies; callers may not mutate the table through H
        return EncodedReview(z=H.mean(axis=0), H=H, n=len(review.tokens))
    try:
        return source[review.id]
    except KeyError:
        raise ValueError(f"no precomputed embedding for review id {review.id!r}") from None


def init_aspect_matrix(schema: AspectSchema, source, vocab: Vocabulary | None = None) -> np.ndarray:
    """Seed-initialized aspect matrix T, one L2-normalized row per aspect.

    Trainable mode (source is a ParamSet): row k is the mean of the seed
    keywords' embedding rows. Seeds absent from the vocabulary are dropped
    (seed lists are curated per domain, not per corpus sample), but each
    aspect needs at least one known seed.
    Precomputed mode (source is the embedding map): row k is the stored
    seed-sentence embedding under the id "aspect::<name>".
    """
    rows = []
    if isinstance(source, ParamSet):
        if vocab is None:
            raise ValueError("trainable aspect initialization needs the vocabulary")
        table = source[EMBEDDING_PARAM]
        for name in schema.names:
            known = [w for w in schema.seeds[name] if w in vocab]
            if not known:
                raise ValueError(
                    f"no seed keyword of aspect {name!r} is in the vocabulary "
                    f"(tried {schema.seeds[name]})")
            ids = [vocab.token_to_id[w] for w in known]
            rows.append(table[ids].mean(axis=0))
    else:
        for name in schema.names:
            rec = source.get(ASPECT_RECORD_PREFIX + name)
            if rec is None:
                raise ValueError(f"no seed-sentence embedding for aspect {name!r} "
                                 f"(expected record id {ASPECT_RECORD_PREFIX + name!r})")
            rows.append(np.array(rec.z))
    T = np.stack(rows)
    norms = np.linalg.norm(T, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm aspect seed embedding")
    return T / norms[:, None]


def load_precomputed(path, expected_d_w: int | None = None) -> dict[str, EncodedReview]:
    """Read the binary embedding interchange file.

    Layout (little-endian): magic "DSPNEMB1"; u32 d_w; u32 record count;
    per record u32 id length, id bytes (UTF-8), u32 n, f32*d_w z,
    f32*(n*d_w) H row-major. Trailing bytes are an error.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    off = 0

    def take(count, what):
        nonlocal off
        if off + count > len(blob):
            raise ValueError(f"truncated embedding file: {what}")
        piece = blob[off:off + count]
        off += count
        return piece

    magic = take(8, "magic")
    if magic != EMBED_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {EMBED_MAGIC!r}")
    d_w, count = struct.unpack("<II", take(8, "header"))
    if expected_d_w is not None and d_w != expected_d_w:
        raise ValueError(f"dimension mismatch: file d_w={d_w}, config d_w={expected_d_w}")
    table: dict[str, EncodedReview] = {}
    for k in range(count):
        (id_len,) = struct.unpack("<I", take(4, f"record {k} id length"))
        rid = take(id_len, f"record {k} id").decode("utf-8")
        (n,) = struct.unpack("<I", take(4, f"record {k} token count"))
        if n < 1:
            raise ValueError(f"record {rid!r} has zero tokens")
        z = np.frombuffer(take(4 * d_w, f"record {rid!r} z"), dtype="<f4").astype(np.float64)
        H = np.frombuffer(take(4 * n * d_w, f"record {rid!r} H"),
                          dtype="<f4").astype(np.float64).reshape(n, d_w)
        if rid in table:
            raise ValueError(f"duplicate record id {rid!r}")
        table[rid] = EncodedReview(z=z, H=H, n=n)
    if off != len(blob):
        raise ValueError(f"trailing bytes after last record ({len(blob) - off} bytes)")
    return table


def write_precomputed(path, records, d_w: int) -> None:
    """Reference writer for the interchange format (tests and tooling).

    records is an iterable of (id, z, H); the secondary exporter produces the
    same byte layout independently.
    """
    with open(path, "wb") as fh:
        chunks = []
        count = 0
        for rid, z, H in records:
            z = np.asarray(z, dtype="<f4")
            H = np.asarray(H, dtype="<f4")
            if z.shape != (d_w,) or H.ndim != 2 or H.shape[1] != d_w or H.shape[0] < 1:
                raise ValueError(f"bad record shapes for {rid!r}: z {z.shape}, H {H.shape}")
            ident = rid.encode("utf-8")
            chunks.append(struct.pack("<I", len(ident)))
            chunks.append(ident)
            chunks.append(struct.pack("<I", H.shape[0]))
            chunks.append(z.tobytes())
            chunks.append(H.tobytes())
            count += 1
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<II", d_w, count))
        for chunk in chunks:
            fh.write(chunk)
