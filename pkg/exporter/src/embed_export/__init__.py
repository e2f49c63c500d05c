"""Precomputed embedding export for the pyramid sentiment engine.

Reads a JSON-lines review corpus, runs a pretrained masked-LM encoder
over it, and writes the engine's binary interchange format: one pooled
vector plus one hidden-state row per word for every review.
"""

from .corpus import read_reviews, read_schema, split_words
from .encoder import (
    ASPECT_RECORD_PREFIX,
    BATCH_REVIEWS,
    DEFAULT_MAX_LEN,
    ExportReport,
    encode_words,
    export_embeddings,
    load_encoder,
)
from .interchange import MAGIC, EmbeddingWriter

__version__ = "0.1.0"

__all__ = [
    "ASPECT_RECORD_PREFIX",
    "BATCH_REVIEWS",
    "DEFAULT_MAX_LEN",
    "EmbeddingWriter",
    "ExportReport",
    "MAGIC",
    "encode_words",
    "export_embeddings",
    "load_encoder",
    "read_reviews",
    "read_schema",
    "split_words",
]
