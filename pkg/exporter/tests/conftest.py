"""Shared fixtures: locally synthesized encoder directories.

The test environment ships no pretrained weights and has no model hub,
so fixtures build a small BERT-style encoder with seeded random weights
and a purpose-built WordPiece vocabulary, saved to a directory the way
a downloaded model would be. Random weights exercise every contract
under test (alignment, pooling, the file format, determinism); they are
simply not good features.
"""

import struct
from pathlib import Path

import numpy as np
import pytest
import torch
from tokenizers import Tokenizer
from tokenizers.models import WordPiece
from tokenizers.normalizers import BertNormalizer
from tokenizers.pre_tokenizers import BertPreTokenizer
from tokenizers.processors import BertProcessing
from transformers import BertConfig, BertModel, BertTokenizerFast

from embed_export.corpus import read_reviews, read_schema, split_words

DATA = Path(__file__).parent / "data"

# kept out of the whole-word vocabulary so they exercise subword pooling
SPLIT_WORDS = {
    "delicious": ["deli", "##cious"],
    "overpriced": ["over", "##priced"],
    "wonderful": ["wonder", "##ful"],
    "spotless": ["spot", "##less"],
    "disappointing": ["disappoint", "##ing"],
}


def _vocab_tokens() -> list[str]:
    words = set()
    for _, text in read_reviews(DATA / "reviews100.jsonl"):
        words.update(split_words(text))
    for _, seeds in read_schema(DATA / "schema.json"):
        words.update(split_words(" ".join(seeds)))
    chars = list("abcdefghijklmnopqrstuvwxyz0123456789")
    tokens = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
              + sorted(words - set(SPLIT_WORDS))
              + [p for parts in SPLIT_WORDS.values() for p in parts]
              + chars + ["##" + c for c in chars])   # char fallback keeps unknown ASCII words out of [UNK]
    return list(dict.fromkeys(tokens))


def build_encoder_dir(path, hidden: int, layers: int, heads: int,
                      intermediate: int, max_positions: int, seed: int = 0) -> None:
    vocab = _vocab_tokens()
    ids = {tok: i for i, tok in enumerate(vocab)}
    backend = Tokenizer(WordPiece(ids, unk_token="[UNK]"))
    backend.normalizer = BertNormalizer(lowercase=True)
    backend.pre_tokenizer = BertPreTokenizer()
    backend.post_processor = BertProcessing(sep=("[SEP]", ids["[SEP]"]),
                                            cls=("[CLS]", ids["[CLS]"]))
    tokenizer = BertTokenizerFast(tokenizer_object=backend, unk_token="[UNK]",
                                  pad_token="[PAD]", cls_token="[CLS]",
                                  sep_token="[SEP]", mask_token="[MASK]",
                                  do_lower_case=True)
    torch.manual_seed(seed)
    config = BertConfig(vocab_size=len(vocab), hidden_size=hidden,
                        num_hidden_layers=layers, num_attention_heads=heads,
                        intermediate_size=intermediate,
                        max_position_embeddings=max_positions)
    model = BertModel(config)
    model.eval()
    tokenizer.save_pretrained(str(path))
    model.save_pretrained(str(path))


@pytest.fixture(scope="session")
def encoder_dir(tmp_path_factory):
    """Small encoder for unit tests (hidden 32)."""
    path = tmp_path_factory.mktemp("encoder-small")
    build_encoder_dir(path, hidden=32, layers=2, heads=4,
                      intermediate=64, max_positions=128)
    return str(path)


@pytest.fixture(scope="session")
def wide_encoder_dir(tmp_path_factory):
    """Encoder at the conventional base width (hidden 768)."""
    path = tmp_path_factory.mktemp("encoder-wide")
    build_encoder_dir(path, hidden=768, layers=1, heads=4,
                      intermediate=128, max_positions=512)
    return str(path)


@pytest.fixture(scope="session")
def short_window_encoder_dir(tmp_path_factory):
    """Position budget of 16 so window splitting triggers on small inputs."""
    path = tmp_path_factory.mktemp("encoder-short")
    build_encoder_dir(path, hidden=32, layers=1, heads=2,
                      intermediate=64, max_positions=16)
    return str(path)


@pytest.fixture
def read_embedding_file():
    """Independent parser for the interchange format, for checking writes.

    Returns (d_w, [(id, z, H), ...]); raises on trailing bytes. Kept apart
    from the writer under test so the two cannot share a mistake.
    """
    def read(path):
        blob = Path(path).read_bytes()
        assert blob[:8] == b"DSPNEMB1"
        d_w, count = struct.unpack_from("<II", blob, 8)
        off = 16
        records = []
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            rid = blob[off:off + id_len].decode("utf-8")
            off += id_len
            (n,) = struct.unpack_from("<I", blob, off)
            off += 4
            z = np.frombuffer(blob, dtype="<f4", count=d_w, offset=off)
            off += 4 * d_w
            H = np.frombuffer(blob, dtype="<f4", count=n * d_w,
                              offset=off).reshape(n, d_w)
            off += 4 * n * d_w
            records.append((rid, z, H))
        assert off == len(blob), "trailing bytes"
        return d_w, records
    return read
