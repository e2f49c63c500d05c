"""Sentiment pyramid on top of the aspect detector.

Word-level class logits feed aspect-level distributions through per-aspect
attention over words; aspect distributions mix under the importance vector
p into a single review distribution. One forward pass yields all three
outputs (detected aspects, per-aspect sentiment, review sentiment).
"""

from dataclasses import dataclass

import numpy as np

from .acd import DEFAULT_THRESHOLD, AspectModel, aspect_importance, detect_aspects
from .corpus import POLARITIES, POLARITY_INDEX, AspectSchema
from .encoder import EncodedReview
from .gradkernel import ParamSet, affine_rows, relu, softmax, softmax_rows

N_CLASSES = len(POLARITIES)


@dataclass
class PyramidHead:
    """Parameters of the two-layer word scorer: logits = W3 relu(W2 h + b2) + b3."""

    W2: np.ndarray  # (d_h, d_w)
    b2: np.ndarray  # (d_h,)
    W3: np.ndarray  # (3, d_h)
    b3: np.ndarray  # (3,)

    def __post_init__(self):
        if self.W2.ndim != 2:
            raise ValueError(f"W2 must be 2-D, got shape {self.W2.shape}")
        d_h = self.W2.shape[0]
        if (self.b2.shape != (d_h,) or self.W3.shape != (N_CLASSES, d_h)
                or self.b3.shape != (N_CLASSES,)):
            raise ValueError(
                f"inconsistent head shapes: W2 {self.W2.shape}, b2 {self.b2.shape}, "
                f"W3 {self.W3.shape}, b3 {self.b3.shape}")
        for t in (self.W2, self.b2, self.W3, self.b3):
            if not np.all(np.isfinite(t)):
                raise ValueError("head parameters must be finite")

    @classmethod
    def from_params(cls, params: ParamSet) -> "PyramidHead":
        return cls(params["W2"], params["b2"], params["W3"], params["b3"])

    @property
    def d_w(self) -> int:
        return self.W2.shape[1]


@dataclass
class PyramidOutput:
    p: np.ndarray            # (N,) aspect importance
    word_sent: np.ndarray    # (n, 3) per-word class logits
    attn: np.ndarray         # (N, n) per-aspect attention over words
    aspect_sent: np.ndarray  # (N, 3) per-aspect class distributions
    review_sent: np.ndarray  # (3,) review class distribution
    detected: set[int]


def word_sentiments(H: np.ndarray, head: PyramidHead) -> np.ndarray:
    """Class logits per word: row j is W3 relu(W2 h_j + b2) + b3, shape (n, 3)."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] != head.d_w:
        raise ValueError(f"H shape {H.shape} incompatible with head d_w={head.d_w}")
    return affine_rows(relu(affine_rows(H, head.W2, head.b2)), head.W3, head.b3)


def aspect_attention(H: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Row k = softmax over words of T_k . h_j, shape (N, n)."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or T.ndim != 2 or H.shape[1] != T.shape[1]:
        raise ValueError(f"H shape {H.shape} incompatible with T shape {T.shape}")
    return softmax_rows(T @ H.T)


def aspect_sentiments(word_sent: np.ndarray, attn: np.ndarray) -> np.ndarray:
    """Row k = softmax(sum_j attn[k,j] * word_sent[j]), shape (N, 3)."""
    if (word_sent.ndim != 2 or word_sent.shape[1] != N_CLASSES
            or attn.ndim != 2 or attn.shape[1] != word_sent.shape[0]):
        raise ValueError(
            f"shape mismatch: word_sent {word_sent.shape}, attn {attn.shape}")
    return softmax_rows(attn @ word_sent)


def review_sentiment(aspect_sent: np.ndarray, p: np.ndarray) -> np.ndarray:
    """softmax of the p-weighted mix of aspect rows, shape (3,).

    The aspect rows are already probabilities; they are mixed and re-softmaxed
    rather than mixed in logit space.
    """
    p = np.asarray(p, dtype=np.float64)
    if aspect_sent.ndim != 2 or aspect_sent.shape != (p.shape[0], N_CLASSES):
        raise ValueError(
            f"shape mismatch: aspect_sent {aspect_sent.shape}, p {p.shape}")
    return softmax(aspect_sent.T @ p)


def rp_loss(review_sent: np.ndarray, gold) -> float:
    """Cross-entropy against the gold class (index or polarity name)."""
    idx = POLARITY_INDEX[gold] if isinstance(gold, str) else int(gold)
    return -float(np.log(review_sent[idx]))


def joint_loss(acd_loss_value: float, rp_loss_value: float, lam: float) -> float:
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    return lam * acd_loss_value + rp_loss_value


def forward(enc: EncodedReview, model: AspectModel, head: PyramidHead,
            acd_threshold: float = DEFAULT_THRESHOLD) -> PyramidOutput:
    """Full inference for one encoded review."""
    p = aspect_importance(enc.z, model)
    ws = word_sentiments(enc.H, head)
    attn = aspect_attention(enc.H, model.T)
    asent = aspect_sentiments(ws, attn)
    return PyramidOutput(
        p=p,
        word_sent=ws,
        attn=attn,
        aspect_sent=asent,
        review_sent=review_sentiment(asent, p),
        detected=detect_aspects(p, acd_threshold),
    )


def _class_obj(row: np.ndarray) -> dict:
    return {POLARITIES[c]: float(row[c]) for c in range(N_CLASSES)}


def output_payload(review_id: str, out: PyramidOutput, schema: AspectSchema) -> dict:
    """JSON-ready record of one forward pass, keyed by schema aspect names."""
    names = schema.names
    if len(names) != out.p.shape[0]:
        raise ValueError(
            f"schema lists {len(names)} aspects but output has {out.p.shape[0]}")
    return {
        "id": review_id,
        "p": [float(v) for v in out.p],
        "detected": [names[k] for k in sorted(out.detected)],
        "word_sent": [[float(c) for c in row] for row in out.word_sent],
        "attention": {names[k]: [float(a) for a in out.attn[k]] for k in range(len(names))},
        "aspect_sent": {names[k]: _class_obj(out.aspect_sent[k]) for k in range(len(names))},
        "review_sent": _class_obj(out.review_sent),
        "predicted_class": POLARITIES[int(np.argmax(out.review_sent))],
    }
