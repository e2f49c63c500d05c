"""Aspect-category detection: importance, reconstruction, hinge loss, thresholding.

The detector is an autoencoder over sentence embeddings: a review embedding z
is softly assigned to aspects (p), reconstructed as a convex combination of
aspect rows (r = T^T p), and trained so r is closer to its own z than to
randomly sampled other reviews' embeddings, with a uniqueness penalty keeping
aspect rows from collapsing onto each other. No aspect labels involved.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncodedReview
from .gradkernel import ParamSet, affine, softmax

DEFAULT_THRESHOLD = 1e-4  # detection cutoff on p_k; tuned value, exposed in config


@dataclass
class AspectModel:
    W1: np.ndarray  # (N, d_w)
    b1: np.ndarray  # (N,)
    T: np.ndarray   # (N, d_w)

    @classmethod
    def from_params(cls, params: ParamSet) -> "AspectModel":
        return cls(params["W1"], params["b1"], params["T"])

    @property
    def n_aspects(self) -> int:
        return self.T.shape[0]


@dataclass
class NegSampleConfig:
    m: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("m must be >= 0")


def aspect_importance(z: np.ndarray, model: AspectModel) -> np.ndarray:
    """p = softmax(W1 z + b1), the review's distribution over aspects."""
    return softmax(affine(model.W1, z, model.b1))


def reconstruct(model: AspectModel, p: np.ndarray) -> np.ndarray:
    """r = T^T p, the reconstructed sentence embedding."""
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] != model.T.shape[0]:
        raise ValueError(f"shape mismatch: p {p.shape} vs T {model.T.shape}")
    return model.T.T @ p


def sample_negatives(batch_size: int, cfg: NegSampleConfig,
                     rng: np.random.Generator | None = None) -> list[np.ndarray]:
    """Per-instance indices of negative examples drawn from the same batch.

    Uniform over the batch excluding the instance itself, with replacement;
    index i's negatives reference other instances' z embeddings. Deterministic
    given the generator state (or cfg.seed when no generator is passed).
    """
    if cfg.m > 0 and batch_size < 2:
        raise ValueError("need a batch of at least 2 to sample negatives")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    out = []
    for i in range(batch_size):
        draws = rng.integers(0, batch_size - 1, size=cfg.m)
        draws = np.where(draws >= i, draws + 1, draws)  # skip self, stays uniform
        out.append(draws.astype(np.intp))
    return out


def uniqueness_penalty(T: np.ndarray) -> float:
    """U(T) = ||Tn Tn^T - I||_F with row-L2-normalized Tn.

    Zero exactly when the normalized rows are orthonormal. Invariant to
    rescaling any row by a positive constant.
    """
    T = np.asarray(T, dtype=np.float64)
    norms = np.linalg.norm(T, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("uniqueness penalty undefined for a zero row")
    Tn = T / norms[:, None]
    gram = Tn @ Tn.T
    return float(np.linalg.norm(gram - np.eye(T.shape[0])))


def uniqueness_penalty_backward(T: np.ndarray, upstream: float = 1.0) -> np.ndarray:
    """dU/dT through the row normalization; 0 at the (unreachable) minimum."""
    norms = np.linalg.norm(T, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("uniqueness penalty undefined for a zero row")
    Tn = T / norms[:, None]
    M = Tn @ Tn.T - np.eye(T.shape[0])
    fro = np.linalg.norm(M)
    if fro == 0.0:
        return np.zeros_like(T)
    dTn = (2.0 * upstream / fro) * (M @ Tn)
    # project each row's gradient through t = row/|row|
    dT = (dTn - (dTn * Tn).sum(axis=1, keepdims=True) * Tn) / norms[:, None]
    return dT


def hinge_terms(z: np.ndarray, r: np.ndarray, negatives: np.ndarray) -> np.ndarray:
    """Margins max(0, 1 - r.z + r.n_j) for each negative embedding row n_j."""
    if negatives.size == 0:
        return np.zeros(0)
    margins = 1.0 - r @ z + negatives @ r
    return np.maximum(margins, 0.0)


def acd_loss(batch: list[EncodedReview], model: AspectModel, cfg: NegSampleConfig,
             lam_acd: float, neg_indices: list[np.ndarray] | None = None,
             rng: np.random.Generator | None = None) -> float:
    """Batch detection loss: summed hinge terms plus lam_acd * U(T).

    neg_indices may be passed to reuse a prior draw (the trainer does); when
    absent they are sampled here. Gradients for training flow through the
    trainer's backward pass; this is the pure forward value.
    """
    if neg_indices is None:
        neg_indices = sample_negatives(len(batch), cfg, rng)
    zs = np.stack([enc.z for enc in batch])
    total = 0.0
    for i, enc in enumerate(batch):
        p = aspect_importance(enc.z, model)
        r = reconstruct(model, p)
        total += float(hinge_terms(enc.z, r, zs[neg_indices[i]]).sum())
    return total + lam_acd * uniqueness_penalty(model.T)


def detect_aspects(p: np.ndarray, threshold: float = DEFAULT_THRESHOLD) -> set[int]:
    """Indices with importance above the threshold; never empty for threshold < 1/N."""
    if not 0.0 <= threshold < 1.0:
        raise ValueError(f"threshold must lie in [0, 1), got {threshold!r}")
    p = np.asarray(p)
    return {int(k) for k in np.nonzero(p > threshold)[0]}
