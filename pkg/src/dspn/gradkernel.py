"""Dense numeric primitives with analytic gradients, plus a finite-difference harness.

Everything downstream (aspect detection, the sentiment pyramid, the trainer)
is built from the ops in this file. The network is a fixed DAG, so reverse
mode is realized as per-op backward functions composed in a fixed order by
the caller; there is no tape.

All arrays are float64. 32-bit floats appear only in the embedding
interchange file, never here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ParamSet:
    """Named 1-D/2-D float64 tensors with matching gradient accumulators."""

    def __init__(self):
        self._values: dict[str, np.ndarray] = {}
        self._grads: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=np.float64)  # always copy; the set owns its storage
        if arr.ndim not in (1, 2):
            raise ValueError(f"parameter {name!r} must be 1-D or 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name!r} contains non-finite values")
        self._values[name] = arr
        self._grads[name] = np.zeros_like(arr)
        return arr

    def names(self) -> list[str]:
        return list(self._values)  # insertion order; gives every consumer a fixed iteration order

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def add_grad(self, name: str, g) -> None:
        grad = self._grads[name]
        if np.shape(g) != grad.shape:
            raise ValueError(f"gradient shape {np.shape(g)} != parameter shape {grad.shape} for {name!r}")
        grad += g

    def zero_grads(self) -> None:
        for g in self._grads.values():
            g[...] = 0.0

    def n_coords(self) -> int:
        return sum(v.size for v in self._values.values())

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, value in self._values.items():
            out.add(name, value)
        return out


def affine(W: np.ndarray, x: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """W @ x + bias for a single vector x."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if W.ndim != 2 or x.ndim != 1 or bias.ndim != 1:
        raise ValueError(f"affine expects 2-D W, 1-D x, 1-D bias; got {W.shape}, {x.shape}, {bias.shape}")
    if W.shape[1] != x.shape[0] or W.shape[0] != bias.shape[0]:
        raise ValueError(f"affine shape mismatch: W {W.shape}, x {x.shape}, bias {bias.shape}")
    return W @ x + bias


def affine_backward(W, x, g):
    """Gradients of affine for upstream g: (dW, dx, dbias)."""
    g = np.asarray(g, dtype=np.float64)
    return np.outer(g, x), W.T @ g, g.copy()


def affine_rows(X: np.ndarray, W: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Row-batched affine: returns X @ W.T + bias, one output row per input row."""
    if X.ndim != 2 or W.ndim != 2 or X.shape[1] != W.shape[1] or W.shape[0] != bias.shape[0]:
        raise ValueError(f"affine_rows shape mismatch: X {X.shape}, W {W.shape}, bias {np.shape(bias)}")
    return X @ W.T + bias


def affine_rows_backward(X, W, G):
    """(dX, dW, dbias) for upstream G with one row per input row."""
    return G @ W, G.T @ X, G.sum(axis=0)


def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax of a 1-D vector."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"softmax expects a nonempty 1-D vector, got shape {v.shape}")
    e = np.exp(v - np.max(v))
    return e / e.sum()


def softmax_backward(p, g):
    """Jacobian-vector product p * (g - p.g), given the softmax OUTPUT p."""
    return p * (g - p @ g)


def softmax_rows(M: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a 2-D matrix."""
    if M.ndim != 2 or M.shape[1] < 1:
        raise ValueError(f"softmax_rows expects a 2-D matrix, got shape {M.shape}")
    e = np.exp(M - M.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(P, G):
    return P * (G - (P * G).sum(axis=1, keepdims=True))


def relu(v: np.ndarray) -> np.ndarray:
    return np.maximum(v, 0.0)


def relu_backward(pre, g):
    """Masked upstream gradient; the subgradient at exactly 0 is 0."""
    return np.where(pre > 0.0, g, 0.0)


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: int  # flat index into the worst parameter
    n_checked: int
    n_skipped: int

    def __str__(self):
        where = f" at {self.worst_param}[{self.worst_index}]" if self.worst_param else ""
        return (f"max rel err {self.max_rel_err:.3e}{where} "
                f"({self.n_checked} coords checked, {self.n_skipped} skipped near kinks)")


def check_gradient(loss_fn, params: ParamSet, h: float = 1e-5, kink_fn=None) -> GradCheckReport:
    """Compare analytic gradients against central differences, coordinate by coordinate.

    loss_fn(params, compute_grads) must return a scalar; when compute_grads is
    True it must also accumulate analytic gradients into params. Relative error
    uses denominator max(|analytic|, |numeric|, 1e-8).

    kink_fn(params), when given, returns the pre-activation values of every
    non-smooth site in the loss (relu inputs, hinge margins). A coordinate is
    skipped when a perturbed evaluation sits within 10h of a kink or crosses
    one, since central differences are meaningless there.

    A difference smaller than the rounding noise of the central difference
    itself (eps-scale relative to |f| / 2h) counts as exact agreement: below
    that the two values are indistinguishable in double precision. Without
    this floor a coordinate whose true gradient is zero reports noise / 1e-8
    as its relative error.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params.zero_grads()
    base = float(loss_fn(params, True))
    if not np.isfinite(base):
        raise ValueError(f"non-finite loss {base!r}")
    analytic = {name: params.grad(name).copy() for name in params.names()}

    max_rel = 0.0
    worst = ("", 0)
    n_checked = 0
    n_skipped = 0
    for name in params.names():
        value = params[name]
        flat = value.reshape(-1)   # contiguous view; perturbed in place and restored
        aflat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(loss_fn(params, False))
            k_plus = None if kink_fn is None else np.asarray(kink_fn(params), dtype=np.float64)
            flat[i] = orig - h
            f_minus = float(loss_fn(params, False))
            k_minus = None if kink_fn is None else np.asarray(kink_fn(params), dtype=np.float64)
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise ValueError(f"non-finite loss while perturbing {name}[{i}]")
            if k_plus is not None and k_plus.size:
                near = min(np.min(np.abs(k_plus)), np.min(np.abs(k_minus))) < 10.0 * h
                crossed = np.any(np.sign(k_plus) != np.sign(k_minus))
                if near or crossed:
                    n_skipped += 1
                    continue
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = aflat[i]
            noise = 64.0 * np.finfo(np.float64).eps \
                * max(1.0, abs(f_plus), abs(f_minus)) / (2.0 * h)
            diff = abs(a - numeric)
            rel = 0.0 if diff <= noise else diff / max(abs(a), abs(numeric), 1e-8)
            n_checked += 1
            if rel > max_rel:
                max_rel = rel
                worst = (name, i)
    return GradCheckReport(max_rel, worst[0], worst[1], n_checked, n_skipped)
