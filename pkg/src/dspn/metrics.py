"""Scoring for the three tasks: detection F1, aspect accuracy, rating accuracy.

Detection is micro-averaged over every (review, aspect) decision. Aspect
sentiment is scored only where a gold annotation exists; rating prediction
is plain accuracy plus a gold-by-predicted confusion matrix.
"""

import numpy as np

from .corpus import POLARITIES, POLARITY_INDEX

N_CLASSES = len(POLARITIES)


def acd_f1(predicted: list[set], gold: list[set]) -> float:
    """Micro F1 over aspect membership decisions; 0.0 when nothing is hit."""
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(gold)} gold")
    tp = fp = fn = 0
    for pred, g in zip(predicted, gold):
        pred = set(pred)
        g = set(g)
        tp += len(pred & g)
        fp += len(pred - g)
        fn += len(g - pred)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def acsa_accuracy(predicted: list[dict], gold: list[dict]) -> float:
    """Fraction of gold (review, aspect) pairs whose polarity is matched.

    Aspects without a gold annotation are not scored, so a prediction map may
    cover more aspects than its gold counterpart.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(gold)} gold")
    total = 0
    correct = 0
    for pred, g in zip(predicted, gold):
        for aspect, polarity in (g or {}).items():
            total += 1
            correct += int(pred.get(aspect) == polarity)
    if total == 0:
        raise ValueError("no gold aspect annotations to score")
    return correct / total


def _class_index(value) -> int:
    if isinstance(value, str):
        return POLARITY_INDEX[value]
    idx = int(value)
    if not 0 <= idx < N_CLASSES:
        raise ValueError(f"class index out of range: {value!r}")
    return idx


def rp_accuracy(predicted: list, gold: list) -> float:
    """Fraction of reviews whose class (index or name) is matched."""
    if not gold:
        raise ValueError("empty input")
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(gold)} gold")
    hits = sum(_class_index(p) == _class_index(g) for p, g in zip(predicted, gold))
    return hits / len(gold)


def confusion(predicted: list, gold: list) -> np.ndarray:
    """3x3 count matrix, rows gold, columns predicted."""
    if not gold:
        raise ValueError("empty input")
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(gold)} gold")
    M = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for p, g in zip(predicted, gold):
        M[_class_index(g), _class_index(p)] += 1
    return M
