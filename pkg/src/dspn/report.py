"""Evaluation and training reports: delimited tables, a JSON twin, figures.

Figures render through the Agg backend so report generation works on
headless machines. Every writer returns the list of file paths it produced.
"""

from collections import Counter
from dataclasses import dataclass
import json
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np

from .acd import AspectModel
from .corpus import POLARITIES, Corpus, review_label
from .encoder import encode
from .metrics import acd_f1, acsa_accuracy, confusion, rp_accuracy
from .pyramid import PyramidHead, forward
from .trainer import Checkpoint, EpochStats, inference_source

ACSA_BASES = ("gold", "detected")

CLASS_COLORS = {"negative": "#c0392b", "neutral": "#7f8c8d", "positive": "#27ae60"}


@dataclass
class EvalResult:
    n_reviews: int
    acc_rp: float
    confusion: np.ndarray
    label_counts: dict
    f1_acd: float | None     # None when the corpus has no gold aspect sets
    acc_acsa: float | None
    n_annotated: int
    n_acsa_pairs: int
    acsa_basis: str

    def to_obj(self) -> dict:
        return {
            "n_reviews": self.n_reviews,
            "acc_rp": self.acc_rp,
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "label_counts": dict(self.label_counts),
            "f1_acd": self.f1_acd,
            "acc_acsa": self.acc_acsa,
            "n_annotated": self.n_annotated,
            "n_acsa_pairs": self.n_acsa_pairs,
            "acsa_basis": self.acsa_basis,
        }


def evaluate_corpus(ckpt: Checkpoint, corpus: Corpus, precomputed: dict | None = None,
                    acsa_on: str = "gold") -> EvalResult:
    """Score all three tasks on a labeled corpus.

    Rating prediction uses the label source the model was trained with.
    Detection and aspect sentiment are scored over the subset of reviews
    carrying gold aspect annotations; acsa_on="detected" restricts aspect
    scoring to aspects the model also detected.
    """
    if acsa_on not in ACSA_BASES:
        raise ValueError(f"acsa_on must be one of {ACSA_BASES}, got {acsa_on!r}")
    source = inference_source(ckpt, precomputed)
    model = AspectModel.from_params(ckpt.params)
    head = PyramidHead.from_params(ckpt.params)
    names = ckpt.schema().names
    threshold = ckpt.train_cfg.acd_threshold
    label_source = ckpt.train_cfg.label_source

    pred_rp: list[str] = []
    gold_rp: list[str] = []
    pred_sets: list[set] = []
    gold_sets: list[set] = []
    pred_pol: list[dict] = []
    gold_pol: list[dict] = []
    for r in corpus.reviews:
        out = forward(encode(r, source), model, head, threshold)
        gold_rp.append(review_label(r, label_source))
        pred_rp.append(POLARITIES[int(np.argmax(out.review_sent))])
        if r.gold_aspects is None:
            continue
        detected = {names[k] for k in out.detected}
        gold_sets.append(set(r.gold_aspects))
        pred_sets.append(detected)
        polarity = {names[k]: POLARITIES[int(np.argmax(out.aspect_sent[k]))]
                    for k in range(len(names))}
        if acsa_on == "detected":
            polarity = {n: v for n, v in polarity.items() if n in detected}
        pred_pol.append(polarity)
        gold_pol.append(dict(r.gold_aspects))

    counts = Counter(gold_rp)
    n_pairs = sum(len(g) for g in gold_pol)
    return EvalResult(
        n_reviews=len(corpus.reviews),
        acc_rp=rp_accuracy(pred_rp, gold_rp),
        confusion=confusion(pred_rp, gold_rp),
        label_counts={c: counts.get(c, 0) for c in POLARITIES},
        f1_acd=acd_f1(pred_sets, gold_sets) if gold_sets else None,
        acc_acsa=acsa_accuracy(pred_pol, gold_pol) if n_pairs else None,
        n_annotated=len(gold_sets),
        n_acsa_pairs=n_pairs,
        acsa_basis=acsa_on,
    )


def _fmt(value) -> str:
    if value is None:
        return "NA"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def report_lines(result: EvalResult) -> list[str]:
    """The delimited report as a list of lines (no trailing newline)."""
    lines = [
        "metric\tvalue",
        f"n_reviews\t{result.n_reviews}",
        f"acc_rp\t{_fmt(result.acc_rp)}",
        f"f1_acd\t{_fmt(result.f1_acd)}",
        f"acc_acsa\t{_fmt(result.acc_acsa)}",
        f"acsa_basis\t{result.acsa_basis}",
        f"n_annotated\t{result.n_annotated}",
        f"n_acsa_pairs\t{result.n_acsa_pairs}",
        "",
        "confusion (rows gold, columns predicted)",
        "\t" + "\t".join(POLARITIES),
    ]
    for gi, gname in enumerate(POLARITIES):
        lines.append(gname + "\t" + "\t".join(str(int(v)) for v in result.confusion[gi]))
    lines.append("")
    lines.append("label_counts")
    for c in POLARITIES:
        lines.append(f"{c}\t{result.label_counts[c]}")
    return lines


def write_report(result: EvalResult, out_dir,
                 history: list[EpochStats] | None = None) -> list[str]:
    """report.tsv, report.json, a confusion heatmap, and curves when given."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    tsv = os.path.join(out_dir, "report.tsv")
    with open(tsv, "w", encoding="utf-8") as f:
        f.write("\n".join(report_lines(result)) + "\n")
    written.append(tsv)

    obj = result.to_obj()
    if history is not None:
        obj["history"] = [h.to_obj() for h in history]
    js = os.path.join(out_dir, "report.json")
    with open(js, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")
    written.append(js)

    written.append(render_confusion_figure(result.confusion,
                                           os.path.join(out_dir, "confusion.png")))
    if history is not None:
        written.extend(write_history(history, out_dir))
    return written


def write_history(history: list[EpochStats], out_dir) -> list[str]:
    """history.tsv plus loss/accuracy curves."""
    os.makedirs(out_dir, exist_ok=True)
    tsv = os.path.join(out_dir, "history.tsv")
    cols = ["epoch", "phase", "loss", "loss_acd", "loss_rp", "val_rp_acc", "val_rp_loss"]
    with open(tsv, "w", encoding="utf-8") as f:
        f.write("\t".join(cols) + "\n")
        for h in history:
            obj = h.to_obj()
            f.write("\t".join(_fmt(obj[c]) for c in cols) + "\n")
    fig = render_curves_figure(history, os.path.join(out_dir, "curves.png"))
    return [tsv, fig]


def render_confusion_figure(M: np.ndarray, path) -> str:
    fig, ax = plt.subplots(figsize=(4.4, 4.0))
    im = ax.imshow(M, cmap="Blues")
    ax.set_xticks(range(len(POLARITIES)), POLARITIES, rotation=30, ha="right")
    ax.set_yticks(range(len(POLARITIES)), POLARITIES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("gold")
    vmax = M.max() if M.max() > 0 else 1
    for gi in range(M.shape[0]):
        for pi in range(M.shape[1]):
            color = "white" if M[gi, pi] > 0.6 * vmax else "black"
            ax.text(pi, gi, str(int(M[gi, pi])), ha="center", va="center", color=color)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_curves_figure(history: list[EpochStats], path) -> str:
    epochs = [h.epoch for h in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    ax1.plot(epochs, [h.loss for h in history], label="joint", color="#2c3e50")
    ax1.plot(epochs, [h.loss_acd for h in history], label="aspect", color="#8e44ad")
    ax1.plot(epochs, [h.loss_rp for h in history], label="rating", color="#e67e22")
    pre = [h.epoch for h in history if h.phase == "acd"]
    if pre:
        ax1.axvline(max(pre) + 0.5, color="#bbbbbb", linestyle=":", linewidth=1)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("summed loss")
    ax1.legend(fontsize=8)
    ax2.plot(epochs, [h.val_rp_acc for h in history], color="#16a085")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax2.set_ylim(0.0, 1.0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_pyramid_figure(payload: dict, path, tokens: list[str] | None = None) -> str:
    """Case-study rendering of one review's three output layers.

    payload is the inspect object (see pyramid.output_payload); tokens, when
    given, label the word axis.
    """
    aspects = list(payload["attention"])
    attn = np.array([payload["attention"][a] for a in aspects])
    word_sent = np.array(payload["word_sent"])
    n = word_sent.shape[0]
    labels = tokens if tokens is not None else [str(j) for j in range(n)]
    width = max(6.4, 0.55 * n + 2.5)

    fig, axes = plt.subplots(
        4, 1, figsize=(width, 9.0),
        gridspec_kw={"height_ratios": [1.0, 1.4, max(1.0, 0.45 * len(aspects)), 1.2]})

    ax = axes[0]
    dist = [payload["review_sent"][c] for c in POLARITIES]
    ax.bar(POLARITIES, dist, color=[CLASS_COLORS[c] for c in POLARITIES])
    ax.set_ylim(0, 1)
    ax.set_title(f"review {payload['id']}: predicted {payload['predicted_class']}")

    ax = axes[1]
    x = np.arange(len(aspects))
    w = 0.26
    for ci, c in enumerate(POLARITIES):
        vals = [payload["aspect_sent"][a][c] for a in aspects]
        ax.bar(x + (ci - 1) * w, vals, width=w, color=CLASS_COLORS[c], label=c)
    marks = ["*" if a in payload["detected"] else "" for a in aspects]
    ax.set_xticks(x, [f"{a}{m}\np={p:.3f}" for a, m, p in
                      zip(aspects, marks, payload["p"])], fontsize=8)
    ax.set_ylim(0, 1)
    ax.set_ylabel("aspect sentiment")
    ax.legend(fontsize=7)

    ax = axes[2]
    im = ax.imshow(attn, cmap="Purples", aspect="auto", vmin=0.0)
    ax.set_yticks(range(len(aspects)), aspects, fontsize=8)
    ax.set_xticks(range(n), labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("attention")
    fig.colorbar(im, ax=ax, shrink=0.8)

    ax = axes[3]
    im = ax.imshow(word_sent.T, cmap="RdYlGn", aspect="auto")
    ax.set_yticks(range(len(POLARITIES)), POLARITIES, fontsize=8)
    ax.set_xticks(range(n), labels, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("word logits")
    fig.colorbar(im, ax=ax, shrink=0.8)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
