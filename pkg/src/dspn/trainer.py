"""Joint training from review-level labels only, plus checkpoint round-tripping.

The whole network is one fixed DAG, so the backward pass is written out
by hand in batch_step: aspect hinge gradients first (they couple instances
through the in-batch negatives), then the per-review sentiment path, then
the shared softmax/affine/embedding tail that both objectives feed.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
import hashlib
import json
import struct

import numpy as np

from .acd import (
    DEFAULT_THRESHOLD,
    AspectModel,
    NegSampleConfig,
    sample_negatives,
    uniqueness_penalty,
    uniqueness_penalty_backward,
)
from .corpus import (
    DEFAULT_MAX_LEN,
    POLARITY_INDEX,
    AspectSchema,
    Corpus,
    Review,
    Vocabulary,
    review_label,
)
from .encoder import (
    EMBEDDING_PARAM,
    EncodedReview,
    EncoderConfig,
    encode,
    init_aspect_matrix,
    init_embeddings,
)
from .gradkernel import (
    GradCheckReport,
    ParamSet,
    affine,
    affine_backward,
    affine_rows,
    affine_rows_backward,
    check_gradient,
    relu,
    relu_backward,
    softmax,
    softmax_backward,
    softmax_rows,
    softmax_rows_backward,
)
from .pyramid import N_CLASSES, PyramidHead, forward

OPTIMIZERS = ("sgd", "adam")
LABEL_SOURCES = ("stars", "pseudo", "derived_from_aspects")

CKPT_MAGIC = b"DSPNCKPT"
CKPT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    batch: int = 32
    lr: float = 1e-3
    optimizer: str = "adam"
    lam: float = 0.1        # weight of the aspect loss in the joint objective
    lam_acd: float = 0.1    # weight of the uniqueness penalty inside the aspect loss
    neg_samples: int = 10
    acd_threshold: float = DEFAULT_THRESHOLD
    seed: int = 0
    acd_pretrain_epochs: int = 1
    label_source: str = "stars"
    d_h: int = 0            # hidden width of the word scorer; 0 means d_w
    val_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lam < 0 or self.lam_acd < 0:
            raise ValueError("loss weights must be >= 0")
        if self.neg_samples < 0:
            raise ValueError("neg_samples must be >= 0")
        if not 0.0 <= self.acd_threshold < 1.0:
            raise ValueError("acd_threshold must be in [0, 1)")
        if self.acd_pretrain_epochs < 0:
            raise ValueError("acd_pretrain_epochs must be >= 0")
        if self.label_source not in LABEL_SOURCES:
            raise ValueError(f"unknown label_source {self.label_source!r}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    phase: str       # "acd" | "joint"
    loss: float      # joint value under the configured lambda
    loss_acd: float
    loss_rp: float
    val_rp_acc: float
    val_rp_loss: float

    def to_obj(self) -> dict:
        return asdict(self)


def init_params(schema: AspectSchema, enc_cfg: EncoderConfig, cfg: TrainConfig,
                vocab: Vocabulary | None, rng: np.random.Generator,
                precomputed: dict | None = None) -> ParamSet:
    """Fresh parameter set in the fixed order the checkpoint format relies on."""
    params = ParamSet()
    if enc_cfg.mode == "trainable":
        init_embeddings(params, enc_cfg.vocab_size, enc_cfg.d_w, rng)
        source = params
    else:
        if precomputed is None:
            raise ValueError("precomputed mode needs the embedding map")
        source = precomputed
    d_w = enc_cfg.d_w
    d_h = cfg.d_h or d_w
    n_aspects = len(schema.names)
    params.add("W1", rng.normal(0.0, 1.0, size=(n_aspects, d_w)) / np.sqrt(d_w))
    params.add("b1", np.zeros(n_aspects))
    params.add("T", init_aspect_matrix(
        schema, source, vocab if enc_cfg.mode == "trainable" else None))
    params.add("W2", rng.normal(0.0, 1.0, size=(d_h, d_w)) / np.sqrt(d_w))
    params.add("b2", np.zeros(d_h))
    params.add("W3", rng.normal(0.0, 1.0, size=(N_CLASSES, d_h)) / np.sqrt(d_h))
    params.add("b3", np.zeros(N_CLASSES))
    return params


def _rp_instance(T, W2, b2, W3, b3, p, enc, label, r_w, want_grads):
    """Forward (and optionally backward) of the sentiment path for one review.

    Returns (loss, grads dict or None, dp or None, dH or None). Pure in its
    inputs, so batch items can run on worker threads; the caller reduces the
    returned pieces in batch order.
    """
    H = enc.H
    Q = affine_rows(H, W2, b2)
    Ar = relu(Q)
    Wlog = affine_rows(Ar, W3, b3)
    D = T @ H.T
    A = softmax_rows(D)
    S = softmax_rows(A @ Wlog)
    mix = S.T @ p
    yR = softmax(mix)
    loss = -float(np.log(yR[label]))
    if not want_grads:
        return loss, None, None, None

    dmix = yR.copy()
    dmix[label] -= 1.0
    dmix *= r_w
    dS = np.outer(p, dmix)
    dp = S @ dmix
    dSsum = softmax_rows_backward(S, dS)
    dA = dSsum @ Wlog.T
    dWlog = A.T @ dSsum
    dD = softmax_rows_backward(A, dA)
    dH = dD.T @ T
    dAr, dW3, db3 = affine_rows_backward(Ar, W3, dWlog)
    dQ = relu_backward(Q, dAr)
    dHq, dW2, db2 = affine_rows_backward(H, W2, dQ)
    dH += dHq
    grads = {"T": dD @ H, "W2": dW2, "b2": db2, "W3": dW3, "b3": db3}
    return loss, grads, dp, dH


def batch_step(params: ParamSet, reviews: list[Review], labels: list[int],
               negs: list[np.ndarray], source, a_w: float, r_w: float,
               lam_acd: float, compute_grads: bool = True,
               executor: ThreadPoolExecutor | None = None) -> tuple[float, float]:
    """Both loss components over one batch; gradients accumulate into params.

    a_w and r_w scale the gradients of the aspect and sentiment objectives
    (pretraining uses 1/0, joint training lambda/1). A zero weight skips that
    backward path entirely, so a lambda=0 run takes the same float operations
    as a run with no aspect term in the code at all. Loss values themselves
    are always computed for the history.
    """
    W1, b1, T = params["W1"], params["b1"], params["T"]
    W2, b2, W3, b3 = params["W2"], params["b2"], params["W3"], params["b3"]
    B = len(reviews)
    trainable = isinstance(source, ParamSet)

    encs = [encode(r, source) for r in reviews]
    ps = [softmax(affine(W1, e.z, b1)) for e in encs]
    rs = [T.T @ p for p in ps]

    # raw hinge margins; clamped only in the loss so the backward can see signs
    margins = []
    l_acd = 0.0
    for i, e in enumerate(encs):
        if negs[i].size:
            Zn = np.stack([encs[j].z for j in negs[i]])
            m = 1.0 - rs[i] @ e.z + Zn @ rs[i]
            l_acd += float(np.maximum(m, 0.0).sum())
        else:
            m = np.zeros(0)
        margins.append(m)
    if lam_acd != 0.0:
        l_acd += lam_acd * uniqueness_penalty(T)

    rp_jobs = (lambda f, xs: list(executor.map(f, xs))) if executor is not None \
        else (lambda f, xs: [f(x) for x in xs])
    want_rp_grads = compute_grads and r_w != 0.0
    rp_out = rp_jobs(
        lambda i: _rp_instance(T, W2, b2, W3, b3, ps[i], encs[i], labels[i],
                               r_w, want_rp_grads),
        range(B))
    l_rp = sum(out[0] for out in rp_out)

    if not compute_grads:
        return l_acd, l_rp

    d_w = T.shape[1]
    dp = [np.zeros(T.shape[0]) for _ in range(B)]
    dz = [np.zeros(d_w) for _ in range(B)]

    if a_w != 0.0:
        for i in range(B):
            active = margins[i] > 0.0
            if not active.any():
                continue
            js = negs[i][active]
            Zact = np.stack([encs[j].z for j in js])
            dr = a_w * (Zact.sum(axis=0) - len(js) * encs[i].z)
            dz[i] += (-a_w * len(js)) * rs[i]
            for j in js:                      # duplicates add once per draw
                dz[j] += a_w * rs[i]
            params.add_grad("T", np.outer(ps[i], dr))
            dp[i] += T @ dr
        if lam_acd != 0.0:
            params.add_grad("T", (a_w * lam_acd) * uniqueness_penalty_backward(T))

    if want_rp_grads:
        for i in range(B):   # fixed reduction order regardless of worker count
            _, grads, dp_i, _ = rp_out[i]
            for name, g in grads.items():
                params.add_grad(name, g)
            dp[i] += dp_i

    if a_w != 0.0 or want_rp_grads:
        emb_grad = np.zeros_like(params[EMBEDDING_PARAM]) if trainable else None
        for i in range(B):
            du = softmax_backward(ps[i], dp[i])
            dW1, dz_u, db1 = affine_backward(W1, encs[i].z, du)
            params.add_grad("W1", dW1)
            params.add_grad("b1", db1)
            dz[i] += dz_u
            if trainable:
                dH = rp_out[i][3] if want_rp_grads else np.zeros_like(encs[i].H)
                dH = dH + dz[i] / encs[i].n   # z is the row mean of H
                np.add.at(emb_grad, np.asarray(reviews[i].tokens, dtype=np.intp), dH)
        if trainable:
            params.add_grad(EMBEDDING_PARAM, emb_grad)

    return l_acd, l_rp


def batch_kinks(params: ParamSet, reviews: list[Review], negs: list[np.ndarray],
                source) -> np.ndarray:
    """Pre-activation values of every non-smooth site in the joint loss:
    hinge margins and the word scorer's relu inputs."""
    W1, b1, T = params["W1"], params["b1"], params["T"]
    W2, b2 = params["W2"], params["b2"]
    encs = [encode(r, source) for r in reviews]
    rs = [T.T @ softmax(affine(W1, e.z, b1)) for e in encs]
    pieces = []
    for i, e in enumerate(encs):
        if negs[i].size:
            Zn = np.stack([encs[j].z for j in negs[i]])
            pieces.append(1.0 - rs[i] @ e.z + Zn @ rs[i])
        pieces.append(affine_rows(e.H, W2, b2).ravel())
    return np.concatenate(pieces)


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: ParamSet) -> None:
        for name in params.names():
            params[name][...] -= self.lr * params.grad(name)


class Adam:
    def __init__(self, lr: float, params: ParamSet,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(params[name]) for name in params.names()}
        self.v = {name: np.zeros_like(params[name]) for name in params.names()}

    def step(self, params: ParamSet) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name in params.names():
            g = params.grad(name)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name][...] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(cfg: TrainConfig, params: ParamSet):
    if cfg.optimizer == "sgd":
        return SGD(cfg.lr)
    return Adam(cfg.lr, params)


def _rp_eval(params: ParamSet, reviews: list[Review], labels: list[int],
             source, acd_threshold: float) -> tuple[float, float]:
    """(accuracy, summed cross-entropy) of the review head on a fixed set."""
    model = AspectModel.from_params(params)
    head = PyramidHead.from_params(params)
    correct = 0
    loss = 0.0
    for r, label in zip(reviews, labels):
        out = forward(encode(r, source), model, head, acd_threshold)
        correct += int(np.argmax(out.review_sent)) == label
        loss += -float(np.log(out.review_sent[label]))
    return correct / len(reviews), loss


@dataclass
class Checkpoint:
    version: int
    enc_cfg: EncoderConfig
    train_cfg: TrainConfig
    params: ParamSet
    epoch: int
    losses: dict
    vocab_tokens: list[str]   # non-special tokens, id order
    schema_obj: dict
    vocab_fp: str
    schema_fp: str

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.vocab_tokens)

    def schema(self) -> AspectSchema:
        return AspectSchema.from_obj(self.schema_obj)


def train(corpus: Corpus, schema: AspectSchema, cfg: TrainConfig,
          enc_cfg: EncoderConfig | None = None,
          precomputed: dict | None = None) -> tuple[Checkpoint, list[EpochStats]]:
    """Optimize the joint objective; return the best-validation checkpoint.

    Pretraining epochs (if any) step the aspect loss alone; joint epochs step
    lambda * L_aspect + L_review. The checkpoint keeps the epoch with the
    highest validation accuracy of the review head, the only supervised
    signal available.
    """
    reviews = corpus.reviews
    labels = [POLARITY_INDEX[review_label(r, cfg.label_source)] for r in reviews]
    if enc_cfg is None:
        enc_cfg = EncoderConfig(mode="trainable", d_w=32,
                                vocab_size=len(corpus.vocab), max_len=DEFAULT_MAX_LEN)
    if enc_cfg.mode == "trainable" and enc_cfg.vocab_size != len(corpus.vocab):
        enc_cfg = replace(enc_cfg, vocab_size=len(corpus.vocab))

    ss = np.random.SeedSequence(cfg.seed)
    init_ss, shuffle_ss, neg_ss, split_ss = ss.spawn(4)
    init_rng = np.random.default_rng(init_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    neg_rng = np.random.default_rng(neg_ss)
    split_rng = np.random.default_rng(split_ss)

    n_val = max(1, int(round(cfg.val_fraction * len(reviews))))
    if len(reviews) - n_val < 1:
        raise ValueError(
            f"corpus of {len(reviews)} reviews cannot supply a train/validation split")
    split = split_rng.permutation(len(reviews))
    val_idx = split[:n_val]
    train_idx = split[n_val:]
    val_reviews = [reviews[i] for i in val_idx]
    val_labels = [labels[i] for i in val_idx]

    params = init_params(schema, enc_cfg, cfg, corpus.vocab, init_rng, precomputed)
    source = params if enc_cfg.mode == "trainable" else precomputed
    opt = make_optimizer(cfg, params)
    neg_cfg = NegSampleConfig(m=cfg.neg_samples)

    history: list[EpochStats] = []
    best: tuple[float, int, ParamSet, EpochStats] | None = None
    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    step = 0
    try:
        total = cfg.acd_pretrain_epochs + cfg.epochs
        for epoch in range(1, total + 1):
            phase = "acd" if epoch <= cfg.acd_pretrain_epochs else "joint"
            a_w, r_w = (1.0, 0.0) if phase == "acd" else (cfg.lam, 1.0)
            order = shuffle_rng.permutation(train_idx)
            sum_acd = 0.0
            sum_rp = 0.0
            for start in range(0, len(order), cfg.batch):
                batch_ids = order[start:start + cfg.batch]
                batch = [reviews[i] for i in batch_ids]
                B = len(batch)
                if cfg.neg_samples > 0 and B >= 2:
                    negs = sample_negatives(B, neg_cfg, rng=neg_rng)
                else:
                    negs = [np.zeros(0, dtype=np.intp)] * B
                params.zero_grads()
                l_acd, l_rp = batch_step(
                    params, batch, [labels[i] for i in batch_ids], negs, source,
                    a_w, r_w, cfg.lam_acd, compute_grads=True, executor=executor)
                step += 1
                if not np.isfinite(l_acd + l_rp):
                    raise TrainingDivergedError(
                        f"non-finite loss at epoch {epoch}, step {step}")
                opt.step(params)
                sum_acd += l_acd
                sum_rp += l_rp
            val_acc, val_loss = _rp_eval(params, val_reviews, val_labels, source,
                                         cfg.acd_threshold)
            stats = EpochStats(epoch=epoch, phase=phase,
                               loss=cfg.lam * sum_acd + sum_rp,
                               loss_acd=sum_acd, loss_rp=sum_rp,
                               val_rp_acc=val_acc, val_rp_loss=val_loss)
            history.append(stats)
            if best is None or val_acc > best[0]:
                best = (val_acc, epoch, params.copy(), stats)
    finally:
        if executor is not None:
            executor.shutdown()

    assert best is not None
    _, best_epoch, best_params, best_stats = best
    ckpt = Checkpoint(
        version=CKPT_VERSION,
        enc_cfg=enc_cfg,
        train_cfg=cfg,
        params=best_params,
        epoch=best_epoch,
        losses={"loss": best_stats.loss, "loss_acd": best_stats.loss_acd,
                "loss_rp": best_stats.loss_rp, "val_rp_acc": best_stats.val_rp_acc,
                "val_rp_loss": best_stats.val_rp_loss},
        vocab_tokens=corpus.vocab.id_to_token[2:],
        schema_obj=schema.to_obj(),
        vocab_fp=corpus.vocab.fingerprint(),
        schema_fp=schema.fingerprint(),
    )
    return ckpt, history


def inference_source(ckpt: Checkpoint, precomputed: dict | None = None):
    """The encode() source matching a checkpoint's encoder mode."""
    if ckpt.enc_cfg.mode == "trainable":
        return ckpt.params
    if precomputed is None:
        raise ValueError("checkpoint was trained on precomputed embeddings; "
                         "an embedding file is required")
    return precomputed


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    buf = bytearray()
    buf += CKPT_MAGIC
    buf += struct.pack("<I", ckpt.version)
    names = ckpt.params.names()
    buf += struct.pack("<I", len(names))
    for name in names:
        arr = np.ascontiguousarray(ckpt.params[name], dtype="<f8")
        nb = name.encode("utf-8")
        buf += struct.pack("<I", len(nb))
        buf += nb
        buf += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            buf += struct.pack("<I", d)
        buf += arr.tobytes()
    cfg_obj = {
        "enc": asdict(ckpt.enc_cfg),
        "train": asdict(ckpt.train_cfg),
        "epoch": ckpt.epoch,
        "losses": ckpt.losses,
        "vocab": ckpt.vocab_tokens,
        "schema": ckpt.schema_obj,
        "vocab_fp": ckpt.vocab_fp,
        "schema_fp": ckpt.schema_fp,
    }
    cb = json.dumps(cfg_obj, sort_keys=True, separators=(",", ":"),
                    ensure_ascii=True).encode("utf-8")
    buf += struct.pack("<I", len(cb))
    buf += cb
    buf += hashlib.sha256(bytes(buf)).digest()[:8]
    with open(path, "wb") as f:
        f.write(bytes(buf))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(CKPT_MAGIC) or data[:len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise ValueError(f"not a model checkpoint: {path}")
    pos = len(CKPT_MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise ValueError(f"truncated checkpoint while reading {what}")
        out = data[pos:pos + n]
        pos += n
        return out

    (version,) = struct.unpack("<I", take(4, "version"))
    if version != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version} (expected {CKPT_VERSION})")
    (n_tensors,) = struct.unpack("<I", take(4, "tensor count"))
    params = ParamSet()
    for t in range(n_tensors):
        (name_len,) = struct.unpack("<I", take(4, f"tensor {t} name length"))
        name = take(name_len, f"tensor {t} name").decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4, f"{name} rank"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"{name} shape"))
        count = int(np.prod(shape)) if ndim else 1
        flat = np.frombuffer(take(8 * count, f"{name} data"), dtype="<f8")
        params.add(name, flat.reshape(shape))
    (cfg_len,) = struct.unpack("<I", take(4, "config length"))
    cfg_obj = json.loads(take(cfg_len, "config block").decode("utf-8"))
    checksum = take(8, "checksum")
    if pos != len(data):
        raise ValueError(f"trailing bytes in checkpoint: {len(data) - pos}")
    if hashlib.sha256(data[:-8]).digest()[:8] != checksum:
        raise ValueError("checkpoint checksum mismatch (file corrupt)")

    ckpt = Checkpoint(
        version=version,
        enc_cfg=EncoderConfig(**cfg_obj["enc"]),
        train_cfg=TrainConfig(**cfg_obj["train"]),
        params=params,
        epoch=cfg_obj["epoch"],
        losses=cfg_obj["losses"],
        vocab_tokens=list(cfg_obj["vocab"]),
        schema_obj=cfg_obj["schema"],
        vocab_fp=cfg_obj["vocab_fp"],
        schema_fp=cfg_obj["schema_fp"],
    )
    if ckpt.vocabulary().fingerprint() != ckpt.vocab_fp:
        raise ValueError("checkpoint vocabulary fingerprint mismatch")
    if ckpt.schema().fingerprint() != ckpt.schema_fp:
        raise ValueError("checkpoint schema fingerprint mismatch")
    return ckpt


def make_toy_case(rng: np.random.Generator, vocab_size: int = 12,
                  batch: int = 3, m: int = 2):
    """Small random instance of the whole model for finite-difference checks."""
    d_w = int(rng.integers(4, 9))
    n_aspects = int(rng.integers(2, 4))
    d_h = int(rng.integers(3, 7))
    params = ParamSet()
    params.add(EMBEDDING_PARAM, rng.uniform(-0.5, 0.5, size=(vocab_size, d_w)))
    params.add("W1", 0.5 * rng.normal(size=(n_aspects, d_w)))
    params.add("b1", 0.1 * rng.normal(size=n_aspects))
    params.add("T", 0.7 * rng.normal(size=(n_aspects, d_w)))
    params.add("W2", 0.5 * rng.normal(size=(d_h, d_w)))
    params.add("b2", 0.1 * rng.normal(size=d_h))
    params.add("W3", 0.5 * rng.normal(size=(N_CLASSES, d_h)))
    params.add("b3", 0.1 * rng.normal(size=N_CLASSES))
    reviews = [
        Review(id=f"toy-{i}",
               tokens=[int(t) for t in rng.integers(0, vocab_size,
                                                    size=int(rng.integers(1, 7)))])
        for i in range(batch)
    ]
    labels = [int(rng.integers(0, N_CLASSES)) for _ in range(batch)]
    if m > 0 and batch >= 2:
        negs = sample_negatives(batch, NegSampleConfig(m=m), rng=rng)
    else:
        negs = [np.zeros(0, dtype=np.intp)] * batch
    return params, reviews, labels, negs


def run_joint_gradcheck(cases: int = 100, seed: int = 0, h: float = 1e-5,
                        a_w: float = 0.3, r_w: float = 1.0,
                        lam_acd: float = 0.2) -> GradCheckReport:
    """Finite-difference sweep of the full joint loss over random toy cases."""
    rng = np.random.default_rng(seed)
    max_rel = 0.0
    worst_param = ""
    worst_index = 0
    checked = 0
    skipped = 0
    for c in range(cases):
        params, reviews, labels, negs = make_toy_case(rng, m=int(rng.integers(0, 4)))

        def loss_fn(ps, compute_grads):
            l_acd, l_rp = batch_step(ps, reviews, labels, negs, ps,
                                     a_w, r_w, lam_acd, compute_grads=compute_grads)
            return a_w * l_acd + r_w * l_rp

        report = check_gradient(loss_fn, params, h=h,
                                kink_fn=lambda ps: batch_kinks(ps, reviews, negs, ps))
        checked += report.n_checked
        skipped += report.n_skipped
        if report.max_rel_err > max_rel:
            max_rel = report.max_rel_err
            worst_param = f"case {c}: {report.worst_param}"
            worst_index = report.worst_index
    return GradCheckReport(max_rel, worst_param, worst_index, checked, skipped)
