"""Command line surface: train, eval, predict, inspect, stats, gencorpus, gradcheck.

Exit codes: 0 success, 1 runtime failure (bad files, diverged training),
2 usage error (argparse convention). Identical inputs and seeds give
byte-identical output files.

Config files are flat key=value text, one pair per line, # comments allowed.
Recognized keys: d_w, d_h, max_len, min_count, lambda, lambda_acd,
neg_samples, acd_threshold, epochs, acd_pretrain_epochs, batch, lr,
optimizer, seed, label_source, encoder_mode, embeddings_path, val_fraction,
workers. Command line flags override file values.
"""

import argparse
import json
import sys

import numpy as np

from .acd import AspectModel
from .corpus import (budget_subsample, corpus_stats, load_corpus, load_schema,
                     save_corpus, save_schema)
from .encoder import EncoderConfig, encode, load_precomputed
from .pyramid import PyramidHead, forward, output_payload
from .report import (evaluate_corpus, render_pyramid_figure, report_lines,
                     write_history, write_report)
from .synth import default_gen_config, load_gen_config, synth_corpus
from .trainer import (TrainConfig, inference_source, load_checkpoint,
                      run_joint_gradcheck, save_checkpoint, train)

CONFIG_CASTS = {
    "d_w": int, "d_h": int, "max_len": int, "min_count": int,
    "lambda": float, "lambda_acd": float, "neg_samples": int,
    "acd_threshold": float, "epochs": int, "acd_pretrain_epochs": int,
    "batch": int, "lr": float, "optimizer": str, "seed": int,
    "label_source": str, "encoder_mode": str, "embeddings_path": str,
    "val_fraction": float, "workers": int,
}

# argparse dest for each config key ("lambda" is a Python keyword)
KEY_DEST = {key: ("lam" if key == "lambda" else key) for key in CONFIG_CASTS}


def parse_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key or not val:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            if key not in CONFIG_CASTS:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                values[key] = CONFIG_CASTS[key](val)
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad {CONFIG_CASTS[key].__name__} "
                    f"value {val!r} for {key}") from None
    return values


def merged_settings(args) -> dict:
    """Config file values with any explicitly passed flags layered on top."""
    values = parse_config_file(args.config) if getattr(args, "config", None) else {}
    for key, dest in KEY_DEST.items():
        flag = getattr(args, dest, None)
        if flag is not None:
            values[key] = flag
    return values


def add_config_flags(sub) -> None:
    for key, caster in CONFIG_CASTS.items():
        sub.add_argument("--" + key.replace("_", "-"), dest=KEY_DEST[key],
                         type=caster, default=None, help=f"override config {key}")


def settings_to_configs(values: dict, vocab_size: int) -> tuple[TrainConfig, EncoderConfig]:
    tc = {}
    for key in ("epochs", "batch", "lr", "optimizer", "neg_samples", "acd_threshold",
                "seed", "acd_pretrain_epochs", "label_source", "d_h",
                "val_fraction", "workers"):
        if key in values:
            tc[key] = values[key]
    if "lambda" in values:
        tc["lam"] = values["lambda"]
    if "lambda_acd" in values:
        tc["lam_acd"] = values["lambda_acd"]
    ec = {"vocab_size": vocab_size}
    for key, field in (("encoder_mode", "mode"), ("d_w", "d_w"), ("max_len", "max_len")):
        if key in values:
            ec[field] = values[key]
    return TrainConfig(**tc), EncoderConfig(**ec)


def _load_embeddings(values: dict, explicit_path=None, expected_d_w=None):
    path = explicit_path or values.get("embeddings_path")
    if path is None:
        raise ValueError("precomputed encoder mode needs embeddings_path "
                         "(config key or --embeddings)")
    return load_precomputed(path, expected_d_w=expected_d_w)


def cmd_train(args) -> int:
    values = merged_settings(args)
    corpus = load_corpus(args.corpus,
                         max_len=values.get("max_len", EncoderConfig.max_len),
                         min_count=values.get("min_count", 2))
    schema = load_schema(args.schema)
    train_cfg, enc_cfg = settings_to_configs(values, len(corpus.vocab))

    precomputed = None
    if enc_cfg.mode == "precomputed":
        precomputed = _load_embeddings(values, args.embeddings)
        d_w = next(iter(precomputed.values())).z.shape[0]
        enc_cfg = EncoderConfig(mode="precomputed", d_w=d_w,
                                vocab_size=len(corpus.vocab), max_len=enc_cfg.max_len)

    ckpt, history = train(corpus, schema, train_cfg, enc_cfg, precomputed=precomputed)
    for h in history:
        print(f"epoch {h.epoch} [{h.phase}] loss {h.loss:.4f} "
              f"acd {h.loss_acd:.4f} rp {h.loss_rp:.4f} val_acc {h.val_rp_acc:.4f}")
    save_checkpoint(ckpt, args.out)
    if args.report_dir:
        write_history(history, args.report_dir)
    print(f"saved checkpoint to {args.out} (kept epoch {ckpt.epoch})")
    return 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    corpus = load_corpus(args.corpus, vocab=ckpt.vocabulary(),
                         max_len=ckpt.enc_cfg.max_len)
    if args.budget is not None:
        corpus = budget_subsample(corpus, args.budget, args.seed)
    precomputed = None
    if ckpt.enc_cfg.mode == "precomputed":
        precomputed = _load_embeddings({}, args.embeddings, ckpt.enc_cfg.d_w)
    result = evaluate_corpus(ckpt, corpus, precomputed, acsa_on=args.acsa_on)
    print("\n".join(report_lines(result)))
    if args.report_dir:
        paths = write_report(result, args.report_dir)
        print("wrote " + " ".join(paths))
    return 0


def _payloads(ckpt, corpus, precomputed):
    source = inference_source(ckpt, precomputed)
    model = AspectModel.from_params(ckpt.params)
    head = PyramidHead.from_params(ckpt.params)
    schema = ckpt.schema()
    for review in corpus.reviews:
        out = forward(encode(review, source), model, head, ckpt.train_cfg.acd_threshold)
        yield review, output_payload(review.id, out, schema)


def cmd_predict(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    corpus = load_corpus(args.corpus, vocab=ckpt.vocabulary(),
                         max_len=ckpt.enc_cfg.max_len)
    precomputed = None
    if ckpt.enc_cfg.mode == "precomputed":
        precomputed = _load_embeddings({}, args.embeddings, ckpt.enc_cfg.d_w)
    with open(args.out, "w", encoding="utf-8") as fh:
        count = 0
        for _, payload in _payloads(ckpt, corpus, precomputed):
            fh.write(json.dumps(payload, sort_keys=True) + "\n")
            count += 1
    print(f"wrote {count} predictions to {args.out}")
    return 0


def cmd_inspect(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    vocab = ckpt.vocabulary()
    corpus = load_corpus(args.corpus, vocab=vocab, max_len=ckpt.enc_cfg.max_len)
    review = corpus.by_id(args.id)
    precomputed = None
    if ckpt.enc_cfg.mode == "precomputed":
        precomputed = _load_embeddings({}, args.embeddings, ckpt.enc_cfg.d_w)
    source = inference_source(ckpt, precomputed)
    out = forward(encode(review, source), AspectModel.from_params(ckpt.params),
                  PyramidHead.from_params(ckpt.params), ckpt.train_cfg.acd_threshold)
    payload = output_payload(review.id, out, ckpt.schema())
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.figure:
        tokens = vocab.decode(review.tokens)[:len(payload["word_sent"])]
        render_pyramid_figure(payload, args.figure, tokens=tokens)
        print(f"wrote {args.figure}", file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    corpus = load_corpus(args.corpus)
    st = corpus_stats(corpus)
    print(f"split\t{st.split}")
    print(f"n_reviews\t{st.n_reviews}")
    print(f"ma\t{st.ma:.4f}")
    print(f"mas\t{st.mas:.4f}")
    for key in sorted(st.overall):
        print(f"overall\t{key}\t{st.overall[key]}")
    for key in sorted(st.aspect_sent):
        print(f"aspect_sent\t{key}\t{st.aspect_sent[key]}")
    return 0


def cmd_gencorpus(args) -> int:
    cfg = load_gen_config(args.config) if args.config else default_gen_config()
    corpus = synth_corpus(cfg, args.seed)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus.reviews)} reviews to {args.out}")
    if args.schema_out:
        save_schema(cfg.schema(), args.schema_out)
        print(f"wrote schema to {args.schema_out}")
    return 0


def cmd_gradcheck(args) -> int:
    values = merged_settings(args)
    report = run_joint_gradcheck(
        cases=args.cases,
        seed=values.get("seed", 0),
        a_w=values.get("lambda", 0.3),
        lam_acd=values.get("lambda_acd", 0.2))
    where = f" at {report.worst_param} [{report.worst_index}]" if report.worst_param else ""
    print(f"max rel err {report.max_rel_err:.3e}{where} over {report.n_checked} "
          f"coordinates ({report.n_skipped} skipped near kinks)")
    return 0 if report.max_rel_err < 1e-4 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dspn",
        description="Pyramid sentiment model: aspect detection, aspect "
                    "sentiment, and rating prediction trained from star labels.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--config", required=True, help="key=value training config")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--embeddings", default=None,
                   help="precomputed embedding file (overrides embeddings_path)")
    p.add_argument("--report-dir", default=None,
                   help="also write history.tsv and training curves here")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("eval", help="score a labeled corpus")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--budget", type=int, default=None,
                   help="keep only this many gold aspect labels")
    p.add_argument("--seed", type=int, default=0, help="budget subsampling seed")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--acsa-on", choices=("gold", "detected"), default="gold",
                   help="score aspect sentiment on gold or on detected aspects")
    p.add_argument("--report-dir", default=None,
                   help="write report files and figures here")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("predict", help="write one prediction object per review")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", default=None)
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("inspect", help="print the full pyramid for one review")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--corpus", required=True, help="corpus containing the review")
    p.add_argument("--id", required=True)
    p.add_argument("--embeddings", default=None)
    p.add_argument("--figure", default=None, help="also render a case-study figure")
    p.set_defaults(func=cmd_inspect)

    p = subs.add_parser("stats", help="label and aspect statistics for a corpus")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_stats)

    p = subs.add_parser("gencorpus", help="generate a synthetic labeled corpus")
    p.add_argument("--config", default=None, help="generator config (JSON)")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schema-out", default=None,
                   help="also write the generator's aspect schema")
    p.set_defaults(func=cmd_gencorpus)

    p = subs.add_parser("gradcheck", help="finite-difference check of the joint loss")
    p.add_argument("--config", default=None, help="reads seed/lambda/lambda_acd")
    p.add_argument("--seed", dest="seed", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda-acd", dest="lambda_acd", type=float, default=None)
    p.add_argument("--cases", type=int, default=25, help="number of random toy cases")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
