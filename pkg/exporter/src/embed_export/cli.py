"""Command line: embed a review corpus for the engine's precomputed mode.

Exit codes: 0 success, 1 runtime failure (bad files, missing model),
2 usage error (argparse convention). Re-running with the same inputs
and the same model weights yields a byte-identical output file.
"""

import argparse
import sys

from .encoder import DEFAULT_MAX_LEN, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="export pooled and per-word review embeddings from a "
                    "pretrained masked-LM encoder")
    parser.add_argument("--corpus", required=True, help="JSON-lines review file")
    parser.add_argument("--model", required=True,
                        help="local directory (or installed name) of the encoder")
    parser.add_argument("--out", required=True, help="output embedding file")
    parser.add_argument("--max-len", type=int, default=DEFAULT_MAX_LEN,
                        help="word cap per review, matching the engine "
                             "(default %(default)s)")
    parser.add_argument("--schema", default=None,
                        help="aspect schema file; adds one aspect::<name> "
                             "seed record per aspect")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report = export_embeddings(args.corpus, args.model, args.out,
                                   max_len=args.max_len, schema_path=args.schema)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    parts = [f"wrote {report.n_written} review records"]
    if report.n_aspects:
        parts.append(f"and {report.n_aspects} aspect seed records")
    skipped = f", {report.n_skipped} skipped" if report.n_skipped else ""
    print(f"{' '.join(parts)} (d_w={report.d_w}{skipped}) to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
