"""Command line interface for the CLS-embedding exporter."""

from __future__ import annotations

import argparse
import sys

from .exporter import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_MODEL,
    DEFAULT_SOURCE_TAG,
    ExportError,
    export_embeddings,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clsembed",
        description="export transformer CLS-token embeddings of SMILES "
                    "strings as a descriptor CSV",
    )
    parser.add_argument("--smiles-file", required=True,
                        help="text file with one SMILES per line")
    parser.add_argument("--out", required=True, help="output descriptor CSV")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model id or local directory (default %(default)s)")
    parser.add_argument("--max-tokens", type=int, default=DEFAULT_MAX_TOKENS,
                        help="skip SMILES longer than this many tokens "
                             "(default %(default)s)")
    parser.add_argument("--source-tag", default=DEFAULT_SOURCE_TAG,
                        help="source tag written to the CSV header "
                             "(default %(default)s)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        from transformers.utils import logging as hf_logging
        hf_logging.disable_progress_bar()
    except Exception:
        pass
    try:
        result = export_embeddings(
            args.smiles_file, args.out, model_ref=args.model,
            max_tokens=args.max_tokens, source_tag=args.source_tag,
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    skipped = f", skipped {result.n_skipped}" if result.n_skipped else ""
    print(f"exported {result.n_written} embeddings (dim {result.dim}) "
          f"to {args.out}{skipped}")
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
