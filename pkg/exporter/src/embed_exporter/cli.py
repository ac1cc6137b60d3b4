"""Exporter command line: export text or image embeddings, or serve /embed."""

from __future__ import annotations

import argparse
import sys

from .encoders import DEFAULT_CLIP_MODEL, EncoderError, encoder_from_spec
from .export import ExportError, ExportJob, export_image_embeddings, export_text_embeddings
from .service import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-exporter", description=__doc__)
    parser.add_argument(
        "--model",
        default=DEFAULT_CLIP_MODEL,
        help='encoder: a CLIP model name, or "hash:<dim>" for the deterministic fixture encoder',
    )
    parser.add_argument("--device", default="cpu")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-text", help="embed a newline-delimited sentence list")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--batch-size", type=int, default=32)

    p = sub.add_parser("export-images", help='embed images from a JSONL manifest of {"id","path"}')
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--batch-size", type=int, default=16)

    p = sub.add_parser("serve", help="run the /embed HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        encoder = encoder_from_spec(args.model, device=args.device)
        if args.command == "export-text":
            job = ExportJob(encoder, args.input, args.output, args.batch_size)
            count = export_text_embeddings(job)
            print(f"wrote {args.output} ({count} records, dim {encoder.dim})")
        elif args.command == "export-images":
            job = ExportJob(encoder, args.input, args.output, args.batch_size)
            count = export_image_embeddings(job)
            print(f"wrote {args.output} ({count} records, dim {encoder.dim})")
        else:
            serve(encoder, host=args.host, port=args.port)
        return 0
    except (EncoderError, ExportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
