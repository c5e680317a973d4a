"""Command line for the embedding extractor."""

from __future__ import annotations

import argparse
import sys

from .extract import DEFAULT_CLASS_TEMPLATE, DEFAULT_COMPOSED_TEMPLATE, ExtractSpec, extract


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embextract",
        description="Encode image folders and prompts into LEMB/LLAB embedding worlds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="encode a <domain>/<class>/<image> tree")
    p.add_argument("--root", required=True, help="dataset root directory")
    p.add_argument("--model", required=True, help="model id: toy[:dim] or clip:<hf-id>")
    p.add_argument("--out", required=True, help="output world directory")
    p.add_argument("--sources", required=True, help="comma-separated source domain names")
    p.add_argument("--target", required=True, help="target domain name (prompt-only is fine)")
    p.add_argument("--class-template", default=DEFAULT_CLASS_TEMPLATE)
    p.add_argument("--domain-template", default=DEFAULT_COMPOSED_TEMPLATE)
    args = parser.parse_args(argv)

    try:
        spec = ExtractSpec(
            root=args.root,
            model=args.model,
            out=args.out,
            sources=[s for s in args.sources.split(",") if s],
            target=args.target,
            class_template=args.class_template,
            composed_template=args.domain_template,
        )
        out = extract(spec)
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"world written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
