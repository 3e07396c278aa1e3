"""Command-line wrapper: `epne-export --data d.jsonl --model <id> --out d.epne`.

Exit codes: 0 success, 1 usage error, 2 export/data error.
"""

from __future__ import annotations

import argparse
import sys

from .export import ExportConfig, ExportError, export


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise _Usage(f"{self.format_usage()}{message}")


class _Usage(Exception):
    pass


def build_parser() -> _Parser:
    parser = _Parser(prog="epne-export", description=__doc__)
    parser.add_argument("--data", required=True, help="tokenized dataset (JSONL)")
    parser.add_argument("--model", required=True,
                        help="encoder id or local directory (any AutoModel-loadable)")
    parser.add_argument("--layer", type=int, default=-1,
                        help="hidden-state index to export; -1 is the final layer")
    parser.add_argument("--pool", choices=["first", "mean"], default="first",
                        help="subword-to-token pooling")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=8)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--out", required=True, help="EPNE output path")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        config = ExportConfig(model=args.model, layer=args.layer, pool=args.pool,
                              batch_size=args.batch_size, device=args.device)
        counts = export(args.data, config, args.out)
    except ExportError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return 2
    total = sum(counts.values())
    print(f"{len(counts)} sentences, {total} token vectors -> {args.out}")
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
