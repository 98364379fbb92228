"""Command line renderer: one invocation per figure.

    searchviz --kind unique --in a.json --in b.json --out unique.png

Exit codes: 0 success, 1 bad flags, 2 schema or file errors.  Inputs are the
JSON plot-data tables the search tool exports; they are never modified.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .render import render
from .schema import SchemaError, load_table


class ConfigError(ValueError):
    """Bad flags; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="searchviz", description=__doc__)
    parser.add_argument("--kind", required=True,
                        choices=("unique", "mean", "opfreq", "cache"))
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="PATH", help="plot-data JSON; repeatable")
    parser.add_argument("--out", required=True, help="image output path")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        out = Path(args.out)
        if not out.parent.is_dir():
            raise FileNotFoundError(f"output directory does not exist: {out.parent}")
        tables = []
        for source in args.inputs:
            path = Path(source)
            if not path.is_file():
                raise FileNotFoundError(f"input not found: {path}")
            tables.append(load_table(path))
        written = render(args.kind, tables, out)
        if not written.is_file() or written.stat().st_size == 0:
            raise OSError(f"render produced no output at {written}")
        print(json.dumps({"out": str(written), "kind": args.kind,
                          "inputs": len(tables)}, sort_keys=True))
        return 0
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (SchemaError, FileNotFoundError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def entry() -> int:
    return main()


if __name__ == "__main__":
    sys.exit(main())
