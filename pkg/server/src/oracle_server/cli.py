"""Command line entry point: `oracle-server --adapter PATH --weights PATH
--host H --port P`."""
from __future__ import annotations

import argparse
import sys

from .adapter import ParseError, load_adapter
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="oracle-server",
        description="Expose a classifier's logits (and optionally gradients) "
                    "over a small JSON-over-HTTP protocol.")
    parser.add_argument("--adapter", default="reference",
                        help="'reference' for the bundled numpy adapter, or a "
                             "module path exposing make_adapter(weights_path)")
    parser.add_argument("--weights", default=None,
                        help="path to a JSON weights file for the adapter")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8787)
    parser.add_argument("--verbose", action="store_true",
                        help="log each request to stderr")
    args = parser.parse_args(argv)

    try:
        adapter = load_adapter(args.adapter, args.weights)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"serving {adapter.name} ({adapter.num_classes} classes, "
          f"shape {list(adapter.shape)}) on http://{args.host}:{args.port}",
          file=sys.stderr)
    try:
        serve(adapter, args.host, args.port, verbose=args.verbose)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
