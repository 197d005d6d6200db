"""oracle-server: a thin HTTP service exposing any classifier as a
logits (and optional gradient) oracle over a small JSON wire protocol."""
from .adapter import ParseError, ReferenceAdapter, load_adapter
from .server import make_server, serve

__all__ = ["ParseError", "ReferenceAdapter", "load_adapter", "make_server",
           "serve"]
