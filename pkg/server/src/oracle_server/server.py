"""HTTP layer for the oracle service.

Wire protocol:
    POST /logits   {"image": [f32...], "shape": [ints]}
                   -> 200 {"logits": [f32...]}
    POST /gradient {"image": [...], "shape": [...], "mode": str,
                    "t": int, "loss": str}
                   -> 200 {"gradient": [f32...]}
    GET  /meta     -> 200 {"num_classes": int, "shape": [ints], "name": str}

Errors: 400 {"error": "..."} on malformed body, shape mismatch, or
non-finite adapter output; 404 on unknown paths and on /gradient when the
adapter provides no gradients.  The server keeps no per-request state and
does no query counting; budgets are the client's concern.
"""
from __future__ import annotations

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer, ThreadingHTTPServer

__all__ = ["make_server", "serve"]


class BadRequest(Exception):
    pass


def _validated_image(body: dict, adapter) -> list:
    image = body.get("image")
    if not isinstance(image, list) or not image:
        raise BadRequest("missing or empty 'image' list")
    shape = body.get("shape")
    if not isinstance(shape, list) or not all(isinstance(s, int) for s in shape):
        raise BadRequest("missing or malformed 'shape' list")
    if tuple(shape) != tuple(adapter.shape):
        raise BadRequest(
            f"shape {shape} does not match model shape {list(adapter.shape)}")
    expected = math.prod(shape)
    if len(image) != expected:
        raise BadRequest(f"image has {len(image)} values, shape implies {expected}")
    try:
        image = [float(v) for v in image]
    except (TypeError, ValueError) as exc:
        raise BadRequest("image values must be numbers") from exc
    if not all(math.isfinite(v) for v in image):
        raise BadRequest("image contains non-finite values")
    return image


def _finite_vector(values, n: int, what: str) -> list:
    values = [float(v) for v in values]
    if len(values) != n or not all(math.isfinite(v) for v in values):
        raise BadRequest(f"adapter produced invalid {what}")
    return values


class OracleRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "oracle-server/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        if getattr(self.server, "verbose", False):
            super().log_message(fmt, *args)

    def _send_json(self, status: int, payload: dict):
        data = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_body(self) -> dict:
        length = self.headers.get("Content-Length")
        try:
            raw = self.rfile.read(int(length)) if length else b""
            body = json.loads(raw)
        except (TypeError, ValueError) as exc:
            raise BadRequest(f"body is not valid JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        return body

    def do_GET(self):
        if self.path != "/meta":
            self._send_json(404, {"error": f"no such endpoint {self.path}"})
            return
        adapter = self.server.adapter
        self._send_json(200, {
            "num_classes": int(adapter.num_classes),
            "shape": [int(s) for s in adapter.shape],
            "name": str(adapter.name),
        })

    def do_POST(self):
        adapter = self.server.adapter
        try:
            if self.path == "/logits":
                body = self._read_body()
                image = _validated_image(body, adapter)
                with self.server.adapter_lock:
                    logits = adapter.predict(image)
                logits = _finite_vector(logits, adapter.num_classes, "logits")
                self._send_json(200, {"logits": logits})
            elif self.path == "/gradient":
                if getattr(adapter, "gradient", None) is None:
                    self._send_json(404, {"error": "adapter has no gradients"})
                    return
                body = self._read_body()
                image = _validated_image(body, adapter)
                mode = body.get("mode")
                t = body.get("t")
                loss = body.get("loss")
                if mode not in ("untargeted", "targeted"):
                    raise BadRequest(f"bad mode {mode!r}")
                if not isinstance(t, int) or not 0 <= t < adapter.num_classes:
                    raise BadRequest(f"bad class index {t!r}")
                if loss is not None and loss not in ("margin", "neg-xent"):
                    raise BadRequest(f"bad loss {loss!r}")
                with self.server.adapter_lock:
                    grad = adapter.gradient(image, mode, t, loss)
                grad = _finite_vector(grad, len(image), "gradient")
                self._send_json(200, {"gradient": grad})
            else:
                self._send_json(404, {"error": f"no such endpoint {self.path}"})
        except BadRequest as exc:
            self._send_json(400, {"error": str(exc)})
        except Exception as exc:  # adapter bugs must not kill the server
            self._send_json(400, {"error": f"adapter error: {exc}"})


class _SerialLock:
    """No-op stand-in so reentrant adapters skip serialization."""

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def make_server(adapter, host: str = "127.0.0.1", port: int = 0,
                verbose: bool = False) -> HTTPServer:
    """Build (but do not start) the HTTP server; port 0 picks a free port.

    Concurrent handling only when the adapter declares itself reentrant;
    otherwise adapter calls are serialized behind a lock.
    """
    reentrant = bool(getattr(adapter, "reentrant", False))
    cls = ThreadingHTTPServer if reentrant else HTTPServer
    httpd = cls((host, port), OracleRequestHandler)
    httpd.adapter = adapter
    httpd.adapter_lock = _SerialLock() if reentrant else threading.Lock()
    httpd.verbose = verbose
    return httpd


def serve(adapter, host: str = "127.0.0.1", port: int = 8787,
          verbose: bool = False):
    """Serve forever (Ctrl-C to stop)."""
    httpd = make_server(adapter, host, port, verbose)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()
