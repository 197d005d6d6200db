import json
import threading

import pytest

from oracle_server import ReferenceAdapter, make_server

LINEAR_FIXTURE = {"kind": "linear", "W": [[0.0, 0.0], [1.0, 1.0]], "b": [0.6, 0.0]}


@pytest.fixture
def linear_weights(tmp_path):
    path = tmp_path / "linear.json"
    path.write_text(json.dumps(LINEAR_FIXTURE))
    return str(path)


@pytest.fixture
def mlp2_weights(tmp_path):
    weights = {
        "kind": "mlp2",
        "activation": "tanh",
        "W1": [[0.4, -0.2, 0.1], [-0.3, 0.5, 0.2], [0.1, 0.1, -0.4], [0.2, -0.1, 0.3]],
        "b1": [0.05, -0.1, 0.0, 0.2],
        "W2": [[0.5, -0.2, 0.3, 0.1], [-0.4, 0.2, 0.1, -0.3], [0.1, 0.6, -0.2, 0.2]],
        "b2": [0.0, 0.1, -0.05],
    }
    path = tmp_path / "mlp2.json"
    path.write_text(json.dumps(weights))
    return str(path)


@pytest.fixture
def serve_adapter():
    """Factory fixture: start a server on a free port in a daemon thread
    and return its base URL; everything is torn down at test exit."""
    cleanups = []

    def start(adapter):
        httpd = make_server(adapter, "127.0.0.1", 0)
        thread = threading.Thread(target=httpd.serve_forever, daemon=True)
        thread.start()
        host, port = httpd.server_address

        def shutdown():
            httpd.shutdown()
            httpd.server_close()
            thread.join(timeout=5)

        cleanups.append(shutdown)
        return f"http://{host}:{port}"

    yield start
    for shutdown in cleanups:
        shutdown()


@pytest.fixture
def linear_server(serve_adapter, linear_weights):
    return serve_adapter(ReferenceAdapter(linear_weights))


@pytest.fixture
def mlp2_server(serve_adapter, mlp2_weights):
    return serve_adapter(ReferenceAdapter(mlp2_weights))
