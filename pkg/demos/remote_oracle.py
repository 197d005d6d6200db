"""Attack a model served over HTTP.

The oracle-server package (server/) exposes any classifier behind three
endpoints (/logits, /gradient, /meta); the engine's RemoteOracle speaks
the same protocol.  This demo saves a benchmark target to the shared JSON
weights format, serves it in-process with the bundled reference adapter,
and attacks it over the wire.  Run (after installing both packages):

    python3 demos/remote_oracle.py
"""
import tempfile
import threading

from oracle_server import ReferenceAdapter, make_server

from switchattack import (
    AttackConfig,
    BuiltinSurrogate,
    ImageTensor,
    RemoteOracle,
    generate_synthetic_dataset,
    run_experiment,
)
from switchattack.models import save_model


def main():
    images, labels, target, surrogate = generate_synthetic_dataset(n=30, seed=0)
    with tempfile.NamedTemporaryFile(suffix=".json") as fh:
        save_model(target, fh.name)
        httpd = make_server(ReferenceAdapter(fh.name), "127.0.0.1", 0)
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        host, port = httpd.server_address
        url = f"http://{host}:{port}"
        print(f"serving target at {url}")

        oracle = RemoteOracle(url)
        print(f"remote model: {oracle.name}, {oracle.num_classes} classes")

        cfg = AttackConfig(variant="switch", p=2.0, epsilon=1.0, budget=10000)
        dataset = [(ImageTensor(x), int(y)) for x, y in zip(images, labels)]
        report = run_experiment(
            dataset, oracle, lambda rng, o: BuiltinSurrogate(surrogate), cfg,
            master_seed=7, parallelism=1)
        agg = report.aggregates
        print(f"success rate {agg['success_rate']:.3f}, "
              f"avg queries {agg['avg_query_all']:.1f}")
        httpd.shutdown()
        httpd.server_close()


if __name__ == "__main__":
    main()
