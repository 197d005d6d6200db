"""End-to-end acceptance gate.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them all)
and enforces its stated runtime ceiling.  The benchmark: d=32, K=10,
N=200 Gaussian clusters, mlp2 target, distinct-seed mlp2 surrogate, l2,
eps=1.0, eta=eps/10, budget 10000, q=50, fixed seeds.
"""
import math
import time

import numpy as np
import pytest

from switchattack import (
    AttackConfig,
    AttackGoal,
    BuiltinOracle,
    BuiltinSurrogate,
    ControlledCosineSurrogate,
    ImageTensor,
    LinearModel,
    NegatedSurrogate,
    QueryLedger,
    aggregate_queries,
    attack_loss,
    emit_report,
    generate_synthetic_dataset,
    make_linear,
    make_mlp2,
    builtin_gradient,
    rgf_estimate,
    run_attack,
    run_experiment,
    run_switch,
)
from switchattack.experiment import ImageRecord
from switchattack.tensors import lp_distance

BRANCH_COSTS = {
    "switch": lambda q: {1, 2},
    "switch_rgf": lambda q: {1, 2, q + 3},
    "no_switch": lambda q: {1},
    "rgf": lambda q: {q + 1},
}


def report_line(name, ok):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, name


@pytest.fixture(scope="module")
def benchmark():
    images, labels, target, surrogate = generate_synthetic_dataset(
        d=32, num_classes=10, n=200, separation=1.1, seed=0,
        model_kind="mlp2", hidden=64, surrogate_hidden=48)
    dataset = [(ImageTensor(x), int(y)) for x, y in zip(images, labels)]
    return dataset, BuiltinOracle(target), BuiltinSurrogate(surrogate)


@pytest.fixture(scope="module")
def benchmark_reports(benchmark):
    dataset, oracle, surrogate = benchmark
    reports = {}
    for variant in ("no_switch", "switch", "switch_rgf", "rgf"):
        cfg = AttackConfig(variant=variant, p=2.0, epsilon=1.0, budget=10000,
                           q=50)
        factory = None if variant == "rgf" else (lambda rng, o: surrogate)
        reports[variant] = run_experiment(dataset, oracle, factory, cfg,
                                          master_seed=123, parallelism=4)
    return reports


def test_gradient_correctness(finite_difference_gradient):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for kind in ("linear", "mlp2"):
        for loss in ("margin", "neg-xent"):
            for _ in range(100):
                d, k = int(rng.integers(3, 12)), int(rng.integers(2, 6))
                model = make_linear(d, k, rng) if kind == "linear" \
                    else make_mlp2(d, int(rng.integers(4, 20)), k, rng)
                goal = AttackGoal(
                    "targeted" if rng.integers(2) else "untargeted",
                    int(rng.integers(k)))
                x = rng.uniform(0, 1, d)
                analytic = builtin_gradient(model, x, goal, loss)
                numeric = finite_difference_gradient(
                    lambda z: attack_loss(model.logits(z), goal, loss), x,
                    step=1e-3)
                denom = max(np.linalg.norm(numeric), 1e-8)
                worst = max(worst,
                            np.linalg.norm(analytic - numeric) / denom)
    elapsed = time.perf_counter() - t0
    report_line("gradient-correctness", worst < 1e-4 and elapsed < 5.0)


def test_linear_mirror_exactness():
    t0 = time.perf_counter()
    # two-class linear target: the untargeted margin loss is exactly linear
    target = BuiltinOracle(LinearModel([[0.0, 0.0], [1.0, 1.0]], [0.6, 0.0]))
    surrogate = NegatedSurrogate(BuiltinSurrogate(target.model))
    cfg = AttackConfig(variant="switch", epsilon=100.0, eta=0.02, budget=1000)
    res = run_switch(np.array([0.1, 0.1], dtype=np.float32),
                     AttackGoal("untargeted", 0), target, surrogate, cfg)
    all_switched = bool(res.iterations) and all(
        t.branch == "switch_accepted" for t in res.iterations)
    accepted = [res.iterations[0].l_last] + [t.l2 for t in res.iterations]
    increasing = all(b > a for a, b in zip(accepted, accepted[1:]))
    elapsed = time.perf_counter() - t0
    report_line("linear-mirror-exactness",
                res.outcome == "success" and all_switched and increasing
                and elapsed < 1.0)


@pytest.fixture(scope="module")
def audit_corpus():
    """>=1000 randomized attack runs across all four variants, with
    accepted iterates recorded for the feasibility audit."""
    rng = np.random.default_rng(777)
    runs = []
    for i in range(1000):
        d = int(rng.integers(3, 10))
        k = int(rng.integers(2, 6))
        target_model = make_linear(d, k, rng) if rng.integers(2) \
            else make_mlp2(d, int(rng.integers(4, 12)), k, rng)
        surrogate_model = make_linear(d, k, rng) if rng.integers(2) \
            else make_mlp2(d, int(rng.integers(4, 12)), k, rng)
        variant = ("switch", "switch_rgf", "no_switch", "rgf")[i % 4]
        cfg = AttackConfig(
            p=2.0 if rng.integers(2) else math.inf,
            epsilon=float(rng.uniform(0.05, 1.0)),
            variant=variant,
            q=int(rng.integers(2, 9)),
            budget=int(rng.integers(20, 300)),
            record_iterates=True,
        )
        goal = AttackGoal("targeted" if rng.integers(2) else "untargeted",
                          int(rng.integers(k)))
        x = rng.uniform(0, 1, d).astype(np.float32)
        surrogate = None if variant == "rgf" \
            else BuiltinSurrogate(surrogate_model)
        result = run_attack(x, goal, BuiltinOracle(target_model), surrogate,
                            cfg, np.random.default_rng(1000 + i))
        runs.append((cfg, x, result))
    return runs


def test_query_accounting_audit(audit_corpus):
    t0 = time.perf_counter()
    violations = 0
    for cfg, _, result in audit_corpus:
        allowed = BRANCH_COSTS[cfg.variant](cfg.q)
        if any(t.queries not in allowed for t in result.iterations):
            violations += 1
        total = 1 + sum(t.queries for t in result.iterations) \
            + result.pending_queries
        if result.queries_used != total:
            violations += 1
        if result.queries_used > cfg.budget:
            violations += 1
    elapsed = time.perf_counter() - t0
    report_line("query-accounting-audit",
                len(audit_corpus) >= 1000 and violations == 0
                and elapsed < 60.0)


def test_feasibility_audit(audit_corpus):
    violations = 0
    for cfg, x, result in audit_corpus:
        for tr in result.iterations:
            if lp_distance(tr.iterate, x, cfg.p) > cfg.epsilon + 1e-6:
                violations += 1
            if np.any(tr.iterate < 0.0) or np.any(tr.iterate > 1.0):
                violations += 1
        final = result.final_image
        if lp_distance(final, x, cfg.p) > cfg.epsilon + 1e-6 \
                or np.any(final < 0.0) or np.any(final > 1.0):
            violations += 1
    report_line("feasibility-audit", violations == 0)


def test_rgf_estimator_statistics():
    t0 = time.perf_counter()
    d = 50
    rng = np.random.default_rng(31)
    w = rng.standard_normal(d)
    # two-class linear model whose untargeted margin loss is exactly w.x
    oracle = BuiltinOracle(LinearModel(np.vstack([np.zeros(d), w]),
                                       [0.0, 0.0]))
    goal = AttackGoal("untargeted", 0)
    x = np.full(d, 0.5, dtype=np.float32)
    base = float(w.astype(np.float64) @ x.astype(np.float64))
    total = np.zeros(d)
    n_samples = 100_000
    chunk = 10_000
    for _ in range(n_samples // chunk):
        ledger = QueryLedger(budget=chunk)
        est = rgf_estimate(oracle, ledger, x, goal, q=chunk, delta=1e-3,
                           base_loss=base, rng=rng)
        total += est * chunk
    mean_est = total / n_samples
    expected = w / d
    rel = np.linalg.norm(mean_est - expected) / np.linalg.norm(expected)
    elapsed = time.perf_counter() - t0
    report_line("rgf-estimator-statistics", rel < 0.05 and elapsed < 10.0)


def test_benchmark_variant_trend(benchmark_reports):
    sr = {v: r.aggregates["success_rate"] for v, r in benchmark_reports.items()}
    avg = {v: r.aggregates["avg_query_all"] for v, r in benchmark_reports.items()}
    ok_a = sr["switch_rgf"] >= sr["switch"] >= sr["no_switch"]
    ok_b = avg["switch"] < avg["rgf"]
    ok_c = sr["switch_rgf"] >= sr["rgf"] - 0.05
    print(f"\n  success rates: {sr}\n  avg_query_all: {avg}")
    report_line("benchmark-variant-trend", ok_a and ok_b and ok_c)


def test_cosine_sweep_trend(benchmark):
    t0 = time.perf_counter()
    dataset, oracle, _ = benchmark
    avgs = []
    for cos in (0.05, 0.3, 0.6, 0.9):
        cfg = AttackConfig(variant="switch", p=2.0, epsilon=1.0, budget=10000)
        rep = run_experiment(
            dataset, oracle,
            lambda rng, o, c=cos: ControlledCosineSurrogate(o, c, rng),
            cfg, master_seed=42, parallelism=4)
        avgs.append(rep.aggregates["avg_query_all"])
    elapsed = time.perf_counter() - t0
    print(f"\n  avg_query_all across cos 0.05/0.3/0.6/0.9: {avgs}")
    strictly_decreasing = all(b < a for a, b in zip(avgs, avgs[1:]))
    # strictly decreasing over 4 points == Spearman correlation of -1
    report_line("cosine-sweep-trend", strictly_decreasing and elapsed < 600.0)


def test_metrics_conventions():
    records = [ImageRecord(i, 0, 0, "success", q, 0, None)
               for i, q in enumerate([5, 9, 13, 21, 40, 80, 100])]
    records += [ImageRecord(7 + i, 0, 0, "budget_exhausted", 10000, 0, None)
                for i in range(3)]
    agg = aggregate_queries(records, budget=10000)
    ok = (
        agg["success_rate"] == pytest.approx(0.7)
        and agg["avg_query_success_only"] == pytest.approx(268 / 7)
        and agg["median_query_success_only"] == 21
        and agg["avg_query_all"] == pytest.approx(3026.8)
        and agg["median_query_all"] == 60
    )
    report_line("metrics-conventions", ok)


def test_determinism_across_parallelism(benchmark, tmp_path):
    dataset, oracle, surrogate = benchmark
    cfg = AttackConfig(variant="switch", p=2.0, epsilon=1.0, budget=10000)
    blobs = []
    for par in (1, 8):
        rep = run_experiment(dataset, oracle, lambda rng, o: surrogate, cfg,
                             master_seed=123, parallelism=par,
                             keep_traces=True)
        path = tmp_path / f"bench_par{par}.json"
        emit_report(rep, "json", str(path))
        blobs.append(path.read_bytes())
    report_line("determinism-across-parallelism", blobs[0] == blobs[1])
