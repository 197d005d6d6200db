"""How much does surrogate quality matter?

A controlled-cosine surrogate returns a direction with a chosen cosine
similarity to the true gradient, letting us dial surrogate quality from
"almost random" (0.05) to "almost perfect" (0.9).  Query cost should fall
monotonically as the cosine rises.  Run:

    python3 demos/surrogate_quality_sweep.py
"""
from switchattack import (
    AttackConfig,
    BuiltinOracle,
    ControlledCosineSurrogate,
    ImageTensor,
    generate_synthetic_dataset,
    run_experiment,
)


def main():
    images, labels, target, _ = generate_synthetic_dataset(n=100, seed=0)
    dataset = [(ImageTensor(x), int(y)) for x, y in zip(images, labels)]
    oracle = BuiltinOracle(target)
    cfg = AttackConfig(variant="switch", p=2.0, epsilon=1.0, budget=10000)

    print(f"{'cosine':>7} {'success':>8} {'avg queries':>12}")
    for cos in (0.05, 0.3, 0.6, 0.9):
        report = run_experiment(
            dataset, oracle,
            lambda rng, o, c=cos: ControlledCosineSurrogate(o, c, rng),
            cfg, master_seed=42, parallelism=4)
        agg = report.aggregates
        print(f"{cos:>7.2f} {agg['success_rate']:>8.3f} "
              f"{agg['avg_query_all']:>12.1f}")


if __name__ == "__main__":
    main()
