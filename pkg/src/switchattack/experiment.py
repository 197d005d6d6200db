"""Batch attack execution, the paper-style metrics, and report I/O.

Aggregates are reported both over successful attacks only and over all
samples with failed attacks counted at the full budget (the supplementary
convention).  Median = mean of the two central order statistics for even
sample counts.  Reports are deterministic given the master seed regardless
of parallelism: image i always uses seed master_seed + i.
"""
from __future__ import annotations

import csv
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .engine import AttackConfig, AttackResult, IterationTrace, choose_target_class, run_attack
from .errors import SwitchAttackError
from .objectives import AttackGoal
from .tensors import ImageTensor

__all__ = [
    "ImageRecord",
    "SwitchStats",
    "ExperimentReport",
    "run_experiment",
    "switch_statistics",
    "budget_curve",
    "query_histogram",
    "aggregate_queries",
    "emit_report",
    "load_report",
]

MEDIAN_CONVENTION = "mean of the two central order statistics"


@dataclass
class ImageRecord:
    image_id: int
    label: int
    goal_label: int
    outcome: str
    queries: int
    iterations: int
    final_loss: Optional[float]
    pending_queries: int = 0
    traces: Optional[List[dict]] = None

    @property
    def success(self) -> bool:
        return self.outcome == "success"


@dataclass
class SwitchStats:
    """Table-2-style switch statistics.

    switch_ratio is defined over iterations where the forward probe failed
    (L1 < L_last); n_iterations is recorded as the alternative denominator
    so either reading can be recomputed.
    """

    n_iterations: int = 0
    n_probe_failed: int = 0
    n_switched: int = 0
    n_switched_gt_last: int = 0
    n_switched_gt_temp: int = 0
    n_ties: int = 0

    @property
    def switch_ratio(self) -> Optional[float]:
        if self.n_probe_failed == 0:
            return None
        return self.n_switched / self.n_probe_failed

    @property
    def ratio_gt_last(self) -> Optional[float]:
        if self.n_switched == 0:
            return None
        return self.n_switched_gt_last / self.n_switched

    @property
    def ratio_gt_temp(self) -> Optional[float]:
        if self.n_switched == 0:
            return None
        return self.n_switched_gt_temp / self.n_switched

    def to_dict(self) -> dict:
        return {
            "n_iterations": self.n_iterations,
            "n_probe_failed": self.n_probe_failed,
            "n_switched": self.n_switched,
            "n_ties": self.n_ties,
            "switch_ratio": self.switch_ratio,
            "ratio_l_switched_gt_l_last": self.ratio_gt_last,
            "ratio_l_switched_gt_l_temp": self.ratio_gt_temp,
        }


def switch_statistics(traces: Sequence[IterationTrace]) -> SwitchStats:
    """Fold iteration traces into switch statistics.

    Switched = the mirrored direction was adopted (branch switch_accepted,
    or pick_better_of_two resolving to -g).  Among switched iterations,
    count L2 > L_last and L2 > L1 strictly.
    """
    st = SwitchStats()
    for tr in traces:
        st.n_iterations += 1
        if not tr.probe_failed:
            continue
        st.n_probe_failed += 1
        if tr.tie_l1_l2:
            st.n_ties += 1
        if tr.switched:
            st.n_switched += 1
            if tr.l2 is not None and tr.l2 > tr.l_last:
                st.n_switched_gt_last += 1
            if tr.l2 is not None and tr.l2 > tr.l1:
                st.n_switched_gt_temp += 1
    return st


def aggregate_queries(records: Sequence[ImageRecord], budget: int) -> dict:
    """Success rate plus average/median queries, success-only and with
    failures counted as the full budget."""
    n = len(records)
    successes = [r.queries for r in records if r.success]
    all_counts = [r.queries if r.success else budget for r in records]
    agg = {
        "n_images": n,
        "n_success": len(successes),
        "success_rate": (len(successes) / n) if n else None,
        "avg_query_success_only": float(np.mean(successes)) if successes else None,
        "median_query_success_only": float(np.median(successes)) if successes else None,
        "avg_query_all": float(np.mean(all_counts)) if all_counts else None,
        "median_query_all": float(np.median(all_counts)) if all_counts else None,
        "median_convention": MEDIAN_CONVENTION,
    }
    return agg


def budget_curve(records: Sequence[ImageRecord],
                 thresholds: Sequence[int]) -> List[Tuple[int, float]]:
    """Success rate as a function of the allowed query budget; monotone
    non-decreasing for ascending thresholds."""
    n = len(records)
    out = []
    for t in thresholds:
        if n == 0:
            out.append((int(t), 0.0))
            continue
        hits = sum(1 for r in records if r.success and r.queries <= t)
        out.append((int(t), hits / n))
    return out


def query_histogram(records: Sequence[ImageRecord], budget: int,
                    bins: int = 10) -> dict:
    """Equal-width histogram of per-image query counts over [1, budget];
    failed images count at the full budget."""
    edges = np.linspace(1.0, float(budget), bins + 1)
    counts = np.zeros(bins, dtype=int)
    if records:
        vals = [r.queries if r.success else budget for r in records]
        counts, _ = np.histogram(vals, bins=edges)
    return {"bin_edges": [float(e) for e in edges],
            "counts": [int(c) for c in counts]}


@dataclass
class ExperimentReport:
    config: dict
    records: List[ImageRecord]
    aggregates: dict
    switch_stats: dict
    budget_curve: List[Tuple[int, float]]
    histogram: dict
    mean_cosine: Optional[float] = None
    oracle_failures: int = 0

    def to_dict(self) -> dict:
        per_image = []
        for r in self.records:
            row = {
                "id": r.image_id,
                "label": r.label,
                "goal_label": r.goal_label,
                "outcome": r.outcome,
                "queries": r.queries,
                "iterations": r.iterations,
                "final_loss": r.final_loss,
                "pending_queries": r.pending_queries,
            }
            if r.traces is not None:
                row["trace"] = r.traces
            per_image.append(row)
        return {
            "config": self.config,
            "per_image": per_image,
            "aggregates": self.aggregates,
            "switch_stats": self.switch_stats,
            "budget_curve": [[t, rate] for t, rate in self.budget_curve],
            "histogram": self.histogram,
            "mean_cosine": self.mean_cosine,
            "oracle_failures": self.oracle_failures,
        }


def _trace_dicts(result: AttackResult) -> List[dict]:
    out = []
    for tr in result.iterations:
        out.append({
            "l_last": tr.l_last,
            "l1": tr.l1,
            "l2": tr.l2,
            "branch": tr.branch,
            "direction_sign": tr.direction_sign,
            "queries": tr.queries,
            "zero_gradient_fallback": tr.zero_gradient_fallback,
            "tie_l1_l2": tr.tie_l1_l2,
        })
    return out


def _config_dict(cfg: AttackConfig, seed: int, targeted: bool) -> dict:
    return {
        "norm": "linf" if np.isinf(cfg.p) else "l2",
        "epsilon": cfg.epsilon,
        "eta": cfg.eta,
        "variant": cfg.variant,
        "q": cfg.q,
        "delta_rgf": cfg.delta_rgf,
        "budget": cfg.budget,
        "loss": cfg.loss,
        "master_seed": seed,
        "targeted": targeted,
    }


def run_experiment(
    dataset: Sequence[Tuple[ImageTensor, int]],
    target_oracle,
    surrogate_factory: Optional[Callable[[np.random.Generator, object], object]],
    cfg: AttackConfig,
    targeted: bool = False,
    master_seed: int = 0,
    parallelism: int = 1,
    keep_traces: bool = False,
    measure_cosine: bool = False,
    thresholds: Optional[Sequence[int]] = None,
) -> ExperimentReport:
    """Attack every image in the dataset and aggregate the results.

    surrogate_factory(rng, oracle) builds a per-image surrogate (None for
    the pure-RGF baseline).  Per-image seed = master_seed + image index, so
    the report is identical for any parallelism level.
    """
    local = threading.local()

    def worker_oracle():
        oracle = getattr(local, "oracle", None)
        if oracle is None:
            oracle = target_oracle.clone() if hasattr(target_oracle, "clone") \
                else target_oracle
            local.oracle = oracle
        return oracle

    cosines: List[Optional[float]] = [None] * len(dataset)

    def attack_one(idx: int) -> ImageRecord:
        image, label = dataset[idx]
        oracle = worker_oracle()
        if targeted:
            goal = AttackGoal("targeted",
                              choose_target_class(label, oracle.num_classes))
        else:
            goal = AttackGoal("untargeted", label)
        rng = np.random.default_rng(master_seed + idx)
        surrogate = surrogate_factory(rng, oracle) if surrogate_factory else None
        if measure_cosine and surrogate is not None \
                and hasattr(oracle, "true_gradient"):
            try:
                from .tensors import cosine_similarity
                tg = oracle.true_gradient(image.data, goal)
                sg = surrogate.gradient(image.data, goal)
                cosines[idx] = cosine_similarity(sg, tg)
            except SwitchAttackError:
                cosines[idx] = None
        result = run_attack(image.data, goal, oracle, surrogate, cfg, rng)
        record = ImageRecord(
            image_id=idx,
            label=label,
            goal_label=goal.label,
            outcome=result.outcome,
            queries=result.queries_used,
            iterations=len(result.iterations),
            final_loss=result.final_loss,
            pending_queries=result.pending_queries,
            traces=_trace_dicts(result) if keep_traces else None,
        )
        return record, result.iterations

    indices = range(len(dataset))
    if parallelism <= 1:
        outputs = [attack_one(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outputs = list(pool.map(attack_one, indices))

    records = [rec for rec, _ in outputs]
    all_traces: List[IterationTrace] = []
    for _, iters in outputs:
        all_traces.extend(iters)
    stats = switch_statistics(all_traces)
    budget = cfg.budget
    if thresholds is None:
        thresholds = [int(t) for t in np.linspace(budget / 10, budget, 10)]
    cos_vals = [c for c in cosines if c is not None]
    return ExperimentReport(
        config=_config_dict(cfg, master_seed, targeted),
        records=records,
        aggregates=aggregate_queries(records, budget),
        switch_stats=stats.to_dict(),
        budget_curve=budget_curve(records, thresholds),
        histogram=query_histogram(records, budget),
        mean_cosine=float(np.mean(cos_vals)) if cos_vals else None,
        oracle_failures=sum(1 for r in records if r.outcome == "oracle_failure"),
    )


def _switch_statistics_from_dicts(trace_dicts: Sequence[dict]) -> SwitchStats:
    traces = [
        IterationTrace(
            l_last=d["l_last"], l1=d["l1"], l2=d.get("l2"),
            branch=d["branch"], direction_sign=d["direction_sign"],
            queries=d["queries"],
            zero_gradient_fallback=d.get("zero_gradient_fallback", False),
            tie_l1_l2=d.get("tie_l1_l2", False),
        )
        for d in trace_dicts
    ]
    return switch_statistics(traces)


def emit_report(report: ExperimentReport, fmt: str, path: str):
    """Write a report as JSON (full nested structure) or CSV (one row per
    image plus an aggregates footer block)."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "outcome", "queries", "iterations", "final_loss"])
            for r in report.records:
                writer.writerow([r.image_id, r.outcome, r.queries,
                                 r.iterations, r.final_loss])
            writer.writerow([])
            writer.writerow(["# aggregates", f"N={report.aggregates['n_images']}"])
            for key in ("n_success", "success_rate", "avg_query_success_only",
                        "median_query_success_only", "avg_query_all",
                        "median_query_all", "median_convention"):
                writer.writerow(["# aggregate", key, report.aggregates[key]])
            for key, val in report.switch_stats.items():
                writer.writerow(["# switch_stat", key, val])
            for t, rate in report.budget_curve:
                writer.writerow(["# budget_curve", t, rate])
            writer.writerow(["# histogram_edges"]
                            + report.histogram["bin_edges"])
            writer.writerow(["# histogram_counts"]
                            + report.histogram["counts"])
        return
    raise ValueError(f"unknown report format {fmt!r}")


def load_report(path: str) -> ExperimentReport:
    """Reload a JSON report; aggregates can then be recomputed from the
    per-image rows and compared bit-exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    records = [
        ImageRecord(
            image_id=row["id"],
            label=row["label"],
            goal_label=row["goal_label"],
            outcome=row["outcome"],
            queries=row["queries"],
            iterations=row["iterations"],
            final_loss=row["final_loss"],
            pending_queries=row.get("pending_queries", 0),
            traces=row.get("trace"),
        )
        for row in raw["per_image"]
    ]
    return ExperimentReport(
        config=raw["config"],
        records=records,
        aggregates=raw["aggregates"],
        switch_stats=raw["switch_stats"],
        budget_curve=[(int(t), float(r)) for t, r in raw["budget_curve"]],
        histogram=raw["histogram"],
        mean_cosine=raw.get("mean_cosine"),
        oracle_failures=raw.get("oracle_failures", 0),
    )
