"""Command-line entry point.

Subcommands: `gen` (synthetic dataset), `attack` (one dataset x one
config), `sweep` (grid over variants/cosines), `report` (re-aggregate a
JSON report).  Exit codes: 0 ok, 2 config error, 3 oracle failure,
4 I/O error.  Flag precedence: command line > config file > defaults.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import dataset as ds
from .engine import AttackConfig
from .errors import ConfigError, ManifestError, OracleFailure, SwitchAttackError
from .experiment import (
    aggregate_queries,
    emit_report,
    load_report,
    run_experiment,
)
from .models import load_model
from .oracles import (
    BuiltinOracle,
    BuiltinSurrogate,
    ControlledCosineSurrogate,
    RandomSurrogate,
    RemoteOracle,
    RemoteSurrogate,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ORACLE = 3
EXIT_IO = 4

VARIANT_FLAGS = {
    "switch": "switch",
    "switch-rgf": "switch_rgf",
    "no-switch": "no_switch",
    "rgf": "rgf",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="switchattack")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset + models")
    gen.add_argument("--d", type=int, default=32)
    gen.add_argument("--classes", type=int, default=10)
    gen.add_argument("--n", type=int, default=200)
    gen.add_argument("--separation", type=float, default=0.4)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--model", choices=["linear", "mlp2"], default="mlp2")
    gen.add_argument("--hidden", type=int, default=64)
    gen.add_argument("--out", required=True, help="output directory")

    for name in ("attack", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML config file (flags override it)")
        p.add_argument("--variant", choices=sorted(VARIANT_FLAGS))
        p.add_argument("--norm", choices=["l2", "linf"])
        p.add_argument("--epsilon", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--q", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--budget", type=int)
        p.add_argument("--targeted", action="store_true", default=None)
        p.add_argument("--target",
                       help="builtin:linear | builtin:mlp2 | http:URL")
        p.add_argument("--surrogate",
                       help="builtin:linear | builtin:mlp2 | http:URL | "
                            "random | cosine:F")
        p.add_argument("--dataset", help="path to a dataset manifest")
        p.add_argument("--seed", type=int)
        p.add_argument("--parallel", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--trace", action="store_true", default=None)
        p.add_argument("--measure-cosine", action="store_true", default=None)
        if name == "sweep":
            p.add_argument("--variants",
                           help="comma list of variants to sweep")
            p.add_argument("--cosines",
                           help="comma list of controlled cosine values")

    rep = sub.add_parser("report", help="re-aggregate a JSON report")
    rep.add_argument("--input", required=True)
    rep.add_argument("--out", required=True)
    rep.add_argument("--format", choices=["csv", "json"], default="json")
    return parser


DEFAULTS = {
    "variant": "switch",
    "norm": "l2",
    "epsilon": 1.0,
    "eta": None,
    "q": 50,
    "delta": 1e-4,
    "budget": 10000,
    "targeted": False,
    "target": "builtin:mlp2",
    "surrogate": "builtin:mlp2",
    "dataset": None,
    "seed": 0,
    "parallel": 1,
    "out": None,
    "format": "json",
    "trace": False,
    "measure_cosine": False,
}


def _merge_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                file_cfg = tomllib.load(fh)
        except OSError as exc:
            raise IOError(f"cannot read config file: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file: {exc}") from exc
        for key, val in file_cfg.items():
            key = key.replace("-", "_")
            if key not in settings:
                raise ConfigError(f"unknown config key {key!r}")
            settings[key] = val
    for key in settings:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    return settings


def _attack_config(settings: dict) -> AttackConfig:
    variant = settings["variant"].replace("-", "_")
    if variant not in VARIANT_FLAGS.values():
        raise ConfigError(f"unknown variant {settings['variant']!r}")
    return AttackConfig(
        p=2.0 if settings["norm"] == "l2" else math.inf,
        epsilon=float(settings["epsilon"]),
        eta=None if settings["eta"] is None else float(settings["eta"]),
        variant=variant,
        q=int(settings["q"]),
        delta_rgf=float(settings["delta"]),
        budget=int(settings["budget"]),
        seed=int(settings["seed"]),
    )


def _load_builtin(manifest_path: str, manifest, weights_rel, expected_kind: str):
    if weights_rel is None:
        raise ConfigError("manifest carries no weights for a builtin model")
    path = weights_rel if os.path.isabs(weights_rel) else os.path.join(
        os.path.dirname(os.path.abspath(manifest_path)), weights_rel)
    model = load_model(path)
    if model.kind != expected_kind:
        raise ConfigError(
            f"weights at {path} are kind {model.kind!r}, expected {expected_kind!r}"
        )
    return model


def _resolve_target(spec: str, manifest_path, manifest):
    if spec.startswith("builtin:"):
        kind = spec.split(":", 1)[1]
        if kind not in ("linear", "mlp2"):
            raise ConfigError(f"unknown builtin target {spec!r}")
        if manifest is None:
            raise ConfigError("builtin targets need --dataset with weights")
        return BuiltinOracle(_load_builtin(
            manifest_path, manifest, manifest.target_weights, kind))
    if spec.startswith("http:") or spec.startswith("https:"):
        return RemoteOracle(spec)
    raise ConfigError(f"unknown target spec {spec!r}")


def _surrogate_factory(spec: str, manifest_path, manifest):
    """Returns factory(rng, oracle) -> SurrogateProvider, or None."""
    if spec in (None, "none"):
        return None
    if spec.startswith("builtin:"):
        kind = spec.split(":", 1)[1]
        if kind not in ("linear", "mlp2"):
            raise ConfigError(f"unknown builtin surrogate {spec!r}")
        if manifest is None:
            raise ConfigError("builtin surrogates need --dataset with weights")
        model = _load_builtin(
            manifest_path, manifest, manifest.surrogate_weights, kind)
        surrogate = BuiltinSurrogate(model)
        return lambda rng, oracle: surrogate
    if spec == "random":
        return lambda rng, oracle: RandomSurrogate(rng)
    if spec.startswith("cosine:"):
        try:
            cos = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad cosine value in {spec!r}") from exc
        return lambda rng, oracle: ControlledCosineSurrogate(oracle, cos, rng)
    if spec.startswith("http:") or spec.startswith("https:"):
        remote = RemoteOracle(spec)
        return lambda rng, oracle: RemoteSurrogate(remote)
    raise ConfigError(f"unknown surrogate spec {spec!r}")


def _cmd_gen(args) -> int:
    images, labels, target, surrogate = ds.generate_synthetic_dataset(
        d=args.d, num_classes=args.classes, n=args.n,
        separation=args.separation, seed=args.seed,
        model_kind=args.model, hidden=args.hidden,
    )
    manifest_path = ds.write_dataset(
        images, labels, (args.d,), args.out,
        num_classes=args.classes, seed=args.seed,
        target=target, surrogate=surrogate,
    )
    print(f"wrote {manifest_path}")
    return EXIT_OK


def _run_one(settings: dict, cfg: AttackConfig, out_path, fmt):
    if settings["dataset"] is None:
        raise ConfigError("--dataset is required")
    data = ds.load_dataset(settings["dataset"])
    manifest = ds.load_manifest(settings["dataset"])
    oracle = _resolve_target(settings["target"], settings["dataset"], manifest)
    factory = None
    if cfg.variant != "rgf":
        factory = _surrogate_factory(settings["surrogate"],
                                     settings["dataset"], manifest)
        if factory is None:
            raise ConfigError(
                f"variant {cfg.variant!r} needs --surrogate")
    report = run_experiment(
        data, oracle, factory, cfg,
        targeted=bool(settings["targeted"]),
        master_seed=int(settings["seed"]),
        parallelism=int(settings["parallel"]),
        keep_traces=bool(settings["trace"]),
        measure_cosine=bool(settings["measure_cosine"]),
    )
    if out_path:
        emit_report(report, fmt, out_path)
    agg = report.aggregates
    rate = agg["success_rate"]
    print(f"variant={cfg.variant} n={agg['n_images']} "
          f"success_rate={rate if rate is None else round(rate, 4)} "
          f"avg_query_all={agg['avg_query_all']} "
          f"median_query_all={agg['median_query_all']}")
    return report


def _cmd_attack(args) -> int:
    settings = _merge_settings(args)
    cfg = _attack_config(settings)
    _run_one(settings, cfg, settings["out"], settings["format"])
    return EXIT_OK


def _cmd_sweep(args) -> int:
    settings = _merge_settings(args)
    variants = [v.strip() for v in (args.variants or settings["variant"]).split(",")]
    cosines = []
    if args.cosines:
        cosines = [float(c) for c in args.cosines.split(",")]
    out_dir = settings["out"]
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    rows = []
    combos = []
    for variant in variants:
        if cosines and variant != "rgf":
            combos.extend((variant, c) for c in cosines)
        else:
            combos.append((variant, None))
    for variant, cos in combos:
        local = dict(settings)
        local["variant"] = variant
        if cos is not None:
            local["surrogate"] = f"cosine:{cos}"
        cfg = _attack_config(local)
        tag = variant.replace("-", "_") + ("" if cos is None else f"_cos{cos}")
        out_path = os.path.join(out_dir, f"{tag}.json") if out_dir else None
        report = _run_one(local, cfg, out_path, "json")
        agg = report.aggregates
        rows.append([tag, variant, cos, agg["n_images"], agg["success_rate"],
                     agg["avg_query_success_only"], agg["median_query_success_only"],
                     agg["avg_query_all"], agg["median_query_all"]])
    if out_dir:
        with open(os.path.join(out_dir, "summary.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tag", "variant", "cosine", "n", "success_rate",
                             "avg_query_success", "median_query_success",
                             "avg_query_all", "median_query_all"])
            writer.writerows(rows)
    return EXIT_OK


def _cmd_report(args) -> int:
    report = load_report(args.input)
    # Re-derive the aggregates from the per-image rows before re-emitting.
    budget = int(report.config.get("budget", 10000))
    report.aggregates = aggregate_queries(report.records, budget)
    emit_report(report, args.format, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "attack":
            return _cmd_attack(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "report":
            return _cmd_report(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (ManifestError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SwitchAttackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
