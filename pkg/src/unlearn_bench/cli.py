"""Command-line entry point.

Subcommands mirror the experiment units: ``train`` / ``split`` / ``unlearn`` /
``retrain`` for single runs, ``fig1`` / ``fig2`` / ``ablation`` for the full
benchmark grids, ``mia`` for a one-cell membership-inference audit, and
``aggregate`` to re-aggregate an existing records CSV.

Exit codes: 0 success, 2 config error, 3 data error, 4 run failures present.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import (
    FIG1_HP,
    FIG2_HP,
    FIG2_METHODS,
    UnlearnConfig,
    build_config,
    config_hash,
    parse_config_file,
    persist_result,
    resolve_dataset,
)
from .data import make_split
from .errors import ConfigError, DataError
from .model import batch_grad, make_spec, train_to_optimum
from .rng import RngStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNFAIL = 4


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--method", help="method id")
    p.add_argument("--rf", help="forget fraction(s), comma separated")
    p.add_argument("--epochs", type=int, help="budget in full-dataset epochs")
    p.add_argument("--kappa", type=float, help="privacy multiplier, set directly")
    p.add_argument("--epsilon", type=float, help="privacy epsilon (kappa derived)")
    p.add_argument("--delta", type=float, help="privacy delta")
    p.add_argument("--seeds", help="run seeds, comma separated")
    p.add_argument("--projection", choices=["on", "off"], help="projection step switch")
    p.add_argument("--mode", choices=["empirical", "theoretical"], help="estimator variant")
    p.add_argument("--out-dir", dest="out_dir", help="output directory")
    p.add_argument("--dataset", help="dataset CSV path or synthetic:... spec")
    p.add_argument("--lam", type=float, help="L2 regularization weight")
    p.add_argument("--seed", type=int, default=0, help="seed for single-run commands")
    p.add_argument("--test-fraction", dest="test_fraction", type=float)
    p.add_argument("--n-probes", dest="n_probes", type=int)
    p.add_argument("--shadows", type=int)
    p.add_argument("--nu-t", dest="nu_t", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--lr-decay", dest="lr_decay", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--vru-schedule", dest="vru_schedule", choices=["inverse-mu-t", "table"])
    p.add_argument("--save-models", dest="save_models", action="store_const", const=True)


def _config_from_args(args: argparse.Namespace, base: UnlearnConfig | None = None) -> UnlearnConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for key in ("method", "epochs", "kappa", "epsilon", "delta", "mode", "out_dir",
                "dataset", "lam", "test_fraction", "n_probes", "shadows", "nu_t",
                "lr", "lr_decay", "alpha", "vru_schedule", "save_models"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if args.rf:
        overrides["rf_grid"] = tuple(float(v) for v in args.rf.split(","))
    if args.seeds:
        overrides["seeds"] = tuple(int(v) for v in args.seeds.split(","))
    if args.projection:
        overrides["projection"] = args.projection == "on"
    return build_config(file_values, overrides, base=base)


def _single_cell(cfg: UnlearnConfig, seed: int):
    dataset = resolve_dataset(cfg)
    spec = make_spec(cfg.lam, dataset)
    cache = bench.OptimaCache()
    fp = bench.OptimaCache.fingerprint(dataset)
    rf = cfg.rf_grid[0]
    cell = bench.prepare_cell(dataset, spec, cfg, rf, 0, seed, cache, fp)
    return dataset, spec, cell


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    dataset = resolve_dataset(cfg)
    spec = make_spec(cfg.lam, dataset)
    split = make_split(dataset, cfg.rf_grid[0], cfg.test_fraction,
                       rng=RngStream(cfg.data_seed).derive(bench.K_TEST_SPLIT),
                       forget_rng=RngStream(args.seed).derive(bench.K_FORGET, 0))
    theta = train_to_optimum(spec, split.train_pool(), bench.OPTIMUM_TOL)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "theta_star.npy"
    np.save(path, theta)
    grad_norm = float(np.linalg.norm(batch_grad(spec, theta, split.train_pool())))
    print(f"trained optimum saved to {path} (grad norm {grad_norm:.3e})")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _config_from_args(args)
    dataset = resolve_dataset(cfg)
    split = make_split(dataset, cfg.rf_grid[0], cfg.test_fraction,
                       rng=RngStream(cfg.data_seed).derive(bench.K_TEST_SPLIT),
                       forget_rng=RngStream(args.seed).derive(bench.K_FORGET, 0))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"split_rf{cfg.rf_grid[0]}_s{args.seed}.json"
    path.write_text(json.dumps({
        "r_f": split.r_f,
        "retain": split.retain_idx.tolist(),
        "forget": split.forget_idx.tolist(),
        "test": split.test_idx.tolist(),
    }))
    print(f"split written to {path} (r_f={split.r_f:.6g}, "
          f"{split.retain.n}/{split.forget.n}/{split.test.n} retain/forget/test)")
    return EXIT_OK


def _run_one(args, hp_table) -> int:
    cfg = _config_from_args(args)
    dataset, spec, cell = _single_cell(cfg, args.seed)
    privacy = cfg.privacy()
    theta, used, extras = bench.run_method(
        cfg.method, spec, cell, cfg, privacy, args.seed, 0, hp_table
    )
    risk = bench.excess_risk(spec, theta, cell.split.test, cell.theta_r_star)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{cfg.method}_rf{cell.split.r_f:.6g}_s{args.seed}.npy"
    np.save(path, theta)
    print(f"{cfg.method}: excess_risk={risk:.6e} budget_used={used} model={path}")
    return EXIT_OK


def cmd_unlearn(args) -> int:
    table = {**FIG1_HP, **FIG2_HP} if args.method in FIG2_METHODS else FIG1_HP
    if args.method in ("fine_tune", "neggrad_plus", "scrub"):
        table = FIG2_HP
    return _run_one(args, table)


def cmd_retrain(args) -> int:
    if args.method not in ("gd", "sgd", "svrg"):
        raise ConfigError("retrain expects --method gd|sgd|svrg")
    return _run_one(args, FIG1_HP)


def cmd_mia(args) -> int:
    cfg = _config_from_args(args, base=UnlearnConfig.fig2_defaults())
    dataset, spec, cell = _single_cell(cfg, args.seed)
    privacy = cfg.privacy()
    theta, _, _ = bench.run_method(cfg.method, spec, cell, cfg, privacy, args.seed, 0, FIG2_HP)
    report = bench._audit_cell(spec, cell, cfg, privacy, cfg.method, 0, args.seed, FIG2_HP, theta)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"mia_{cfg.method}_s{args.seed}.json"
    path.write_text(json.dumps(report.summary(cfg.method, cell.split.r_f, args.seed)))
    print(f"mia accuracy={report.accuracy:.4f} over {report.n_attacked} samples -> {path}")
    return EXIT_OK


def _run_figure(args, runner, base: UnlearnConfig | None, tag: str) -> int:
    cfg = _config_from_args(args, base=base)
    result = runner(cfg)
    paths = persist_result(result, cfg, tag)
    for agg in result.aggregates:
        print(f"{tag} {agg.method} r_f={agg.r_f:.6g} geo_excess={agg.geo_mean_excess:.6e} "
              f"n={agg.n_seeds}")
    print(f"{tag}: {len(result.records)} records -> {paths['records']}")
    if result.failures:
        for method, rf, seed, msg in result.failures:
            print(f"FAILED {method} r_f={rf} seed={seed}: {msg}", file=sys.stderr)
        return EXIT_RUNFAIL
    return EXIT_OK


def cmd_aggregate(args) -> int:
    records = bench.read_records_csv(args.records)
    aggs = bench.aggregate(records)
    chash = records[0].config_hash if records else ""
    out = Path(args.out or (Path(args.records).with_name(Path(args.records).stem + "_aggregate.csv")))
    bench.write_aggregates_csv(aggs, out, chash)
    print(f"wrote {len(aggs)} aggregate rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unlearn-bench")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (
        ("train", cmd_train),
        ("split", cmd_split),
        ("unlearn", cmd_unlearn),
        ("retrain", cmd_retrain),
        ("mia", cmd_mia),
    ):
        p = sub.add_parser(name)
        _add_common_flags(p)
        p.set_defaults(fn=fn)

    for name, runner, base in (
        ("fig1", bench.run_fig1, None),
        ("fig2", bench.run_fig2, UnlearnConfig.fig2_defaults()),
        ("ablation", bench.run_ablation, UnlearnConfig.ablation_defaults()),
    ):
        p = sub.add_parser(name)
        _add_common_flags(p)
        p.set_defaults(fn=lambda a, r=runner, b=base, n=name: _run_figure(a, r, b, n))

    p = sub.add_parser("aggregate")
    p.add_argument("records", help="records CSV to aggregate")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(fn=cmd_aggregate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # unexpected run failure
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNFAIL


if __name__ == "__main__":
    sys.exit(main())
