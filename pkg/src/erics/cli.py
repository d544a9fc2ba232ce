"""Command-line entry point: ``erics generate | run | evaluate | sweep``.

Exit codes: 0 on success, 1 for usage and configuration errors, 2 for data
errors (unreadable inputs, schema mismatches, missing ground truth).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ConfigError, RunConfig
from .evaluation import run_detector, run_experiment, grid_search, write_rows_csv
from .streams import DriftGroundTruth, generate_table, to_batches, write_csv

logger = logging.getLogger("erics")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="erics", description="Concept drift detection from parameter distributions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in [
        ("generate", "write a stream CSV plus schema and ground-truth files"),
        ("run", "run the detector once and write traces and the alert log"),
        ("evaluate", "score the detector against the ground truth"),
        ("sweep", "grid search over the config's sweep space"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="YAML file or bundled config name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory (overrides output_dir)")
        p.add_argument("--per-feature", action="store_true", help="also track every parameter separately")
        p.add_argument("--desk-scale", action="store_true", help=f"cap synthetic streams at "
                       f"{config_mod.DESK_SCALE_SAMPLES} samples")
    return parser


def _load_stream(cfg: RunConfig, seed: int):
    """Return ``(table, truth)`` for one seed, reading an external truth file if configured."""
    try:
        table, truth = generate_table(cfg.stream_for(seed))
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from None
    if cfg.truth_path:
        try:
            truth = DriftGroundTruth.from_csv(cfg.truth_path, truth.n_batches)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read ground truth {cfg.truth_path}: {exc}") from None
    return table, truth


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_generate(cfg: RunConfig) -> list:
    table, truth = _load_stream(cfg, cfg.seed)
    paths = write_csv(_outdir(cfg) / "stream.csv", table, truth)
    print(f"wrote {table.X.shape[0]} rows, {len(truth)} drifts to {paths[0]}")
    return paths


def _write_trace(path, detector):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ma", "window_sum", "alpha", "alert_flag"])
        for r in detector.trace:
            w.writerow([r.t, repr(float(r.ma)), repr(float(r.window_sum)), repr(float(r.alpha)), int(r.alert)])


def _write_feature_trace(path, detector, names):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "feature", "name", "ma", "window_sum", "alpha", "alert_flag"])
        for t, k, ma, s, a, fired in detector.feature_trace:
            w.writerow([t, k, names[k], repr(float(ma)), repr(float(s)), repr(float(a)), int(fired)])


def cmd_run(cfg: RunConfig) -> dict:
    table, truth = _load_stream(cfg, cfg.seed)
    batches = to_batches(table.X, table.y, cfg.stream.batch_size)
    detector, model, accs = run_detector(batches, cfg.eval, record_trace=True)
    out = _outdir(cfg)
    paths = {"trace": out / "trace.csv", "alerts": out / "alerts.jsonl"}
    _write_trace(paths["trace"], detector)
    if cfg.detector.per_feature:
        paths["feature_trace"] = out / "feature_trace.csv"
        _write_feature_trace(paths["feature_trace"], detector, table.columns)
    with open(paths["alerts"], "w") as fh:
        for a in detector.alerts:
            fh.write(a.to_json() + "\n")
    print(f"{len(batches)} batches, {len(detector.global_alerts)} global alerts, "
          f"{len(detector.feature_alerts())} feature alerts, accuracy {np.mean(accs):.3f}")
    return paths


def cmd_evaluate(cfg: RunConfig) -> dict:
    out = _outdir(cfg)
    reports, rows = [], []
    for seed in cfg.eval_seeds:
        table, truth = _load_stream(cfg, seed)
        if len(truth) == 0:
            raise DataError("no ground truth: the stream has no known drifts")
        batches = to_batches(table.X, table.y, cfg.stream.batch_size)
        report = run_experiment(batches, truth, cfg.eval, seed=seed)
        reports.append(report)
        rows.extend(report.rows(cfg.name))
    paths = {"report": out / "report.json", "csv": out / "report.csv"}
    with open(paths["report"], "w") as fh:
        json.dump({"name": cfg.name, "reports": [r.to_dict() for r in reports]}, fh, indent=2)
    write_rows_csv(paths["csv"], rows)
    last = cfg.detection_ranges[-1]
    print(f"{len(reports)} seeds, mean delay {np.mean([r.mean_delay for r in reports]):.2f} batches, "
          f"mean F1@{last} {np.mean([r.scores[last].f1 for r in reports]):.3f}")
    return paths


def cmd_sweep(cfg: RunConfig) -> Path:
    if not cfg.sweep:
        raise UsageError("config has an empty sweep space")

    def factory(seed):
        table, truth = _load_stream(cfg, seed)
        return to_batches(table.X, table.y, cfg.stream.batch_size), truth

    try:
        results = grid_search(cfg.sweep, factory, cfg.eval, seeds=cfg.eval_seeds)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    path = _outdir(cfg) / "sweep.csv"
    keys = sorted(cfg.sweep)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank"] + keys + ["mean_f1", "mean_delay"])
        for i, r in enumerate(results, 1):
            w.writerow([i] + [r.params[k] for k in keys] + [repr(float(r.mean_f1)), repr(float(r.mean_delay))])
    best = results[0]
    print(f"{len(results)} configurations, best {best.params} with mean F1 {best.mean_f1:.3f}")
    return path


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config).with_overrides(
            seed=args.seed, out=args.out, per_feature=args.per_feature, desk_scale=args.desk_scale)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"erics: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"erics: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, OSError) as exc:
        print(f"erics: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def run_main():
    sys.exit(main())


if __name__ == "__main__":
    run_main()
