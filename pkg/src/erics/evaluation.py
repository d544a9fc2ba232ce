"""Prequential experiments and detection-range scoring."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .detector import ERICS, DetectorConfig, DriftAlert
from .probit import ProbitModel
from .streams import DriftGroundTruth

logger = logging.getLogger(__name__)

DEFAULT_RANGES = tuple(range(10, 101, 10))


@dataclass(frozen=True)
class ModelConfig:
    epochs: int = 10
    lr_mu: float = 0.01
    lr_sigma: float = 0.01


@dataclass(frozen=True)
class EvalConfig:
    detection_ranges: Sequence[int] = DEFAULT_RANGES
    warmup_batches: int = 80
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    batch_size: int = 100

    def __post_init__(self):
        ranges = tuple(int(r) for r in self.detection_ranges)
        if not ranges or any(r < 1 for r in ranges) or list(ranges) != sorted(ranges):
            raise ValueError("detection ranges must be positive and sorted ascending")
        object.__setattr__(self, "detection_ranges", ranges)

    @property
    def detector_config(self) -> DetectorConfig:
        return replace(self.detector, warmup_batches=self.warmup_batches)


@dataclass
class Score:
    recall: float
    precision: float
    f1: float
    delays: list
    n_tp: int
    n_fp: int
    n_fn: int
    precision_defined: bool = True


def _times(alerts):
    return sorted(a.time_step if isinstance(a, DriftAlert) else int(a) for a in alerts)


def assign_alerts(alerts, truth: DriftGroundTruth):
    """Index of the nearest preceding (or coinciding) drift for every alert, -1 if none."""
    t = np.asarray(_times(alerts), dtype=int)
    pos = np.asarray(truth.positions, dtype=int)
    return t, np.searchsorted(pos, t, side="right") - 1


def detection_delays(alerts, truth: DriftGroundTruth, n_batches: Optional[int] = None) -> list:
    """Batches from every drift onset to its first assigned alert.

    Drifts without any alert get the distance to the end of the stream.
    """
    n_batches = n_batches or truth.n_batches
    t, owner = assign_alerts(alerts, truth)
    delays = []
    for i, d in enumerate(truth.positions):
        mine = t[owner == i]
        delays.append(int(mine[0] - d) if mine.size else int(n_batches - d))
    return delays


def score(alerts, truth: DriftGroundTruth, range_r: int, n_batches: Optional[int] = None) -> Score:
    """Recall, precision and F1 for one detection range.

    An alert at batch ``t`` belongs to the nearest drift ``d <= t`` and is a
    true positive if ``t - d <= range_r``; every other alert is a false
    positive. A drift is detected if at least one of its alerts is in range.
    Without any alert precision is reported as 0 and flagged undefined.
    """
    t, owner = assign_alerts(alerts, truth)
    offsets = t - np.asarray(truth.positions, dtype=int)[np.maximum(owner, 0)] if t.size else t
    in_range = (owner >= 0) & (offsets <= range_r)
    detected = np.zeros(len(truth), dtype=bool)
    detected[owner[in_range]] = True
    n_tp = int(in_range.sum())
    n_fp = int(t.size - n_tp)
    n_fn = int(len(truth) - detected.sum())
    recall = float(detected.mean()) if len(truth) else 0.0
    precision = n_tp / t.size if t.size else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision > 0 else 0.0
    return Score(recall, precision, f1, detection_delays(alerts, truth, n_batches), n_tp, n_fp, n_fn,
                 precision_defined=bool(t.size))


@dataclass
class EvalReport:
    delays: list
    mean_delay: float
    scores: dict  # detection range -> Score
    alert_log: list
    feature_alerts: list
    accuracy: float
    run_metadata: dict

    def to_dict(self) -> dict:
        return {
            "delays": self.delays,
            "mean_delay": self.mean_delay,
            "scores": {str(r): asdict(s) for r, s in self.scores.items()},
            "alert_log": [asdict(a) for a in self.alert_log],
            "feature_alerts": [asdict(a) for a in self.feature_alerts],
            "accuracy": self.accuracy,
            "run_metadata": self.run_metadata,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path) as fh:
            d = json.load(fh)
        return cls(
            delays=d["delays"],
            mean_delay=d["mean_delay"],
            scores={int(r): Score(**s) for r, s in d["scores"].items()},
            alert_log=[DriftAlert(**a) for a in d["alert_log"]],
            feature_alerts=[DriftAlert(**a) for a in d["feature_alerts"]],
            accuracy=d["accuracy"],
            run_metadata=d["run_metadata"],
        )

    def rows(self, config_name: str = "default"):
        seed = self.run_metadata.get("seed")
        for r, s in self.scores.items():
            yield {"config": config_name, "seed": seed, "range": r, "recall": s.recall,
                   "precision": s.precision, "f1": s.f1, "mean_delay": self.mean_delay}


CSV_FIELDS = ["config", "seed", "range", "recall", "precision", "f1", "mean_delay"]


def write_rows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})


def run_detector(batches, cfg: EvalConfig, record_trace: bool = False):
    """Interleaved test-then-train pass; returns ``(detector, model, accuracies)``."""
    batches = list(batches)
    if not batches:
        raise ValueError("empty stream")
    K = batches[0].X.shape[1]
    model = ProbitModel(K, cfg.model.epochs, cfg.model.lr_mu, cfg.model.lr_sigma)
    detector = ERICS(cfg.detector_config, record_trace=record_trace)
    accs = []
    for i, batch in enumerate(batches):
        if batch.X.shape[1] != K:
            raise ValueError(f"batch {i} has {batch.X.shape[1]} features, expected {K}")
        accs.append(float(np.mean(model.predict(batch.X) == batch.y)))
        model.partial_fit(batch)
        detector.update(model.snapshot())
    return detector, model, accs


def run_experiment(batches, truth: DriftGroundTruth, cfg: EvalConfig, seed: Optional[int] = None) -> EvalReport:
    start = time.perf_counter()
    batches = list(batches)
    detector, model, accs = run_detector(batches, cfg)
    alerts = detector.global_alerts
    n_batches = truth.n_batches or len(batches)
    scores = {r: score(alerts, truth, r, n_batches) for r in cfg.detection_ranges}
    delays = detection_delays(alerts, truth, n_batches)
    return EvalReport(
        delays=delays,
        mean_delay=float(np.mean(delays)) if delays else 0.0,
        scores=scores,
        alert_log=alerts,
        feature_alerts=detector.feature_alerts(),
        accuracy=float(np.mean(accs)),
        run_metadata={
            "seed": seed,
            "n_batches": len(batches),
            "config": config_to_dict(cfg),
            "wall_time_s": time.perf_counter() - start,
        },
    )


def config_to_dict(cfg: EvalConfig) -> dict:
    d = asdict(cfg)
    d["detection_ranges"] = list(cfg.detection_ranges)
    return d


def config_space(space: dict):
    """Expand ``{name: [values]}`` over {M, W, beta, epochs, lr_mu, lr_sigma} into EvalConfig overrides."""
    if not space:
        raise ValueError("empty search space")
    allowed = {"M", "W", "beta", "epochs", "lr_mu", "lr_sigma"}
    unknown = set(space) - allowed
    if unknown:
        raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
    keys = sorted(space)
    values = [list(space[k]) if isinstance(space[k], (list, tuple)) else [space[k]] for k in keys]
    if any(not v for v in values):
        raise ValueError("empty search space")
    for combo in itertools.product(*values):
        yield dict(zip(keys, combo))


def apply_params(cfg: EvalConfig, params: dict) -> EvalConfig:
    det = replace(cfg.detector, **{k: params[k] for k in ("M", "W", "beta") if k in params})
    mod = replace(cfg.model, **{k: params[k] for k in ("epochs", "lr_mu", "lr_sigma") if k in params})
    return replace(cfg, detector=det, model=mod)


@dataclass
class SweepResult:
    params: dict
    mean_f1: float
    mean_delay: float
    reports: list

    def row(self):
        return {**self.params, "mean_f1": self.mean_f1, "mean_delay": self.mean_delay}


def grid_search(space: dict, stream_factory, base: EvalConfig, seeds=(0,), rank_range: Optional[int] = None):
    """Evaluate every configuration in ``space`` over ``seeds``.

    ``stream_factory(seed)`` returns ``(batches, truth)``. Results are
    ranked by mean F1 at ``rank_range`` (largest configured range by
    default), ties broken by smaller mean delay.
    """
    combos = list(config_space(space))
    rank_range = rank_range or base.detection_ranges[-1]
    if rank_range not in base.detection_ranges:
        raise ValueError(f"rank range {rank_range} is not one of the configured detection ranges")
    streams = {s: stream_factory(s) for s in seeds}
    results = []
    for params in combos:
        cfg = apply_params(base, params)
        reports = [run_experiment(*streams[s], cfg, seed=s) for s in seeds]
        f1 = float(np.mean([r.scores[rank_range].f1 for r in reports]))
        delay = float(np.mean([r.mean_delay for r in reports]))
        results.append(SweepResult(params, f1, delay, reports))
    results.sort(key=lambda r: (-r.mean_f1, r.mean_delay))
    return results
