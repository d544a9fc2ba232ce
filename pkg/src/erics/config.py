"""Run configuration files.

A run is described by one YAML document::

    name: sea
    seed: 0
    input:
      generator: sea          # or: csv: data.csv + schema: data.schema.yaml
                              # (+ truth: data.truth.csv, csv_drift: none)
      n_samples: 100000
      batch_size: 100
    detector: {M: 75, W: 50, beta: 0.0001}
    model: {epochs: 10, lr_mu: 0.01, lr_sigma: 0.01}
    eval: {warmup_batches: 80, detection_ranges: [10, 20, 50, 100], seeds: [0, 1, 2]}
    sweep: {M: [25, 50, 75], W: [25, 50]}
    output_dir: out/sea

Every section is optional except ``input``. Relative CSV and schema paths
are resolved against the directory of the config file.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .detector import DetectorConfig
from .evaluation import DEFAULT_RANGES, EvalConfig, ModelConfig
from .streams import StreamSpec

DESK_SCALE_SAMPLES = 20_000


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration files."""


@dataclass
class RunConfig:
    stream: StreamSpec
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    detection_ranges: tuple = DEFAULT_RANGES
    warmup_batches: int = 80
    seeds: tuple = ()
    sweep: dict = field(default_factory=dict)
    output_dir: str = "out"
    seed: int = 0
    name: str = "default"
    truth_path: Optional[str] = None

    @property
    def eval(self) -> EvalConfig:
        return EvalConfig(
            detection_ranges=self.detection_ranges,
            warmup_batches=self.warmup_batches,
            detector=self.detector,
            model=self.model,
            batch_size=self.stream.batch_size,
        )

    @property
    def eval_seeds(self) -> tuple:
        return tuple(self.seeds) or (self.seed,)

    def stream_for(self, seed: int) -> StreamSpec:
        return replace(self.stream, seed=int(seed))

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None,
                       per_feature: bool = False, desk_scale: bool = False) -> "RunConfig":
        """Apply command-line flags on top of the file contents."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed), seeds=(), stream=replace(cfg.stream, seed=int(seed)))
        if out is not None:
            cfg = replace(cfg, output_dir=str(out))
        if per_feature:
            cfg = replace(cfg, detector=replace(cfg.detector, per_feature=True))
        if desk_scale and cfg.stream.generator != "csv":
            cfg = replace(cfg, stream=replace(cfg.stream, n_samples=min(cfg.stream.n_samples, DESK_SCALE_SAMPLES)))
        return cfg


def _section(doc, key, cls):
    raw = doc.get(key) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"section {key!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in {key!r}: {sorted(unknown)}")
    return raw


def _stream(raw, base_dir: Path):
    if not isinstance(raw, dict):
        raise ConfigError("section 'input' must be a mapping")
    raw = dict(raw)
    has_csv = "csv" in raw
    has_gen = "generator" in raw and raw["generator"] != "csv"
    if has_csv == has_gen:
        raise ConfigError("input needs exactly one source: a 'generator' or a 'csv' path")
    if has_csv:
        if "schema" not in raw:
            raise ConfigError("csv input needs a 'schema'")
        raw["csv_path"] = str(base_dir / raw.pop("csv"))
        schema = raw["schema"]
        raw["schema"] = str(base_dir / schema) if isinstance(schema, str) else schema
        raw["generator"] = "csv"
    truth = raw.pop("truth", None)
    known = {f.name for f in fields(StreamSpec)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in 'input': {sorted(unknown)}")
    try:
        spec = StreamSpec(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid input section: {exc}") from None
    return spec, (str(base_dir / truth) if truth else None)


def from_dict(doc: dict, base_dir=".") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    allowed = {"name", "seed", "input", "detector", "model", "eval", "sweep", "output_dir"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "input" not in doc:
        raise ConfigError("config needs an 'input' section")
    seed = int(doc.get("seed", 0))
    base_dir = Path(base_dir)
    stream, truth_path = _stream({"seed": seed, **doc["input"]}, base_dir)
    ev = doc.get("eval") or {}
    if not isinstance(ev, dict) or set(ev) - {"detection_ranges", "warmup_batches", "seeds"}:
        raise ConfigError("eval accepts detection_ranges, warmup_batches and seeds")
    sweep = doc.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError("section 'sweep' must be a mapping")
    try:
        cfg = RunConfig(
            stream=stream,
            detector=DetectorConfig(**_section(doc, "detector", DetectorConfig)),
            model=ModelConfig(**_section(doc, "model", ModelConfig)),
            detection_ranges=tuple(int(r) for r in ev.get("detection_ranges", DEFAULT_RANGES)),
            warmup_batches=int(ev.get("warmup_batches", 80)),
            seeds=tuple(int(s) for s in ev.get("seeds", ())),
            sweep=dict(sweep),
            output_dir=str(doc.get("output_dir", "out")),
            seed=seed,
            name=str(doc.get("name", "default")),
            truth_path=truth_path,
        )
        cfg.eval  # validates the ranges
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def bundled_configs() -> list:
    """Names of the configuration files shipped with the package."""
    root = resources.files("erics") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load(path_or_name) -> RunConfig:
    """Load a config from a YAML file, or by the name of a bundled config."""
    path = Path(path_or_name)
    if not path.exists() and str(path_or_name) in bundled_configs():
        text = (resources.files("erics") / "configs" / f"{path_or_name}.yaml").read_text()
        base = Path(".")
    elif path.exists():
        text = path.read_text()
        base = path.parent
    else:
        raise FileNotFoundError(f"no config file or bundled config named {path_or_name!r}")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path_or_name}: {exc}") from None
    return from_dict(doc, base)
