"""Synthetic data streams with known drift, plus drift induction for real tables.

Every generator is a pure function of its :class:`StreamSpec`; labels are
returned in {-1, +1} and the stream is cut into batches of ``batch_size``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .probit import LabeledBatch

logger = logging.getLogger(__name__)

GENERATORS = ("sea", "agrawal", "hyperplane", "mixed", "csv")

SEA_THRESHOLDS = (8.0, 9.0, 7.0, 9.5)
N_AGRAWAL_FUNCTIONS = 5


@dataclass(frozen=True)
class DriftEvent:
    """A concept switch starting at sample ``position`` and lasting ``width`` samples."""

    position: int
    width: int = 1
    from_fn: int = 0
    to_fn: int = 1

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("drift width must be positive")


@dataclass
class StreamSpec:
    generator: str = "sea"
    n_samples: int = 20_000
    batch_size: int = 100
    noise_fraction: float = 0.10
    drift_schedule: Optional[Sequence[DriftEvent]] = None  # None: default schedule, (): no drift
    seed: int = 0
    add_bias_column: bool = False
    # hyperplane settings
    n_features: int = 20
    n_drift_features: int = 10
    magnitude: float = 0.5
    sigma_percentage: float = 0.10
    # csv settings
    csv_path: Optional[str] = None
    schema: Optional[object] = None
    n_segments: int = 5
    top_fraction: float = 0.5
    csv_drift: str = "induce"  # "induce", "label_switch" or "none"

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}; expected one of {GENERATORS}")
        if self.n_samples < 1 or self.batch_size < 1:
            raise ValueError("n_samples and batch_size must be positive")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must lie in [0, 1]")
        if self.csv_drift not in ("induce", "label_switch", "none"):
            raise ValueError(f"unknown csv_drift {self.csv_drift!r}")
        if self.drift_schedule is not None:
            self.drift_schedule = tuple(
                d if isinstance(d, DriftEvent) else DriftEvent(**d) if isinstance(d, dict) else DriftEvent(*d)
                for d in self.drift_schedule
            )
        positions = [d.position for d in self.schedule]
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise ValueError("drift positions must be strictly increasing")
        if positions and (positions[0] < 0 or positions[-1] >= self.n_samples):
            raise ValueError("drift positions must lie inside the stream")
        n_fn = 4 if self.generator == "sea" else N_AGRAWAL_FUNCTIONS
        if self.generator in ("sea", "agrawal", "mixed"):
            for d in self.schedule:
                for fn in (d.from_fn, d.to_fn):
                    if not 0 <= fn < n_fn:
                        raise ValueError(f"invalid classification function {fn} for {self.generator}")

    @property
    def schedule(self) -> tuple:
        """The drift schedule, falling back to the generator's default."""
        if self.drift_schedule is None:
            return tuple(default_schedule(self.generator, self.n_samples, self.batch_size))
        return self.drift_schedule


@dataclass
class DriftGroundTruth:
    """Known drift onsets and durations, both in batches."""

    positions: list
    widths: list
    n_batches: int = 0

    def __post_init__(self):
        self.positions = [int(p) for p in self.positions]
        self.widths = [int(w) for w in self.widths]
        if len(self.positions) != len(self.widths):
            raise ValueError("positions and widths must have the same length")
        if self.positions != sorted(self.positions):
            raise ValueError("drift positions must be sorted")

    def __len__(self):
        return len(self.positions)

    @classmethod
    def from_samples(cls, positions, widths, batch_size, n_samples) -> "DriftGroundTruth":
        return cls(
            positions=[p // batch_size for p in positions],
            widths=[max(1, math.ceil(w / batch_size)) for w in widths],
            n_batches=math.ceil(n_samples / batch_size),
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["batch_index", "width"])
            w.writerows(zip(self.positions, self.widths))

    @classmethod
    def from_csv(cls, path, n_batches: int = 0) -> "DriftGroundTruth":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([int(r["batch_index"]) for r in rows], [int(r["width"]) for r in rows], n_batches)


class Table(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    columns: list


# ---------------------------------------------------------------------------
# concepts

def sea_labels(X: np.ndarray, fn: int) -> np.ndarray:
    """+1 iff ``f1 + f2 > theta(fn)``; the third feature is irrelevant."""
    return np.where(X[:, 0] + X[:, 1] > SEA_THRESHOLDS[fn], 1.0, -1.0)


def _between(v, lo, hi):
    return (lo <= v) & (v <= hi)


def agrawal_group_a(attrs: dict, fn: int) -> np.ndarray:
    """Membership in group A for the first five Agrawal classification functions."""
    age, salary, elevel, loan = attrs["age"], attrs["salary"], attrs["elevel"], attrs["loan"]
    young, mid, old = age < 40, (40 <= age) & (age < 60), 60 <= age
    if fn == 0:
        return young | old
    if fn == 1:
        return (
            (young & _between(salary, 50e3, 100e3))
            | (mid & _between(salary, 75e3, 125e3))
            | (old & _between(salary, 25e3, 75e3))
        )
    if fn == 2:
        return (young & (elevel <= 1)) | (mid & (elevel >= 1) & (elevel <= 3)) | (old & (elevel >= 2))
    if fn == 3:
        return (
            (young & np.where(elevel <= 1, _between(salary, 25e3, 75e3), _between(salary, 50e3, 100e3)))
            | (mid & np.where((elevel >= 1) & (elevel <= 3), _between(salary, 50e3, 100e3), _between(salary, 75e3, 125e3)))
            | (old & np.where(elevel >= 2, _between(salary, 50e3, 100e3), _between(salary, 25e3, 75e3)))
        )
    if fn == 4:
        return (
            (young & np.where(_between(salary, 50e3, 100e3), _between(loan, 100e3, 300e3), _between(loan, 200e3, 400e3)))
            | (mid & np.where(_between(salary, 75e3, 125e3), _between(loan, 200e3, 400e3), _between(loan, 300e3, 500e3)))
            | (old & np.where(_between(salary, 25e3, 75e3), _between(loan, 300e3, 500e3), _between(loan, 100e3, 300e3)))
        )
    raise ValueError(f"invalid Agrawal function {fn}")


def agrawal_labels(attrs: dict, fn: int) -> np.ndarray:
    # group A is class 0 in the reference generator, mapped to -1 here
    return np.where(agrawal_group_a(attrs, fn), -1.0, 1.0)


def sample_agrawal(n: int, rng: np.random.Generator) -> dict:
    salary = rng.uniform(20e3, 150e3, n)
    commission = np.where(salary >= 75e3, 0.0, rng.uniform(10e3, 75e3, n))
    age = rng.integers(20, 81, n).astype(float)
    elevel = rng.integers(0, 5, n)
    car = rng.integers(1, 21, n)
    zipcode = rng.integers(0, 9, n)
    hvalue = (9 - zipcode) * 100e3 * (0.5 + rng.random(n))
    hyears = rng.integers(1, 31, n).astype(float)
    loan = rng.uniform(0.0, 500e3, n)
    return dict(salary=salary, commission=commission, age=age, elevel=elevel, car=car,
                zipcode=zipcode, hvalue=hvalue, hyears=hyears, loan=loan)


_AGRAWAL_RANGES = {
    "salary": (20e3, 150e3),
    "commission": (0.0, 75e3),
    "age": (20.0, 80.0),
    "hvalue": (0.0, 1.35e6),
    "hyears": (1.0, 30.0),
    "loan": (0.0, 500e3),
}
_AGRAWAL_LEVELS = {"elevel": range(5), "car": range(1, 21), "zipcode": range(9)}


def encode_agrawal(attrs: dict):
    """Scale continuous attributes to [0, 1] and one-hot the categorical ones."""
    cols, names = [], []
    for key, (lo, hi) in _AGRAWAL_RANGES.items():
        cols.append((attrs[key] - lo) / (hi - lo))
        names.append(key)
    for key, levels in _AGRAWAL_LEVELS.items():
        for level in levels:
            cols.append((attrs[key] == level).astype(float))
            names.append(f"{key}={level}")
    return np.column_stack(cols), names


# ---------------------------------------------------------------------------
# schedules

def concept_assignment(n: int, schedule: Sequence[DriftEvent], rng: np.random.Generator, initial_fn: int = 0):
    """Classification function index per sample.

    Inside a drift window of width ``w`` the sample at offset ``d`` (counting
    from 1) follows the new concept with probability ``d / w``.
    """
    fn = np.full(n, schedule[0].from_fn if schedule else initial_fn, dtype=int)
    u = rng.random(n)
    idx = np.arange(n)
    for ev in schedule:
        after = idx >= ev.position
        offset = idx - ev.position + 1
        p_new = np.clip(offset / ev.width, 0.0, 1.0)
        fn = np.where(after, np.where(u < p_new, ev.to_fn, ev.from_fn), fn)
    return fn


def sudden_schedule(n_samples: int, n_drifts: int = 4, n_functions: int = 4, width: int = 1):
    """``n_drifts`` evenly spaced switches cycling through functions 0, 1, ..."""
    step = n_samples // (n_drifts + 1)
    return tuple(
        DriftEvent(step * (i + 1), width, i % n_functions, (i + 1) % n_functions) for i in range(n_drifts)
    )


def gradual_schedule(n_samples: int, widths: Sequence[int], n_functions: int = 4):
    step = n_samples // (len(widths) + 1)
    return tuple(
        DriftEvent(step * (i + 1), w, i % n_functions, (i + 1) % n_functions) for i, w in enumerate(widths)
    )


def default_schedule(generator: str, n_samples: int, batch_size: int = 100):
    """Desk-scale schedules: 4 drifts at every 20% of the stream."""
    if generator == "sea":
        return sudden_schedule(n_samples)
    if generator == "agrawal":
        return gradual_schedule(n_samples, [5 * batch_size, 10 * batch_size, 5 * batch_size, 10 * batch_size])
    if generator == "mixed":
        return gradual_schedule(n_samples, [1, 10 * batch_size, 1, 10 * batch_size], n_functions=N_AGRAWAL_FUNCTIONS)
    if generator == "hyperplane":
        return (DriftEvent(0, n_samples),)
    return ()


# ---------------------------------------------------------------------------
# generators

def _flip_labels(y, fraction, rng):
    flip = rng.random(y.size) < fraction
    return np.where(flip, -y, y)


def _hyperplane(spec: StreamSpec, rng: np.random.Generator):
    n, K = spec.n_samples, spec.n_features
    X = rng.random((n, K))
    w = rng.random(K)
    direction = np.ones(K)
    n_drift = min(spec.n_drift_features, K)
    direction[:n_drift] = np.where(rng.random(n_drift) < 0.5, -1.0, 1.0)
    active = np.zeros(n, dtype=bool)
    schedule = spec.schedule
    for ev in schedule:
        active[ev.position:ev.position + ev.width] = True
    flip_u = rng.random((n, n_drift))
    y = np.empty(n)
    for i in range(n):
        y[i] = 1.0 if X[i] @ w >= 0.5 * w.sum() else -1.0
        if active[i]:
            w[:n_drift] += direction[:n_drift] * spec.magnitude
            reverse = (0.01 + flip_u[i]) <= spec.sigma_percentage
            direction[:n_drift][reverse] *= -1
    names = [f"x{k}" for k in range(K)]
    return X, y, names, schedule


def generate_table(spec: StreamSpec):
    """Generate the full stream as one table.

    Returns ``(Table, DriftGroundTruth)``; the ground truth is in batches of
    ``spec.batch_size``.
    """
    seq = np.random.SeedSequence(spec.seed)
    rng_x, rng_concept, rng_noise = (np.random.default_rng(s) for s in seq.spawn(3))
    n = spec.n_samples

    if spec.generator == "sea":
        schedule = spec.schedule
        X = rng_x.uniform(0.0, 10.0, (n, 3))
        fn = concept_assignment(n, schedule, rng_concept)
        y = np.empty(n)
        for f in np.unique(fn):
            m = fn == f
            y[m] = sea_labels(X[m], f)
        names = ["f1", "f2", "f3"]
    elif spec.generator in ("agrawal", "mixed"):
        schedule = spec.schedule
        attrs = sample_agrawal(n, rng_x)
        X, names = encode_agrawal(attrs)
        fn = concept_assignment(n, schedule, rng_concept)
        y = np.empty(n)
        for f in np.unique(fn):
            y[fn == f] = agrawal_labels(attrs, f)[fn == f]
    elif spec.generator == "hyperplane":
        X, y, names, schedule = _hyperplane(spec, rng_x)
    else:
        if spec.csv_path is None or spec.schema is None:
            raise ValueError("csv generator needs csv_path and schema")
        table = load_csv(spec.csv_path, spec.schema)
        if spec.csv_drift == "induce":
            X, y, truth = induce_drift(table.X, table.y, spec.n_segments, spec.top_fraction,
                                       seed=spec.seed, batch_size=spec.batch_size)
        else:
            X, y = table.X, table.y
            N = X.shape[0]
            truth = DriftGroundTruth([], [], math.ceil(N / spec.batch_size))
            if spec.csv_drift == "label_switch":
                # the other class becomes the positive one in the second half
                y = np.where(np.arange(N) < N // 2, y, -y)
                truth = DriftGroundTruth.from_samples([N // 2], [1], spec.batch_size, N)
        if spec.n_samples < X.shape[0]:
            X, y = X[:spec.n_samples], y[:spec.n_samples]
        keep = [i for i, p in enumerate(truth.positions) if p * spec.batch_size < X.shape[0]]
        truth = DriftGroundTruth([truth.positions[i] for i in keep], [truth.widths[i] for i in keep],
                                 math.ceil(X.shape[0] / spec.batch_size))
        if spec.add_bias_column:
            X = np.column_stack([X, np.ones(X.shape[0])])
            return Table(X, y, table.columns + ["bias"]), truth
        return Table(X, y, list(table.columns)), truth

    y = _flip_labels(y, spec.noise_fraction, rng_noise)
    if spec.add_bias_column:
        X = np.column_stack([X, np.ones(n)])
        names = names + ["bias"]
    truth = DriftGroundTruth.from_samples(
        [d.position for d in schedule], [d.width for d in schedule], spec.batch_size, n
    )
    return Table(X, y, names), truth


def to_batches(X, y, batch_size: int) -> list:
    return [LabeledBatch(X[i:i + batch_size], y[i:i + batch_size]) for i in range(0, X.shape[0], batch_size)]


def generate(spec: StreamSpec):
    """Return ``(batches, ground_truth)`` for ``spec``."""
    table, truth = generate_table(spec)
    return to_batches(table.X, table.y, spec.batch_size), truth


def partial_drift_stream(n_samples: int = 30_000, batch_size: int = 100, n_informative: int = 8,
                         n_noise: int = 8, n_drifting: Optional[int] = None, drift_at: Optional[int] = None,
                         noise_fraction: float = 0.0, seed: int = 0):
    """Stream where only some informative features change their relation to the label.

    Features are uniform on [-1, 1]. The label is the sign of the sum of the
    informative features; at ``drift_at`` the first ``n_drifting`` of them
    (half of the informative ones by default) flip their sign. Noise features
    never influence the label.

    Returns ``(batches, truth, drifting, noise)`` where the last two are
    feature index arrays.
    """
    n_drifting = n_informative // 2 if n_drifting is None else n_drifting
    drift_at = n_samples // 2 if drift_at is None else drift_at
    rng_x, rng_noise = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    K = n_informative + n_noise
    X = rng_x.uniform(-1.0, 1.0, (n_samples, K))
    w_old = np.concatenate([np.ones(n_informative), np.zeros(n_noise)])
    w_new = w_old.copy()
    w_new[:n_drifting] = -1.0
    score = np.where(np.arange(n_samples) < drift_at, X @ w_old, X @ w_new)
    y = _flip_labels(np.where(score >= 0, 1.0, -1.0), noise_fraction, rng_noise)
    truth = DriftGroundTruth.from_samples([drift_at], [1], batch_size, n_samples)
    return (to_batches(X, y, batch_size), truth, np.arange(n_drifting),
            np.arange(n_informative, K))


# ---------------------------------------------------------------------------
# real data

def _read_schema(schema):
    if isinstance(schema, (str, Path)):
        import yaml

        with open(schema) as fh:
            schema = yaml.safe_load(fh)
    schema = dict(schema)
    positive = None
    if "columns" in schema and isinstance(schema["columns"], dict):
        positive = schema.get("positive_label")
        schema = dict(schema["columns"])
    return schema, positive


def _map_labels(values, positive):
    raw = list(values)
    levels = sorted(set(raw), key=str)
    if positive is None:
        if len(levels) != 2:
            raise ValueError(f"label column must be binary, found {len(levels)} distinct values")
        try:
            # numeric labels such as 0/1 or -1/1: the larger one is positive
            nums = [float(v) for v in levels]
            positive = levels[int(np.argmax(nums))]
        except ValueError:
            positive = levels[1]
    else:
        if str(positive) not in {str(v) for v in levels}:
            raise ValueError(f"positive label {positive!r} does not occur in the data")
        if len(levels) > 2:
            raise ValueError(f"unknown label values besides {positive!r}: {levels}")
    return np.array([1.0 if str(v) == str(positive) else -1.0 for v in raw])


def load_csv(path, schema) -> Table:
    """Read a CSV file and turn it into a model-ready table.

    ``schema`` maps every column to ``continuous`` (min-max scaled to [0, 1]),
    ``categorical`` (one-hot encoded, missing values become their own
    ``unknown`` level), ``numeric`` (used as is), ``ignore`` or ``label``. It
    may be a dict or the path of a YAML/JSON sidecar file.
    """
    import pandas as pd

    schema, positive = _read_schema(schema)
    df = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=["", "NA", "NaN", "nan", "?"])
    missing = [c for c in schema if c not in df.columns]
    if missing:
        raise ValueError(f"schema columns not in file: {missing}")
    undeclared = [c for c in df.columns if c not in schema]
    if undeclared:
        raise ValueError(f"columns without a schema entry: {undeclared}")
    label_cols = [c for c, kind in schema.items() if kind == "label"]
    if len(label_cols) != 1:
        raise ValueError("schema must declare exactly one label column")
    if df.shape[0] == 0:
        raise ValueError("empty table")
    if df[label_cols[0]].isna().any():
        raise ValueError("missing label values")
    y = _map_labels(df[label_cols[0]], positive)

    cols, names = [], []
    for col in df.columns:
        kind = schema[col]
        if kind in ("label", "ignore"):
            continue
        if kind in ("continuous", "numeric"):
            try:
                # astype parses exactly; to_numeric may be off in the last bit
                v = df[col].astype(float).to_numpy()
            except (ValueError, TypeError) as exc:
                raise ValueError(f"unparseable value in continuous column {col!r}: {exc}") from None
            if not np.all(np.isfinite(v)):
                raise ValueError(f"missing or non-finite values in continuous column {col!r}")
            if kind == "continuous":
                lo, hi = v.min(), v.max()
                v = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
            cols.append(v)
            names.append(col)
        elif kind == "categorical":
            s = df[col]
            levels = sorted(s.dropna().unique(), key=str)
            for level in levels:
                cols.append((s == level).to_numpy(dtype=float))
                names.append(f"{col}={level}")
            if s.isna().any():
                cols.append(s.isna().to_numpy(dtype=float))
                names.append(f"{col}=unknown")
        else:
            raise ValueError(f"unknown column type {kind!r} for {col!r}")
    if not cols:
        raise ValueError("no feature columns")
    return Table(np.column_stack(cols), y, names)


def write_csv(path, table: Table, truth: Optional[DriftGroundTruth] = None):
    """Write a table as CSV with a schema sidecar and, optionally, a ground-truth file.

    Returns the paths written.
    """
    import yaml

    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(table.columns) + ["label"])
        for row, label in zip(table.X, table.y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
    schema_path = path.with_suffix(".schema.yaml")
    schema = {"columns": {**{c: "numeric" for c in table.columns}, "label": "label"}, "positive_label": 1}
    with open(schema_path, "w") as fh:
        yaml.safe_dump(schema, fh, sort_keys=False)
    paths = [path, schema_path]
    if truth is not None:
        truth_path = path.with_suffix(".truth.csv")
        truth.to_csv(truth_path)
        paths.append(truth_path)
    return paths


# ---------------------------------------------------------------------------
# drift induction

def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def information_gain(x, y, n_bins: int = 10) -> float:
    """Mutual information (nats) between a [0, 1] feature binned equal-width and the label."""
    bins = np.clip((np.asarray(x, dtype=float) * n_bins).astype(int), 0, n_bins - 1)
    yb = (np.asarray(y) > 0).astype(int)
    joint = np.zeros((n_bins, 2))
    np.add.at(joint, (bins, yb), 1)
    h_y = _entropy(joint.sum(axis=0))
    n = joint.sum()
    h_y_given_x = sum(row.sum() / n * _entropy(row) for row in joint if row.sum() > 0)
    return max(h_y - h_y_given_x, 0.0)


def info_gain_rank(X, y, n_bins: int = 10):
    """Feature indices by descending information gain (ties by index), and the gains."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if np.unique(y).size < 2:
        raise ValueError("label column is constant")
    gains = np.array([information_gain(X[:, k], y, n_bins) for k in range(X.shape[1])])
    order = np.argsort(-gains, kind="stable")
    return order, gains


def induce_drift(X, y, n_segments: int = 5, top_fraction: float = 0.5, seed: int = 0,
                 batch_size: int = 1, shuffle: bool = True):
    """Create sudden real drift by permuting the most informative features.

    Rows are shuffled, features ranked by information gain, and in every
    second segment (the 2nd, 4th, ...) the top ``ceil(top_fraction * K)``
    columns are permuted jointly across the rows of that segment.

    Returns ``(X', y', truth)``; the truth marks every segment boundary in
    batches of ``batch_size``.
    """
    X = np.array(X, dtype=float)
    y = np.array(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty table")
    if not np.all((y == 1) | (y == -1)):
        raise ValueError("labels must be binary in {-1, +1}")
    if n_segments < 2:
        raise ValueError("need at least two segments")
    if not 0.0 <= top_fraction <= 1.0:
        raise ValueError("top_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    N, K = X.shape
    if shuffle:
        perm = rng.permutation(N)
        X, y = X[perm], y[perm]
    order, _ = info_gain_rank(X, y)
    top = np.sort(order[:math.ceil(top_fraction * K)])
    seg = N // n_segments
    bounds = [seg * i for i in range(1, n_segments)]
    edges = [0] + bounds + [N]
    for s in range(1, n_segments, 2):
        lo, hi = edges[s], edges[s + 1]
        if top.size:
            rows = lo + rng.permutation(hi - lo)
            X[np.ix_(np.arange(lo, hi), top)] = X[np.ix_(rows, top)]
    truth = DriftGroundTruth.from_samples(bounds, [1] * len(bounds), batch_size, N)
    return X, y, truth
