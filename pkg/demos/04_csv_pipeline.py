"""From a raw CSV file to a drift report.

A small mixed-type table is written to disk, described by a column schema,
loaded (continuous columns scaled to [0, 1], categoricals one-hot encoded with
an extra level for missing values) and given induced drift before the
detector is scored on it.
"""
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from erics.detector import DetectorConfig
from erics.evaluation import EvalConfig, run_experiment
from erics.streams import StreamSpec, generate_table, to_batches

rng = np.random.default_rng(1)
n = 10_000
df = pd.DataFrame({
    "age": rng.integers(18, 90, n),
    "hours": rng.normal(40, 10, n).round(1),
    "sector": rng.choice(["public", "private", "self", None], n, p=[0.3, 0.5, 0.15, 0.05]),
})
score = (df.age - 50) / 20 + (df.hours - 40) / 10 + (df.sector == "self") * 1.5
df["income"] = np.where(score + rng.normal(0, 0.5, n) > 0, ">50K", "<=50K")

tmp = Path(tempfile.mkdtemp())
df.to_csv(tmp / "income.csv", index=False)
schema = {"columns": {"age": "continuous", "hours": "continuous", "sector": "categorical", "income": "label"},
          "positive_label": ">50K"}

spec = StreamSpec("csv", csv_path=str(tmp / "income.csv"), schema=schema, batch_size=50, seed=0)
table, truth = generate_table(spec)
print("columns:", table.columns)
print("drifts at batches", truth.positions, "of", truth.n_batches)

cfg = EvalConfig(detection_ranges=(20, 50), detector=DetectorConfig(M=50, W=50, beta=1e-3))
report = run_experiment(to_batches(table.X, table.y, 50), truth, cfg, seed=0)
for r, s in report.scores.items():
    print(f"range {r}: recall {s.recall:.2f} precision {s.precision:.2f}")
