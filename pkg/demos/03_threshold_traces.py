"""How beta shapes the threshold.

Drift is induced in a stationary table by permuting its most informative
columns in every second segment. The per-batch traces of the moving average,
the window sum and the threshold are written to CSV for plotting; a larger
beta lets the threshold decay faster, which shows up as more alerts.
"""
from pathlib import Path

import pandas as pd

from erics import StreamSpec
from erics.detector import DetectorConfig
from erics.evaluation import EvalConfig, run_detector
from erics.streams import generate_table, induce_drift, to_batches

table, _ = generate_table(StreamSpec("agrawal", n_samples=20_000, drift_schedule=[], seed=0))
X, y, truth = induce_drift(table.X, table.y, n_segments=5, top_fraction=0.5, seed=0, batch_size=100)
batches = to_batches(X, y, 100)
print("induced drifts at batches", truth.positions)

out = Path("demo_traces")
out.mkdir(exist_ok=True)
for beta in (1e-4, 1e-3, 1e-2):
    det, _, _ = run_detector(batches, EvalConfig(detector=DetectorConfig(M=50, W=50, beta=beta)), record_trace=True)
    trace = pd.DataFrame([vars(r) for r in det.trace])
    trace.to_csv(out / f"trace_beta{beta:g}.csv", index=False)
    print(f"beta {beta:g}: {len(det.global_alerts):2d} alerts at {[a.time_step for a in det.global_alerts]}")
