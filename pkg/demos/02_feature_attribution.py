"""Which inputs drifted?

Only four of sixteen features change their relation to the label halfway
through this stream. Running the detector per parameter gives every weight its
own moving average and threshold, so alerts point at the features involved.
"""
import numpy as np
import pandas as pd

from erics.detector import DetectorConfig
from erics.evaluation import EvalConfig, ModelConfig, run_detector
from erics.streams import partial_drift_stream

batches, truth, drifting, noise = partial_drift_stream(n_samples=30_000, seed=0)
d = truth.positions[0]

cfg = EvalConfig(
    detector=DetectorConfig(M=50, W=50, beta=1e-5, per_feature=True),
    model=ModelConfig(epochs=10, lr_mu=0.03, lr_sigma=0.001),
)
detector, model, accs = run_detector(batches, cfg)

alerts = pd.DataFrame([(a.time_step, a.scope) for a in detector.feature_alerts()], columns=["t", "feature"])
window = alerts[(alerts.t >= d) & (alerts.t < d + 15)]
counts = window.feature.value_counts().reindex(range(16), fill_value=0)

role = np.array(["informative"] * 16, dtype=object)
role[drifting] = "drifting"
role[noise] = "noise"
print(pd.DataFrame({"role": role, "alerts in first 15 batches": counts.values}))
print(f"global alerts: {[a.time_step for a in detector.global_alerts]}, drift at batch {d}")
