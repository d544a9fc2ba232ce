"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (printed in the pytest summary) and then
asserts. Scenarios that need model learning rates follow one protocol: the
rates are picked by a grid search on tuning seeds 100-104 and the criterion
is judged on the disjoint seeds 0-9.
"""
import time

import numpy as np
import yaml

from erics.cli import main
from erics.detector import ERICS, DetectorConfig, ma_generic, ma_probit, window_sum
from erics.distributions import GaussianParamDist
from erics.evaluation import EvalConfig, ModelConfig, grid_search, run_detector, run_experiment
from erics.probit import gradients, log_likelihood
from erics.streams import (
    DriftEvent,
    StreamSpec,
    generate,
    generate_table,
    induce_drift,
    partial_drift_stream,
    to_batches,
)

TUNING_SEEDS = tuple(range(100, 105))
EVAL_SEEDS = tuple(range(10))


def test_closed_form_equivalence(criterion):
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    for i in range(1000):
        K = (1, 5, 50, 500)[i % 4]
        M = int(rng.integers(1, 6))
        mu = np.cumsum(rng.normal(0, 0.2, (M + 1, K)), axis=0)
        s2 = np.exp(np.cumsum(rng.normal(0, 0.2, (M + 1, K)), axis=0))
        psis = [GaussianParamDist(m, s) for m, s in zip(mu, s2)]
        a, b = ma_probit(psis), ma_generic(psis)
        worst = max(worst, abs(a - b) / abs(b))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    criterion(1, ok, f"max rel err {worst:.2e} (<= 1e-9), {elapsed:.2f}s (< 5s)")
    assert ok


def test_gradient_oracle(criterion):
    rng = np.random.default_rng(1)
    eps = 1e-5
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        K, n = int(rng.integers(1, 10)), int(rng.integers(10, 100))
        mu, sigma = rng.normal(0, 1, K), rng.uniform(0.1, 2.0, K)
        X = rng.normal(0, 1, (n, K))
        y = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        g_mu, g_sigma = gradients(mu, sigma, X, y)
        for k in range(K):
            e = np.zeros(K)
            e[k] = eps
            fd_mu = (log_likelihood(mu + e, sigma, X, y) - log_likelihood(mu - e, sigma, X, y)) / (2 * eps)
            fd_s = (log_likelihood(mu, sigma + e, X, y) - log_likelihood(mu, sigma - e, X, y)) / (2 * eps)
            worst = max(worst, abs(g_mu[k] - fd_mu) / max(abs(fd_mu), 1e-8),
                        abs(g_sigma[k] - fd_s) / max(abs(fd_s), 1e-8))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 10.0
    criterion(2, ok, f"max rel err {worst:.2e} (<= 1e-4), {elapsed:.2f}s (< 10s)")
    assert ok


def test_stationarity_silence(criterion):
    det = ERICS(DetectorConfig(M=50, W=50, warmup_batches=0), alpha0=0.0)
    psi = GaussianParamDist(np.array([0.3, -1.2, 2.0]), np.array([0.5, 1.0, 4.0]))
    ma_values = set()
    for _ in range(100_000):
        det.update(psi)
        ma_values.add(det.state.ma)
    ok = not det.alerts and ma_values == {0.0}
    criterion(3, ok, f"{len(det.alerts)} alerts over 1e5 frozen steps, MA values {sorted(ma_values)}")
    assert ok


def test_alpha_decay_law(criterion):
    beta = 1e-4
    det = ERICS(DetectorConfig(M=10, W=10, beta=beta, warmup_batches=0), alpha0=1.0, record_trace=True)
    psi = GaussianParamDist(np.zeros(2), np.ones(2))
    det.run([psi] * 600)
    alphas = np.array([r.alpha for r in det.trace])
    product = np.cumprod([1.0 - beta * j for j in range(1, 601)])
    first_below = int(np.argmax(alphas < 1e-6)) + 1 if np.any(alphas < 1e-6) else None
    ok = (not det.alerts and first_below is not None and np.all(alphas >= 0)
          and np.allclose(alphas, product, rtol=1e-12, atol=0))
    criterion(4, ok, f"alpha < 1e-6 after {first_below} steps (<= 600), matches product, min {alphas.min():.2e}")
    assert ok


def test_telescoping(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(2000):
        W = int(rng.integers(1, 200))
        # MA stays below ~1 in practice; the bound is absolute, so magnitudes far above
        # that would only measure rounding of the increments
        ma = rng.exponential(1.0, W + 1) * rng.choice([1e-6, 1e-3, 1.0, 10.0])
        worst = max(worst, abs(window_sum(ma) - (ma[-1] - ma[0])))
    ok = worst <= 1e-12
    criterion(5, ok, f"max |window_sum - (MA_t - MA_t-W)| = {worst:.2e} (<= 1e-12)")
    assert ok


# -- detection scenarios ---------------------------------------------------------

def _select(space, factory, base, rank_range):
    best = grid_search(space, factory, base, seeds=TUNING_SEEDS, rank_range=rank_range)[0]
    return best.params


def test_sea_desk_scale_detection(criterion):
    start = time.perf_counter()
    base = EvalConfig(detector=DetectorConfig(M=75, W=50, beta=0.0001), model=ModelConfig(epochs=10))

    def sea(seed):
        return generate(StreamSpec("sea", n_samples=20_000, batch_size=100, seed=seed))

    params = _select({"lr_mu": [0.01, 0.03, 0.1], "lr_sigma": [0.01, 0.1]}, sea, base, 100)
    cfg = EvalConfig(detector=base.detector, model=ModelConfig(10, params["lr_mu"], params["lr_sigma"]))
    reports = [run_experiment(*sea(s), cfg, seed=s) for s in EVAL_SEEDS]
    recall = float(np.mean([r.scores[100].recall for r in reports]))
    precision = float(np.mean([r.scores[100].precision for r in reports]))
    strict = [run_experiment(*sea(s), base, seed=s).scores[100] for s in EVAL_SEEDS]
    elapsed = time.perf_counter() - start
    ok = recall >= 0.75 and precision >= 0.5 and elapsed < 60
    n_alerts = float(np.mean([len(r.alert_log) for r in reports]))
    prec10 = float(np.mean([r.scores[10].precision for r in reports]))
    criterion(6, ok, f"lr {params}: recall@100 {recall:.3f} (>= 0.75), precision@100 {precision:.3f} "
                     f"(>= 0.5), {elapsed:.1f}s; {n_alerts:.0f} alerts/seed, precision@10 {prec10:.2f}; "
                     f"untuned lr 0.01/0.01 gives recall "
                     f"{np.mean([s.recall for s in strict]):.3f}, precision {np.mean([s.precision for s in strict]):.3f}")
    assert ok


def test_hyperplane_incremental_delay(criterion):
    # stationary first half so the model converges, then incremental drift to the end
    def hyperplane(seed):
        spec = StreamSpec("hyperplane", n_samples=40_000, batch_size=100, seed=seed, add_bias_column=True,
                          n_features=20, n_drift_features=10, magnitude=0.5,
                          drift_schedule=[DriftEvent(20_000, 20_000)])
        return generate(spec)

    base = EvalConfig(detection_ranges=(20,), detector=DetectorConfig(M=100, W=50, beta=0.0001))
    params = _select({"lr_mu": [0.01, 0.03, 0.1, 0.3], "lr_sigma": [0.01, 0.1]}, hyperplane, base, 20)
    cfg = EvalConfig(detection_ranges=(20,), detector=base.detector,
                     model=ModelConfig(10, params["lr_mu"], params["lr_sigma"]))
    reports = [run_experiment(*hyperplane(s), cfg, seed=s) for s in EVAL_SEEDS]
    delay = float(np.mean([r.mean_delay for r in reports]))
    early = float(np.mean([sum(a.time_step < 200 for a in r.alert_log) for r in reports]))
    ok = delay <= 20
    criterion(7, ok, f"lr {params}: mean first-alert delay {delay:.1f} batches (<= 20), "
                     f"{early:.1f} alerts/seed before onset, F1@20 {np.mean([r.scores[20].f1 for r in reports]):.2f}")
    assert ok


def _attribution(cfg, seed):
    batches, truth, drifting, noise = partial_drift_stream(n_samples=30_000, batch_size=100, seed=seed)
    detector, _, _ = run_detector(batches, cfg)
    d = truth.positions[0]
    K = batches[0].X.shape[1]
    counts = np.zeros(K, dtype=int)
    for a in detector.feature_alerts():
        if d <= a.time_step < d + 15:
            counts[a.scope] += 1
    rest = np.setdiff1d(np.arange(K), drifting)
    med_d, med_rest = float(np.median(counts[drifting])), float(np.median(counts[rest]))
    return med_d > med_rest and counts[noise].sum() == 0, med_d, med_rest, int(counts[noise].sum())


def test_per_feature_attribution(criterion):
    def make(beta, lr_mu, lr_sigma):
        return EvalConfig(detector=DetectorConfig(M=50, W=50, beta=beta, per_feature=True),
                          model=ModelConfig(10, lr_mu, lr_sigma))

    # pick the settings on tuning seeds by the number of seeds meeting the criterion
    grid = [(b, m, s) for b in (1e-5, 1e-4) for m in (0.02, 0.03, 0.05) for s in (0.001, 0.01)]
    tuned = []
    for params in grid:
        res = [_attribution(make(*params), seed) for seed in TUNING_SEEDS]
        tuned.append((-sum(r[0] for r in res), -np.mean([r[1] - r[2] for r in res]), params))
    params = min(tuned)[2]
    results = [_attribution(make(*params), seed) for seed in EVAL_SEEDS]
    passed = sum(r[0] for r in results)
    ok = passed == len(EVAL_SEEDS)
    criterion(8, ok, f"beta/lr_mu/lr_sigma {params}: {passed}/10 seeds; median alerts D "
                     f"{np.mean([r[1] for r in results]):.1f} vs rest {np.mean([r[2] for r in results]):.1f}, "
                     f"noise-feature alerts {sum(r[3] for r in results)}")
    assert ok


def test_beta_sensitivity_ordering(criterion):
    table, _ = generate_table(StreamSpec("agrawal", n_samples=20_000, drift_schedule=[], seed=0))
    X, y, truth = induce_drift(table.X, table.y, n_segments=5, top_fraction=0.5, seed=0, batch_size=100)
    batches = to_batches(X, y, 100)
    counts = []
    for beta in (0.0001, 0.001, 0.01):
        detector, _, _ = run_detector(batches, EvalConfig(detector=DetectorConfig(M=50, W=50, beta=beta)))
        counts.append(len(detector.global_alerts))
    ok = counts == sorted(counts)
    criterion(9, ok, f"post-warm-up alerts for beta 1e-4/1e-3/1e-2: {counts} (non-decreasing)")
    assert ok


def test_evaluate_determinism(criterion, tmp_path):
    doc = {"name": "det", "seed": 0, "input": {"generator": "sea", "n_samples": 20_000},
           "detector": {"M": 75, "W": 50, "beta": 0.0001}, "eval": {"seeds": [0, 1, 2]}}
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump(doc))
    codes = [main(["evaluate", "--config", str(cfg), "--out", str(tmp_path / d)]) for d in ("a", "b")]
    a, b = (tmp_path / "a" / "report.csv").read_bytes(), (tmp_path / "b" / "report.csv").read_bytes()
    ok = codes == [0, 0] and a == b and len(a) > 0
    criterion(10, ok, f"exit codes {codes}, report CSVs identical: {a == b} ({len(a)} bytes)")
    assert ok
