"""Acceptance gate: one test per release criterion, each printed as a
PASS/FAIL line by the conftest hook.

The exact-math criteria (loss oracles, penalty analytics, vote arithmetic,
calibration coverage, metric oracles, determinism) run in seconds.  The
end-to-end criteria train reduced-width models on the synthetic desk dataset
(three seeds) and on the one-class digit protocol; together they need roughly
an hour of CPU.  Set CAAD_TEST_CACHE=<dir> to reuse trained checkpoints
across runs while iterating.
"""

import dataclasses
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from caad.config import desk_run_config, mnist_run_config
from caad.detector import calibrate_threshold
from caad.evalkit import auroc, weighted_f1
from caad.mnist_data import build_one_class_bundle
from caad.objectives import (LossConfig, gradient_penalty, hil_loss,
                             supclass_loss, supcon_loss)
from caad.pipeline import (evaluate_records, fit_detector, infer_test,
                           run_feedback_loop)
from caad.spectral_data import (InjectionPlan, assemble_dataset, desk_grid,
                                desk_scenario)
from caad.trainer import Checkpoint, ablate, train_caad
from caad.uq import MCEmbeddingSet, vote_and_score

from oracles import (auroc_pairwise_oracle, hil_oracle, supclass_oracle,
                     supcon_oracle)

SEEDS = (0, 1, 2)
MNIST_DIR = Path(__file__).parent.parent / "data" / "mnist"

# thresholds under test, pinned once
DESK_ANOMALY_F1_MIN = 0.85
DESK_AUROC_MIN = 0.92
DESK_RUNTIME_MAX_S = 60 * 60
ABLATION_MEDIAN_GAP_MIN = 0.05
MNIST_AUPRC_MIN = 0.95
MNIST_ANOMALY_F1_MIN = 0.90
MNIST_RUNTIME_MAX_S = 30 * 60
LOSS_ORACLE_RTOL = 1e-5
LOSS_ORACLE_BUDGET_S = 60.0


def _cache_dir():
    root = os.environ.get("CAAD_TEST_CACHE")
    if not root:
        return None
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _train_cached(bundle, cfg, tag):
    cache = _cache_dir()
    if cache is not None:
        key = cache / f"{tag}-{bundle.content_hash()[:12]}"
        if (key / "manifest.json").exists():
            ckpt = Checkpoint.load(key)
            if ckpt.config == cfg:
                return ckpt
        ckpt = train_caad(bundle, cfg)
        ckpt.save(key)
        return ckpt
    return train_caad(bundle, cfg)


def desk_bundle(seed):
    cfg = desk_run_config(seed)
    grid = desk_grid(cfg.data.grid_size)
    counts = (cfg.data.n_train, cfg.data.n_val, cfg.data.n_test)
    scenario = desk_scenario(seed=seed, split_counts=counts, grid=grid)
    return assemble_dataset(
        scenario, grid, counts, p_thresh=cfg.data.p_thresh,
        injection=InjectionPlan(fraction=cfg.data.injection_fraction,
                                seed=seed))


@pytest.fixture(scope="session")
def desk_runs():
    """Per-seed full training runs: (bundle, checkpoint, report, seconds)."""
    torch.set_num_threads(max(1, os.cpu_count()))
    runs = {}
    for seed in SEEDS:
        bundle = desk_bundle(seed)
        cfg = desk_run_config(seed)
        t0 = time.monotonic()
        ckpt = _train_cached(bundle, cfg, f"desk-full-{seed}")
        bank, calibration = fit_detector(ckpt, bundle, cfg)
        records = infer_test(ckpt, bundle, bank, calibration, cfg)
        elapsed = time.monotonic() - t0
        report = evaluate_records(records, bundle)
        runs[seed] = (bundle, ckpt, report, elapsed)
    return runs


@pytest.fixture(scope="session")
def nocl_reports(desk_runs):
    """Weighted F1 of the contrastive-learning ablation per seed (the
    incremental configuration: no feedback, no uncertainty, no contrastive
    shaping)."""
    out = {}
    for seed in SEEDS:
        bundle = desk_runs[seed][0]
        cfg = ablate(desk_run_config(seed), no_cl=True, no_uq=True)
        ckpt = _train_cached(bundle, cfg, f"desk-nocl-{seed}")
        bank, calibration = fit_detector(ckpt, bundle, cfg)
        records = infer_test(ckpt, bundle, bank, calibration, cfg)
        out[seed] = evaluate_records(records, bundle)
    return out


# ---------------------------------------------------------------------------
# Criterion: contrastive loss implementations match brute-force oracles
# ---------------------------------------------------------------------------

def test_loss_oracles_200_random_batches():
    rng = np.random.default_rng(2024)
    cfg_tau = (0.07, 0.5, 1.0)
    start = time.monotonic()
    for trial in range(200):
        tau = cfg_tau[trial % 3]
        n = int(rng.integers(2, 17))
        d = int(rng.integers(2, 9))
        v = rng.standard_normal((n, d))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        labels = rng.integers(0, 2, size=n).tolist()
        t = torch.as_tensor(v)
        lt = torch.tensor(labels)
        got = supcon_loss(t, lt, tau).item()
        want = supcon_oracle(v, labels, tau)
        assert got == pytest.approx(want, rel=LOSS_ORACLE_RTOL, abs=1e-9)
        for c in (0, 1):
            got_c = supclass_loss(t, lt, c, tau).item()
            assert got_c == pytest.approx(
                supclass_oracle(v, labels, c, tau),
                rel=LOSS_ORACLE_RTOL, abs=1e-9)
        if trial % 4 == 0:
            nb, na = int(rng.integers(0, 4)), int(rng.integers(0, 4))
            ben = v[:nb] if nb else np.zeros((0, d))
            anom = v[n - na:] if na else np.zeros((0, d))
            got_h = hil_loss(t, t, torch.as_tensor(ben),
                             torch.as_tensor(anom),
                             LossConfig(temperature=tau)).item()
            want_h = hil_oracle(v, v, ben, anom, 1.0, 1.0, 1.0, tau)
            assert got_h == pytest.approx(want_h, rel=LOSS_ORACLE_RTOL,
                                          abs=1e-9)
    assert time.monotonic() - start < LOSS_ORACLE_BUDGET_S


# ---------------------------------------------------------------------------
# Criterion: gradient penalty analytics
# ---------------------------------------------------------------------------

def test_gradient_penalty_analytics():
    torch.manual_seed(0)
    w = torch.randn(12)
    w = w / w.norm()

    def unit_slope(x):
        return x.flatten(1) @ w

    gp = gradient_penalty(unit_slope, torch.rand(64, 12), torch.rand(64, 12),
                          weight=1.0)
    assert gp.item() < 1e-6

    def slope_two(x):
        return 2.0 * x.flatten(1)[:, 0]

    gp2 = gradient_penalty(slope_two, torch.rand(64, 12), torch.rand(64, 12),
                           weight=10.0)
    assert gp2.item() == pytest.approx(10.0, abs=1e-4)


# ---------------------------------------------------------------------------
# Criterion: vote arithmetic exact for every pattern, k = 2..20
# ---------------------------------------------------------------------------

def test_vote_arithmetic_exhaustive():
    for k in range(2, 21):
        for anomalies in range(k + 1):
            benign = k - anomalies
            scores = iter([1.0] * anomalies + [0.0] * benign + [0.5])
            ms = MCEmbeddingSet(samples=np.zeros((k, 2)), mean=np.zeros(2),
                                k=k, seed=0)
            out = vote_and_score(ms, scorer=lambda e: next(scores),
                                 threshold=0.5)
            assert out.votes == (benign, anomalies)
            assert sum(out.votes) == k
            assert out.uncertainty == 1 - max(benign, anomalies) / k
            assert out.certainty == max(benign, anomalies) / k
            assert out.prediction == (1 if anomalies >= benign else 0)


# ---------------------------------------------------------------------------
# Criterion: threshold calibration coverage and monotonicity
# ---------------------------------------------------------------------------

def test_threshold_calibration_coverage():
    rng = np.random.default_rng(7)
    for dist in (rng.standard_normal(1000), rng.exponential(size=1000),
                 rng.uniform(size=1000)):
        thetas = []
        for phi in (0.9, 0.95, 0.99):
            cal = calibrate_threshold(dist, phi)
            frac = float((dist < cal.threshold).mean())
            assert abs(frac - phi) <= 1.0 / len(dist) + 1e-12
            thetas.append(cal.threshold)
        assert thetas == sorted(thetas)


# ---------------------------------------------------------------------------
# Criterion: metric oracles
# ---------------------------------------------------------------------------

def test_auroc_equals_pairwise_oracle_up_to_200():
    rng = np.random.default_rng(17)
    for n in list(range(2, 21)) + [50, 100, 200]:
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        assert auroc(scores, labels) == pytest.approx(
            auroc_pairwise_oracle(scores.tolist(), labels.tolist()),
            abs=1e-12)


def test_weighted_f1_reference_table_row():
    w = weighted_f1(0.93, 0.90, 3894, 3738)
    assert round(w, 2) == 0.92


# ---------------------------------------------------------------------------
# Criterion: end-to-end synthetic spectrum run
# ---------------------------------------------------------------------------

def test_desk_end_to_end(desk_runs):
    _, _, report, elapsed = desk_runs[0]
    assert elapsed <= DESK_RUNTIME_MAX_S
    assert report.anomaly_f1 >= DESK_ANOMALY_F1_MIN, report
    assert report.auroc >= DESK_AUROC_MIN, report


# ---------------------------------------------------------------------------
# Criterion: ablation direction (contrastive shaping carries detection)
# ---------------------------------------------------------------------------

def test_ablation_direction(desk_runs, nocl_reports):
    gaps = [desk_runs[s][2].weighted_f1 - nocl_reports[s].weighted_f1
            for s in SEEDS]
    assert float(np.median(gaps)) >= ABLATION_MEDIAN_GAP_MIN, gaps


# ---------------------------------------------------------------------------
# Criterion: feedback loop improves the model and its confidence
# ---------------------------------------------------------------------------

def test_feedback_loop_direction(desk_runs):
    wins = 0
    details = []
    for seed in SEEDS:
        bundle, ckpt, _, _ = desk_runs[seed]
        outcome = run_feedback_loop(ckpt, bundle, desk_run_config(seed),
                                    h_percent=5.0)
        hil = set(outcome.hil_ids)
        before = np.median([r.certainty for r in outcome.records_before
                            if r.instance_id in hil])
        after = np.median([r.certainty for r in outcome.records_after
                           if r.instance_id in hil])
        improved = (outcome.report_after.weighted_f1
                    >= outcome.report_before.weighted_f1) and after > before
        wins += improved
        details.append((seed, outcome.report_before.weighted_f1,
                        outcome.report_after.weighted_f1, before, after))
    assert wins >= 2, details


# ---------------------------------------------------------------------------
# Criterion: one-class digit protocol at reduced scale
# ---------------------------------------------------------------------------

@pytest.mark.skipif(not MNIST_DIR.exists(),
                    reason="digit IDX files not present")
def test_mnist_one_class_protocol():
    cfg = mnist_run_config(0)
    bundle = build_one_class_bundle(
        MNIST_DIR, benign_digit=cfg.data.benign_digit,
        n_train=cfg.data.n_train, n_val=cfg.data.n_val,
        image_size=cfg.data.grid_size, seed=cfg.data.seed)
    t0 = time.monotonic()
    ckpt = _train_cached(bundle, cfg, "mnist")
    bank, calibration = fit_detector(ckpt, bundle, cfg)
    records = infer_test(ckpt, bundle, bank, calibration, cfg)
    elapsed = time.monotonic() - t0
    report = evaluate_records(records, bundle)
    assert elapsed <= MNIST_RUNTIME_MAX_S
    assert report.auprc >= MNIST_AUPRC_MIN, report
    assert report.anomaly_f1 >= MNIST_ANOMALY_F1_MIN, report


# ---------------------------------------------------------------------------
# Criterion: full-pipeline determinism
# ---------------------------------------------------------------------------

def test_pipeline_determinism(tmp_path):
    def run(into):
        args = ["--run-dir", str(into), "--seed", "5",
                "--set", "data.n_train=24", "--set", "data.n_val=8",
                "--set", "data.n_test=12",
                "--set", "model.gen_base_channels=4",
                "--set", "model.critic_base_channels=4",
                "--set", "model.embedding_dim=16",
                "--set", "train.epochs=1", "--set", "train.batch_size=8",
                "--set", "train.deterministic=true"]
        for cmd in (["data", "assemble"], ["train"], ["calibrate"],
                    ["infer"], ["eval"]):
            subprocess.run([sys.executable, "-m", "caad.cli", *args, *cmd],
                           check=True, capture_output=True)
        return (into / "metrics.json").read_bytes()

    a = run(tmp_path / "a")
    b = run(tmp_path / "b")
    assert a == b
