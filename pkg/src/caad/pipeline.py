"""End-to-end wiring: fit the detector from a trained checkpoint, run
uncertain inference over the test split, evaluate, and drive the single-round
expert feedback loop (select -> label -> retrain -> re-evaluate)."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import torch

from .config import RunConfig
from .detector import (CentroidBank, ThresholdCalibration, calibrate_threshold,
                       fit_centroids, score_batch)
from .evalkit import MetricsReport, compute_report, uncertainty_boxplot_data
from .feedback_store import FeedbackRecord, oracle_label
from .spectral_data import DatasetBundle
from .trainer import Checkpoint, retrain_caad_ef
from .uq import (UncertaintyRecord, infer_with_uncertainty, mc_embed_batch,
                 select_hil)


def embed_eval(critic, xs: np.ndarray) -> np.ndarray:
    """Deterministic (dropout-off) embeddings of a split."""
    from .uq import _embed_chunked
    critic.eval()
    return _embed_chunked(critic, torch.as_tensor(xs),
                          dropout_active=False).numpy()


def fit_detector(checkpoint: Checkpoint, bundle: DatasetBundle,
                 cfg: Optional[RunConfig] = None
                 ) -> tuple[CentroidBank, ThresholdCalibration]:
    """Centroids from the train split, threshold from benign val scores.

    A validation instance's score is the per-instance median of its MC-sample
    scores: the majority vote at test time flips exactly when the median
    sample score crosses the threshold, so calibrating on the same statistic
    pins the benign vote false-positive rate at 1 - strictness.  With
    uncertainty ablated the deterministic eval score is used instead.
    Centroid embeddings always come from the critic in eval mode.
    """
    cfg = cfg or checkpoint.config
    bank = fit_centroids(bundle.train, cfg.detector.clusters,
                         checkpoint.critic, seed=cfg.detector.seed)
    if cfg.ablation.no_uq:
        val_emb = embed_eval(checkpoint.critic, bundle.val)
        val_scores = score_batch(val_emb, bank, cfg.detector.centroid_agg)
    else:
        checkpoint.critic.eval()
        samples, _ = mc_embed_batch(checkpoint.critic,
                                    torch.as_tensor(bundle.val),
                                    k=cfg.uq.mc_samples, seed=cfg.uq.seed)
        per_sample = np.stack(
            [score_batch(s, bank, cfg.detector.centroid_agg)
             for s in samples])                      # (k, N)
        val_scores = np.median(per_sample, axis=0)   # per-instance medians
    calibration = calibrate_threshold(val_scores, cfg.detector.strictness)
    calibration.m = bank.m
    return bank, calibration


def infer_test(checkpoint: Checkpoint, bundle: DatasetBundle,
               bank: CentroidBank, calibration: ThresholdCalibration,
               cfg: Optional[RunConfig] = None) -> list[UncertaintyRecord]:
    cfg = cfg or checkpoint.config
    scorer = lambda emb: score_batch(emb, bank, cfg.detector.centroid_agg)
    return infer_with_uncertainty(
        checkpoint.critic, torch.as_tensor(bundle.test), bundle.ids["test"],
        scorer, calibration.threshold, k=cfg.uq.mc_samples, seed=cfg.uq.seed,
        mc_dropout=not cfg.ablation.no_uq)


def evaluate_records(records: Sequence[UncertaintyRecord],
                     bundle: DatasetBundle,
                     exclude_ids: Optional[set[str]] = None) -> MetricsReport:
    """Metrics over the test split; exclude_ids supports the variant where
    the expert-labeled instances are removed before scoring."""
    truth = dict(zip(bundle.ids["test"], bundle.test_labels.tolist()))
    exclude = exclude_ids or set()
    kept = [r for r in records if r.instance_id not in exclude]
    scores = [r.score for r in kept]
    preds = [r.prediction for r in kept]
    labels = [truth[r.instance_id] for r in kept]
    return compute_report(scores, preds, labels)


@dataclass
class FeedbackOutcome:
    records_before: list[UncertaintyRecord]
    report_before: MetricsReport
    hil_ids: list[str]
    feedback: list[FeedbackRecord]
    checkpoint_after: Checkpoint
    records_after: list[UncertaintyRecord]
    report_after: MetricsReport
    report_after_filtered: MetricsReport   # HIL instances removed
    boxplot: dict


def run_feedback_loop(checkpoint: Checkpoint, bundle: DatasetBundle,
                      cfg: Optional[RunConfig] = None,
                      h_percent: Optional[float] = None,
                      feedback: Optional[Mapping[str, int]] = None
                      ) -> FeedbackOutcome:
    """One full expert-feedback round.

    When `feedback` is None the expert is simulated from the dataset's ground
    truth (oracle mode).  h_percent = 0 short-circuits to the pre-feedback
    state so sweeps have a clean baseline row.
    """
    cfg = cfg or checkpoint.config
    h = cfg.retrain.h_percent if h_percent is None else h_percent

    bank, calibration = fit_detector(checkpoint, bundle, cfg)
    records_before = infer_test(checkpoint, bundle, bank, calibration, cfg)
    report_before = evaluate_records(records_before, bundle)

    if h == 0:
        return FeedbackOutcome(
            records_before, report_before, [], [], checkpoint,
            records_before, report_before, report_before, {})

    hil_ids = select_hil(records_before, h)
    if feedback is None:
        truth = dict(zip(bundle.ids["test"], bundle.test_labels.tolist()))
        fb_records = oracle_label(hil_ids, truth)
    else:
        fb_records = [FeedbackRecord(i, int(feedback[i]), source="human")
                      for i in hil_ids if i in feedback]
    fb_map = {r.instance_id: r.label for r in fb_records}

    retrain_cfg = dataclasses.replace(
        cfg, retrain=dataclasses.replace(cfg.retrain, h_percent=h))
    after = retrain_caad_ef(checkpoint, bundle, fb_map, retrain_cfg)

    bank2, calibration2 = fit_detector(after, bundle, cfg)
    records_after = infer_test(after, bundle, bank2, calibration2, cfg)
    report_after = evaluate_records(records_after, bundle)
    report_after_filtered = evaluate_records(records_after, bundle,
                                             exclude_ids=set(hil_ids))
    box = uncertainty_boxplot_data(records_before, records_after, fb_map)
    return FeedbackOutcome(records_before, report_before, hil_ids, fb_records,
                           after, records_after, report_after,
                           report_after_filtered, box)


def sweep_feedback(checkpoint: Checkpoint, bundle: DatasetBundle,
                   h_values: Sequence[float],
                   cfg: Optional[RunConfig] = None,
                   out_csv: Optional[str | Path] = None) -> list[dict]:
    """Metrics table over expert-budget percentages (the h = 0 row is the
    no-feedback baseline)."""
    from .evalkit import feedback_sweep
    cfg = cfg or checkpoint.config

    def loop(h: float) -> MetricsReport:
        outcome = run_feedback_loop(checkpoint, bundle, cfg, h_percent=h)
        return outcome.report_after

    return feedback_sweep(loop, h_values, out_csv=out_csv)
