"""Detection metrics and report assembly: per-class F1, weighted F1, AUROC,
AUPRC, feedback-sweep tables, and before/after uncertainty summaries.

AUROC is the rank statistic with midrank tie handling; AUPRC is the
non-interpolated step sum over ranked thresholds.  Both have brute-force
counterparts in the test suite.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, UndefinedMetric
from .uq import UncertaintyRecord


@dataclass
class MetricsReport:
    benign_f1: float
    anomaly_f1: float
    weighted_f1: float
    auroc: float
    auprc: float
    support: tuple[int, int]          # (n_benign, n_anomaly)
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn), anomaly positive

    def to_json(self) -> dict:
        return asdict(self)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True,
                                         indent=2))

    @classmethod
    def load(cls, path) -> "MetricsReport":
        d = json.loads(Path(path).read_text())
        d["support"] = tuple(d["support"])
        d["confusion"] = tuple(d["confusion"])
        return cls(**d)


def _f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("class has no predicted or actual support; F1 set to 0")
        return 0.0
    return 2 * tp / denom


def weighted_f1(benign_f1: float, anomaly_f1: float,
                n_benign: int, n_anomaly: int) -> float:
    """Support-weighted average of the two per-class F1 scores."""
    total = n_benign + n_anomaly
    if total == 0:
        raise EmptyInput("no support")
    return (n_benign * benign_f1 + n_anomaly * anomaly_f1) / total


def f1_scores(predictions: Sequence[int], labels: Sequence[int]
              ) -> tuple[float, float, float, tuple[int, int, int, int]]:
    """Per-class F1 plus the support-weighted average and the confusion
    counts (tp, fp, tn, fn) with anomaly as the positive class."""
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if len(pred) == 0:
        raise EmptyInput("empty predictions")
    if len(pred) != len(lab):
        raise ValueError("predictions and labels differ in length")
    tp = int(((pred == 1) & (lab == 1)).sum())
    fp = int(((pred == 1) & (lab == 0)).sum())
    tn = int(((pred == 0) & (lab == 0)).sum())
    fn = int(((pred == 0) & (lab == 1)).sum())
    anomaly_f1 = _f1_from_counts(tp, fp, fn)
    benign_f1 = _f1_from_counts(tn, fn, fp)   # benign as positive class
    wt = weighted_f1(benign_f1, anomaly_f1, tn + fp, tp + fn)
    return benign_f1, anomaly_f1, wt, (tp, fp, tn, fn)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Rank-based AUROC (probability a random anomaly outscores a random
    benign instance, ties counting half)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUROC needs both classes present")
    ranks = rankdata(s)  # midranks for ties
    pos_rank_sum = ranks[y == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auprc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under precision-recall via step-wise (non-interpolated) summation
    over the ranked score thresholds."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise UndefinedMetric("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    tp = np.cumsum(y_sorted == 1)
    fp = np.cumsum(y_sorted == 0)
    # evaluate only at the last index of each tied-score block
    block_end = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tp, fp = tp[block_end], fp[block_end]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    prev_recall = np.r_[0.0, recall[:-1]]
    return float(((recall - prev_recall) * precision).sum())


def compute_report(scores: Sequence[float], predictions: Sequence[int],
                   labels: Sequence[int]) -> MetricsReport:
    benign_f1, anomaly_f1, wt, confusion = f1_scores(predictions, labels)
    lab = np.asarray(labels)
    return MetricsReport(
        benign_f1=benign_f1, anomaly_f1=anomaly_f1, weighted_f1=wt,
        auroc=auroc(scores, labels), auprc=auprc(scores, labels),
        support=(int((lab == 0).sum()), int((lab == 1).sum())),
        confusion=confusion)


# -- feedback sweep ----------------------------------------------------------

def feedback_sweep(loop_fn: Callable[[float], MetricsReport],
                   h_values: Sequence[float],
                   out_csv: Optional[str | Path] = None) -> list[dict]:
    """Evaluate the full feedback loop at each expert-budget percentage.

    loop_fn(h) must run select -> label -> retrain -> evaluate and return the
    resulting metrics; h = 0 means no feedback (the pre-retraining baseline).
    """
    rows = []
    for h in h_values:
        report = loop_fn(float(h))
        rows.append({"h_percent": float(h),
                     "anomaly_f1": report.anomaly_f1,
                     "auroc": report.auroc,
                     "weighted_f1": report.weighted_f1})
    if out_csv is not None:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return rows


# -- uncertainty box plots ---------------------------------------------------

def five_number(values: Sequence[float]) -> dict:
    v = np.asarray(values, dtype=np.float64)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return {"min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max()), "n": int(len(v))}


def uncertainty_boxplot_data(records_before: Sequence[UncertaintyRecord],
                             records_after: Sequence[UncertaintyRecord],
                             hil_labels: Mapping[str, int]) -> dict:
    """Certainty five-number summaries for the expert-labeled instances,
    before vs after retraining, grouped by the expert's label.  A group with
    no members is omitted."""
    before = {r.instance_id: r for r in records_before}
    after = {r.instance_id: r for r in records_after}
    out = {}
    for group, wanted in (("hil_benign", 0), ("hil_anomaly", 1)):
        ids = [i for i, lab in hil_labels.items() if lab == wanted]
        ids = [i for i in ids if i in before and i in after]
        if not ids:
            continue
        out[group] = {
            "before": five_number([before[i].certainty for i in ids]),
            "after": five_number([after[i].certainty for i in ids]),
        }
    return out


# -- results table -----------------------------------------------------------

TABLE_COLUMNS = ("Benign F1", "Anomaly F1", "AUROC", "AUPRC", "Avg.Wt. F1")


def format_results_table(rows: Iterable[tuple[str, MetricsReport]]) -> str:
    """Side-by-side model comparison in the usual five-column layout."""
    lines = ["| Model | " + " | ".join(TABLE_COLUMNS) + " |",
             "|" + "---|" * (len(TABLE_COLUMNS) + 1)]
    for name, r in rows:
        vals = (r.benign_f1, r.anomaly_f1, r.auroc, r.auprc, r.weighted_f1)
        lines.append("| " + name + " | "
                     + " | ".join(f"{v:.2f}" for v in vals) + " |")
    return "\n".join(lines)
