"""HTTP service for the expert-feedback loop.

Serves the most uncertain test instances for labeling, persists labels through
an append-only log (so a restart never loses work), runs the retraining job on
a single background worker, and publishes before/after metrics plus the
uncertainty summaries for the labeled instances.

Phases move strictly idle -> inferring -> awaiting_labels -> retraining ->
done.  On startup the phase is recovered from the artifacts present in the run
directory: an existing inference report puts the service back into
awaiting_labels with all previously submitted labels intact.
"""

from __future__ import annotations

import base64
import dataclasses
import json
import threading
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import RunConfig
from .detector import CentroidBank, ThresholdCalibration
from .evalkit import uncertainty_boxplot_data
from .feedback_store import FeedbackLog, FeedbackRecord
from .pipeline import evaluate_records, fit_detector, infer_test
from .spectral_data import DatasetBundle
from .trainer import Checkpoint, retrain_caad_ef
from .uq import UncertaintyRecord, read_report, select_hil, write_report

PHASES = ("idle", "inferring", "awaiting_labels", "retraining", "done")


@dataclass
class SessionState:
    phase: str = "idle"
    hil_ids: list[str] = field(default_factory=list)
    records: list[UncertaintyRecord] = field(default_factory=list)
    retrained_checkpoint: Optional[str] = None
    error: Optional[str] = None


class LabelBody(BaseModel):
    instance_id: str
    label: int
    session_id: str = ""


class RetrainBody(BaseModel):
    override_empty: bool = False


class FeedbackService:
    """All mutable state behind one lock; FastAPI handlers stay thin."""

    def __init__(self, run_dir: Path, cfg: RunConfig):
        self.run_dir = Path(run_dir)
        self.cfg = cfg
        missing = [p for p in ("dataset", "checkpoint", "calibration.json",
                               "bank.npz")
                   if not (self.run_dir / p).exists()]
        if missing:
            raise FileNotFoundError(
                f"feedback service needs artifacts in {self.run_dir}; "
                f"missing: {missing} (run `caad data assemble`, `caad train`, "
                f"`caad calibrate` first)")
        self.bundle = DatasetBundle.load(self.run_dir / "dataset")
        self.checkpoint = Checkpoint.load(self.run_dir / "checkpoint")
        self.calibration = ThresholdCalibration.load(
            self.run_dir / "calibration.json")
        z = np.load(self.run_dir / "bank.npz")
        self.bank = CentroidBank(int(z["m"]), z["centroids"],
                                 z["centroid_embeddings"])
        self.log = FeedbackLog(self.run_dir / "feedback.jsonl")
        self.truth = dict(zip(self.bundle.ids["test"],
                              self.bundle.test_labels.tolist()))
        self.lock = threading.Lock()
        self.state = SessionState()
        self._worker: Optional[threading.Thread] = None
        self._recover()

    # -- state recovery and transitions ----------------------------------

    def _recover(self):
        report_path = self.run_dir / "inference.jsonl"
        if (self.run_dir / "metrics-before-after.json").exists():
            self.state.phase = "done"
            self.state.retrained_checkpoint = "checkpoint-retrained"
        if report_path.exists():
            self.state.records = read_report(report_path)
            self.state.hil_ids = select_hil(self.state.records,
                                            self.cfg.retrain.h_percent)
            if self.state.phase == "idle":
                self.state.phase = "awaiting_labels"

    def _transition(self, expected: str, to: str):
        if self.state.phase != expected:
            raise HTTPException(
                409, f"phase is '{self.state.phase}', expected '{expected}'")
        self.state.phase = to

    # -- operations -------------------------------------------------------

    def status(self) -> dict:
        with self.lock:
            labeled = self.log.effective_labels()
            in_scope = [i for i in labeled if i in set(self.state.hil_ids)]
            return {
                "phase": self.state.phase,
                "h_percent": self.cfg.retrain.h_percent,
                "n_hil": len(self.state.hil_ids),
                "n_labeled": len(in_scope),
                "retrained_checkpoint": self.state.retrained_checkpoint,
                "error": self.state.error,
            }

    def run_inference(self) -> dict:
        with self.lock:
            self._transition("idle", "inferring")
        try:
            records = infer_test(self.checkpoint, self.bundle, self.bank,
                                 self.calibration, self.cfg)
            write_report(records, self.run_dir / "inference.jsonl")
            report = evaluate_records(records, self.bundle)
            report.save(self.run_dir / "metrics-before.json")
            with self.lock:
                self.state.records = records
                self.state.hil_ids = select_hil(records,
                                                self.cfg.retrain.h_percent)
                self.state.phase = "awaiting_labels"
        except Exception as e:
            with self.lock:
                self.state.phase = "idle"
                self.state.error = str(e)
            raise HTTPException(500, f"inference failed: {e}")
        return self.status()

    def list_uncertain(self, h: Optional[float]) -> list[dict]:
        with self.lock:
            if self.state.phase != "awaiting_labels":
                raise HTTPException(
                    409, f"phase is '{self.state.phase}', expected "
                    f"'awaiting_labels'")
            h = self.cfg.retrain.h_percent if h is None else h
            ids = select_hil(self.state.records, h) if h > 0 else []
            if len(ids) > len(self.state.hil_ids):
                self.state.hil_ids = ids  # expanding the labeling scope
            by_id = {r.instance_id: r for r in self.state.records}
            labeled = self.log.effective_labels()
            return [{
                "instance_id": i,
                "uncertainty": by_id[i].uncertainty,
                "certainty": by_id[i].certainty,
                "score": by_id[i].score,
                "votes": list(by_id[i].votes),
                "label": labeled.get(i),
                "grid_url": f"/instances/{i}/grid",
            } for i in ids]

    def grid_payload(self, instance_id: str) -> dict:
        try:
            idx = self.bundle.ids["test"].index(instance_id)
        except ValueError:
            raise HTTPException(404, f"unknown instance {instance_id}")
        values = self.bundle.test[idx]
        quant = np.clip(values * 255.0, 0, 255).astype(np.uint8)
        return {
            "instance_id": instance_id,
            "shape": list(values.shape),
            "values": values.tolist(),
            "quantized_b64": base64.b64encode(quant.tobytes()).decode(),
        }

    def submit_label(self, body: LabelBody) -> dict:
        with self.lock:
            if self.state.phase != "awaiting_labels":
                raise HTTPException(409, "labels only accepted while "
                                         "awaiting_labels")
            if body.instance_id not in self.truth:
                raise HTTPException(404, f"unknown instance "
                                         f"{body.instance_id}")
            if body.instance_id not in set(self.state.hil_ids):
                raise HTTPException(
                    422, f"{body.instance_id} is outside the current "
                    f"expert-review scope")
            if body.label not in (0, 1):
                raise HTTPException(422, "label must be 0 or 1")
            self.log.append(FeedbackRecord(
                instance_id=body.instance_id, label=body.label,
                source="human", ts=time.time(), session_id=body.session_id))
            labeled = self.log.effective_labels()
            n = len([i for i in labeled if i in set(self.state.hil_ids)])
            return {"ok": True, "n_labeled": n,
                    "n_hil": len(self.state.hil_ids)}

    def trigger_retrain(self, body: RetrainBody) -> dict:
        with self.lock:
            if self.state.phase == "retraining":
                raise HTTPException(409, "a retraining job is already "
                                         "running")
            if self.state.phase != "awaiting_labels":
                raise HTTPException(409, f"phase is '{self.state.phase}', "
                                         f"expected 'awaiting_labels'")
            labels = {i: lab for i, lab in self.log.effective_labels().items()
                      if i in set(self.state.hil_ids)}
            if not labels and not body.override_empty:
                raise HTTPException(422, "no labels submitted; pass "
                                         "override_empty to retrain anyway")
            self.state.phase = "retraining"
            self.state.error = None
            self._worker = threading.Thread(
                target=self._retrain_job, args=(labels,), daemon=True)
            self._worker.start()
        return self.status()

    def _retrain_job(self, labels: dict[str, int]):
        try:
            before_records = self.state.records
            report_before = evaluate_records(before_records, self.bundle)
            new_ckpt = retrain_caad_ef(self.checkpoint, self.bundle, labels,
                                       self.cfg)
            new_ckpt.save(self.run_dir / "checkpoint-retrained")
            bank, calibration = fit_detector(new_ckpt, self.bundle, self.cfg)
            after_records = infer_test(new_ckpt, self.bundle, bank,
                                       calibration, self.cfg)
            write_report(after_records,
                         self.run_dir / "inference-after.jsonl")
            report_after = evaluate_records(after_records, self.bundle)
            filtered = evaluate_records(
                after_records, self.bundle,
                exclude_ids=set(self.state.hil_ids))
            payload = {"before": report_before.to_json(),
                       "after": report_after.to_json(),
                       "after_without_hil": filtered.to_json(),
                       "n_feedback": len(labels)}
            (self.run_dir / "metrics-before-after.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True))
            box = uncertainty_boxplot_data(before_records, after_records,
                                           labels)
            (self.run_dir / "uncertainty-boxplot.json").write_text(
                json.dumps(box, indent=2, sort_keys=True))
            with self.lock:
                self.state.retrained_checkpoint = "checkpoint-retrained"
                self.state.phase = "done"
        except Exception as e:  # surfaced through /status for the UI
            with self.lock:
                self.state.error = f"{e}\n{traceback.format_exc()}"
                self.state.phase = "awaiting_labels"

    def metrics_before_after(self) -> dict:
        path = self.run_dir / "metrics-before-after.json"
        if not path.exists():
            raise HTTPException(404, "retraining has not completed")
        return json.loads(path.read_text())

    def boxplot(self) -> dict:
        path = self.run_dir / "uncertainty-boxplot.json"
        if not path.exists():
            raise HTTPException(404, "retraining has not completed")
        return json.loads(path.read_text())

    def wait_for_worker(self, timeout: float = 600.0):
        if self._worker is not None:
            self._worker.join(timeout)


def build_app(run_dir: Path, cfg: Optional[RunConfig] = None) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    cfg = cfg or RunConfig.load(Path(run_dir) / "config.json")
    service = FeedbackService(Path(run_dir), cfg)
    app = FastAPI(title="spectrum-anomaly feedback service")
    # the labeling console is served as static files from a different origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.service = service

    @app.get("/status")
    def status():
        return service.status()

    @app.post("/infer")
    def run_inference():
        return service.run_inference()

    @app.get("/instances/uncertain")
    def uncertain(h: Optional[float] = None):
        return service.list_uncertain(h)

    @app.get("/instances/{instance_id}/grid")
    def grid(instance_id: str):
        return service.grid_payload(instance_id)

    @app.post("/labels")
    def label(body: LabelBody):
        return service.submit_label(body)

    @app.post("/retrain")
    def retrain(body: RetrainBody):
        return service.trigger_retrain(body)

    @app.get("/metrics/before-after")
    def before_after():
        return service.metrics_before_after()

    @app.get("/reports/uncertainty-boxplot")
    def boxplot():
        return service.boxplot()

    return app
