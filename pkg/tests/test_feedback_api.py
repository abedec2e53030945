import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from caad.feedback_store import FeedbackLog, FeedbackRecord, oracle_label
from caad.pipeline import fit_detector


# ---------------------------------------------------------------------------
# Label log
# ---------------------------------------------------------------------------

def test_log_append_only_and_replay(tmp_path):
    path = tmp_path / "labels.jsonl"
    log = FeedbackLog(path)
    log.append(FeedbackRecord("a", 1, "human", ts=1.0))
    log.append(FeedbackRecord("b", 0, "human", ts=2.0))
    log.append(FeedbackRecord("a", 0, "human", ts=3.0))  # relabel
    assert log.effective_labels() == {"a": 0, "b": 0}
    assert len(log) == 3
    replayed = FeedbackLog(path)
    assert replayed.effective_labels() == log.effective_labels()
    assert len(replayed) == 3


def test_record_validation():
    with pytest.raises(ValueError):
        FeedbackRecord("a", 2)
    with pytest.raises(ValueError):
        FeedbackRecord("a", 0, source="robot")


def test_oracle_label_round():
    truth = {"a": 1, "b": 0, "c": 0}
    records = oracle_label(["a", "c"], truth)
    assert [r.label for r in records] == [1, 0]
    assert all(r.source == "oracle" for r in records)
    with pytest.raises(KeyError):
        oracle_label(["zzz"], truth)


# ---------------------------------------------------------------------------
# HTTP service
# ---------------------------------------------------------------------------

@pytest.fixture()
def run_dir(tmp_path, tiny_bundle, tiny_checkpoint):
    d = tmp_path / "run"
    d.mkdir()
    tiny_bundle.save(d / "dataset")
    tiny_checkpoint.save(d / "checkpoint")
    bank, calibration = fit_detector(tiny_checkpoint, tiny_bundle,
                                     tiny_checkpoint.config)
    calibration.save(d / "calibration.json")
    np.savez(d / "bank.npz", m=bank.m, centroids=bank.centroids,
             centroid_embeddings=bank.centroid_embeddings)
    tiny_checkpoint.config.save(d / "config.json")
    return d


def make_client(run_dir):
    from caad.feedback_api import build_app
    return TestClient(build_app(run_dir))


def test_missing_artifacts_fail_startup(tmp_path):
    from caad.feedback_api import build_app
    empty = tmp_path / "empty"
    empty.mkdir()
    (empty / "config.json").write_text(json.dumps({}))
    with pytest.raises(FileNotFoundError, match="missing"):
        build_app(empty)


def test_fresh_start_is_idle(run_dir):
    client = make_client(run_dir)
    body = client.get("/status").json()
    assert body["phase"] == "idle"
    assert body["n_labeled"] == 0


def test_uncertain_listing_requires_awaiting_labels(run_dir):
    client = make_client(run_dir)
    assert client.get("/instances/uncertain").status_code == 409


def test_full_oracle_session_reaches_done(run_dir, tiny_bundle):
    client = make_client(run_dir)
    service = client.app.state.service

    assert client.post("/infer").json()["phase"] == "awaiting_labels"

    items = client.get("/instances/uncertain", params={"h": 5}).json()
    assert len(items) == service.status()["n_hil"]
    assert [i["uncertainty"] for i in items] == sorted(
        [i["uncertainty"] for i in items], reverse=True)

    # grid payload for the first item
    grid = client.get(f"/instances/{items[0]['instance_id']}/grid").json()
    assert grid["shape"] == [32, 32]
    assert len(grid["values"]) == 32

    truth = dict(zip(tiny_bundle.ids["test"],
                     tiny_bundle.test_labels.tolist()))
    for item in items:
        r = client.post("/labels", json={
            "instance_id": item["instance_id"],
            "label": int(truth[item["instance_id"]])})
        assert r.status_code == 200
    assert client.get("/status").json()["n_labeled"] == len(items)

    r = client.post("/retrain", json={})
    assert r.status_code == 200
    service.wait_for_worker()
    status = client.get("/status").json()
    assert status["phase"] == "done", status["error"]
    assert status["retrained_checkpoint"] == "checkpoint-retrained"

    payload = client.get("/metrics/before-after").json()
    assert set(payload) >= {"before", "after", "after_without_hil"}
    box = client.get("/reports/uncertainty-boxplot").json()
    assert isinstance(box, dict)


def test_label_scope_control(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    items = client.get("/instances/uncertain", params={"h": 5}).json()
    in_scope = {i["instance_id"] for i in items}
    outsider = next(i for i in client.app.state.service.bundle.ids["test"]
                    if i not in in_scope)
    r = client.post("/labels", json={"instance_id": outsider, "label": 1})
    assert r.status_code == 422
    r = client.post("/labels", json={"instance_id": "missing-id", "label": 1})
    assert r.status_code == 404


def test_relabel_keeps_audit_trail(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    items = client.get("/instances/uncertain").json()
    target = items[0]["instance_id"]
    client.post("/labels", json={"instance_id": target, "label": 1})
    client.post("/labels", json={"instance_id": target, "label": 0})
    service = client.app.state.service
    assert service.log.effective_labels()[target] == 0
    assert len([r for r in service.log.records
                if r.instance_id == target]) == 2


def test_retrain_requires_labels_or_override(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    assert client.post("/retrain", json={}).status_code == 422
    # with override it must start (and eventually finish)
    r = client.post("/retrain", json={"override_empty": True})
    assert r.status_code == 200
    client.app.state.service.wait_for_worker()


def test_single_flight_retrain(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    items = client.get("/instances/uncertain").json()
    client.post("/labels", json={"instance_id": items[0]["instance_id"],
                                 "label": 0})
    service = client.app.state.service
    assert client.post("/retrain", json={}).status_code == 200
    # second trigger while the worker is running is rejected
    r = client.post("/retrain", json={})
    assert r.status_code == 409
    service.wait_for_worker()


def test_restart_retains_labels(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    items = client.get("/instances/uncertain").json()
    target = items[0]["instance_id"]
    client.post("/labels", json={"instance_id": target, "label": 1})

    fresh = make_client(run_dir)  # new service over the same directory
    status = fresh.get("/status").json()
    assert status["phase"] == "awaiting_labels"
    assert status["n_labeled"] == 1
    assert fresh.app.state.service.log.effective_labels()[target] == 1


def test_h_zero_returns_empty(run_dir):
    client = make_client(run_dir)
    client.post("/infer")
    assert client.get("/instances/uncertain", params={"h": 0}).json() == []
