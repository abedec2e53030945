import dataclasses

import numpy as np
import pytest

from caad.pipeline import (evaluate_records, fit_detector, infer_test,
                           run_feedback_loop, sweep_feedback)


@pytest.fixture(scope="module")
def detector_parts(tiny_checkpoint, tiny_bundle):
    return fit_detector(tiny_checkpoint, tiny_bundle, tiny_checkpoint.config)


def test_fit_detector_shapes(detector_parts, tiny_checkpoint):
    bank, calibration = detector_parts
    assert bank.m == 1
    assert bank.centroid_embeddings.shape == (1, 16)
    assert calibration.n_val == 8
    assert calibration.strictness == 0.99


def test_infer_covers_test_split(detector_parts, tiny_checkpoint,
                                 tiny_bundle):
    bank, calibration = detector_parts
    records = infer_test(tiny_checkpoint, tiny_bundle, bank, calibration)
    assert [r.instance_id for r in records] == tiny_bundle.ids["test"]
    assert all(0.0 <= r.uncertainty <= 0.5 for r in records)


def test_evaluate_records_excludes_ids(detector_parts, tiny_checkpoint,
                                       tiny_bundle):
    bank, calibration = detector_parts
    records = infer_test(tiny_checkpoint, tiny_bundle, bank, calibration)
    full = evaluate_records(records, tiny_bundle)
    dropped = evaluate_records(records, tiny_bundle,
                               exclude_ids={records[0].instance_id})
    assert sum(full.support) == len(records)
    assert sum(dropped.support) == len(records) - 1


def test_feedback_loop_h0_identity(tiny_checkpoint, tiny_bundle):
    out = run_feedback_loop(tiny_checkpoint, tiny_bundle, h_percent=0.0)
    assert out.checkpoint_after is tiny_checkpoint
    assert out.report_after == out.report_before
    assert out.hil_ids == []
    assert out.boxplot == {}


def test_feedback_loop_oracle_round(tiny_checkpoint, tiny_bundle):
    cfg = dataclasses.replace(
        tiny_checkpoint.config,
        retrain=dataclasses.replace(tiny_checkpoint.config.retrain,
                                    epochs=1))
    out = run_feedback_loop(tiny_checkpoint, tiny_bundle, cfg, h_percent=10.0)
    assert len(out.hil_ids) == int(np.ceil(0.10 * len(tiny_bundle.test)))
    assert len(out.feedback) == len(out.hil_ids)
    assert all(r.source == "oracle" for r in out.feedback)
    assert out.checkpoint_after is not tiny_checkpoint
    # filtered report drops exactly the feedback instances
    assert sum(out.report_after_filtered.support) == \
        sum(out.report_after.support) - len(out.hil_ids)


def test_sweep_rows(tiny_checkpoint, tiny_bundle, tmp_path):
    cfg = dataclasses.replace(
        tiny_checkpoint.config,
        retrain=dataclasses.replace(tiny_checkpoint.config.retrain,
                                    epochs=1))
    rows = sweep_feedback(tiny_checkpoint, tiny_bundle, [0, 10], cfg,
                          out_csv=tmp_path / "sweep.csv")
    assert len(rows) == 2
    assert rows[0]["h_percent"] == 0.0
    assert (tmp_path / "sweep.csv").exists()
