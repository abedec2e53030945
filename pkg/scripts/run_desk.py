#!/usr/bin/env python3
"""Full desk-scale spectrum experiment: assemble data, train, calibrate,
score the test split, run the oracle feedback round, and print the
before/after table.

Usage: python scripts/run_desk.py [--seed N] [--out runs/desk]
"""

import argparse
import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from caad.config import desk_run_config
from caad.evalkit import format_results_table
from caad.pipeline import (evaluate_records, fit_detector, infer_test,
                           run_feedback_loop)
from caad.spectral_data import (InjectionPlan, assemble_dataset, desk_grid,
                                desk_scenario)
from caad.trainer import train_caad
from caad.uq import write_report


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("runs/desk"))
    parser.add_argument("--skip-feedback", action="store_true")
    args = parser.parse_args()

    cfg = desk_run_config(args.seed)
    out = args.out / f"seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")

    grid = desk_grid(cfg.data.grid_size)
    counts = (cfg.data.n_train, cfg.data.n_val, cfg.data.n_test)
    scenario = desk_scenario(seed=args.seed, split_counts=counts, grid=grid)
    bundle = assemble_dataset(scenario, grid, counts,
                              p_thresh=cfg.data.p_thresh,
                              injection=InjectionPlan(fraction=1.0,
                                                      seed=args.seed))
    bundle.save(out / "dataset")
    print("dataset:", json.dumps(bundle.manifest["counts"]))

    t0 = time.time()
    checkpoint = train_caad(bundle, cfg)
    checkpoint.save(out / "checkpoint")
    print(f"trained {cfg.train.epochs} epochs in {time.time() - t0:.0f}s")

    bank, calibration = fit_detector(checkpoint, bundle, cfg)
    calibration.save(out / "calibration.json")
    records = infer_test(checkpoint, bundle, bank, calibration, cfg)
    write_report(records, out / "inference.jsonl")
    report = evaluate_records(records, bundle)
    report.save(out / "metrics.json")
    print(format_results_table([("trained", report)]))

    if args.skip_feedback:
        return
    outcome = run_feedback_loop(checkpoint, bundle, cfg)
    outcome.checkpoint_after.save(out / "checkpoint-retrained")
    outcome.report_after.save(out / "metrics-after-feedback.json")
    (out / "uncertainty-boxplot.json").write_text(
        json.dumps(outcome.boxplot, indent=2, sort_keys=True))
    print(format_results_table([
        ("before feedback", outcome.report_before),
        ("after feedback", outcome.report_after),
        ("after (scored w/o expert-labeled)", outcome.report_after_filtered),
    ]))


if __name__ == "__main__":
    main()
