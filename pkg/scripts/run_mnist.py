#!/usr/bin/env python3
"""One-class digit experiment: train on a single digit, flag every other
digit as an anomaly.

Usage: python scripts/run_mnist.py [--seed N] [--digit 4] [--full]
  --full uses the complete protocol sizes (4089 train / 1753 val) and
  100 epochs instead of the reduced CPU-friendly defaults.
"""

import argparse
import dataclasses
import time
from pathlib import Path

from caad.config import mnist_run_config
from caad.evalkit import format_results_table
from caad.mnist_data import build_one_class_bundle
from caad.pipeline import evaluate_records, fit_detector, infer_test
from caad.trainer import train_caad
from caad.uq import write_report


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--digit", type=int, default=4)
    parser.add_argument("--data-dir", type=Path, default=Path("data/mnist"))
    parser.add_argument("--out", type=Path, default=Path("runs/mnist"))
    parser.add_argument("--full", action="store_true")
    args = parser.parse_args()

    cfg = mnist_run_config(args.seed)
    if args.full:
        cfg = dataclasses.replace(
            cfg,
            data=dataclasses.replace(cfg.data, n_train=4089, n_val=1753),
            train=dataclasses.replace(cfg.train, epochs=100))
    bundle = build_one_class_bundle(
        args.data_dir, benign_digit=args.digit, n_train=cfg.data.n_train,
        n_val=cfg.data.n_val, image_size=cfg.data.grid_size,
        seed=cfg.data.seed)

    out = args.out / f"digit{args.digit}-seed{args.seed}"
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")

    t0 = time.time()
    checkpoint = train_caad(bundle, cfg)
    checkpoint.save(out / "checkpoint")
    print(f"trained in {time.time() - t0:.0f}s")

    bank, calibration = fit_detector(checkpoint, bundle, cfg)
    records = infer_test(checkpoint, bundle, bank, calibration, cfg)
    write_report(records, out / "inference.jsonl")
    report = evaluate_records(records, bundle)
    report.save(out / "metrics.json")
    print(format_results_table([(f"digit {args.digit}", report)]))


if __name__ == "__main__":
    main()
