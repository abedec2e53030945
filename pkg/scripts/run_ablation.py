#!/usr/bin/env python3
"""Incremental ablation table over the desk dataset: full model, then
feedback off, uncertainty off, contrastive learning off, skip connections
off, and adversarial objective swapped for plain cross-entropy.

Usage: python scripts/run_ablation.py [--seed N] [--out runs/ablation]
"""

import argparse
import json
from pathlib import Path

from caad.config import desk_run_config
from caad.evalkit import format_results_table
from caad.pipeline import (evaluate_records, fit_detector, infer_test,
                           run_feedback_loop)
from caad.spectral_data import (InjectionPlan, assemble_dataset, desk_grid,
                                desk_scenario)
from caad.trainer import ablate, train_caad

ROWS = [
    ("full (with feedback)", {}, True),
    ("w/o feedback", {}, False),
    ("w/o feedback, uncertainty", {"no_uq": True}, False),
    ("w/o feedback, uncertainty, contrastive", {"no_uq": True,
                                                "no_cl": True}, False),
    ("w/o fb, uq, cl, skip connections", {"no_uq": True, "no_cl": True,
                                          "no_unet": True}, False),
    ("w/o fb, uq, cl, adversarial critic", {"no_uq": True, "no_cl": True,
                                            "no_wgan_gp": True}, False),
]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", type=Path, default=Path("runs/ablation"))
    args = parser.parse_args()

    base = desk_run_config(args.seed)
    grid = desk_grid(base.data.grid_size)
    counts = (base.data.n_train, base.data.n_val, base.data.n_test)
    scenario = desk_scenario(seed=args.seed, split_counts=counts, grid=grid)
    bundle = assemble_dataset(scenario, grid, counts,
                              injection=InjectionPlan(fraction=1.0,
                                                      seed=args.seed))

    table = []
    for name, flags, with_feedback in ROWS:
        cfg = ablate(base, **flags)
        checkpoint = train_caad(bundle, cfg)
        if with_feedback:
            outcome = run_feedback_loop(checkpoint, bundle, cfg)
            report = outcome.report_after
        else:
            bank, calibration = fit_detector(checkpoint, bundle, cfg)
            records = infer_test(checkpoint, bundle, bank, calibration, cfg)
            report = evaluate_records(records, bundle)
        table.append((name, report))
        print(f"done: {name}  wF1={report.weighted_f1:.3f}")

    args.out.mkdir(parents=True, exist_ok=True)
    text = format_results_table(table)
    (args.out / f"ablation-seed{args.seed}.md").write_text(text + "\n")
    (args.out / f"ablation-seed{args.seed}.json").write_text(json.dumps(
        {name: r.to_json() for name, r in table}, indent=2, sort_keys=True))
    print(text)


if __name__ == "__main__":
    main()
