#!/usr/bin/env python3
"""Build a small, fully trained run directory for driving the labeling UI
(and its end-to-end test) against a live feedback service.

Usage: python scripts/prepare_ui_fixture.py <out_dir> [--seed N]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from caad.config import (DataConfig, ModelConfig, RunConfig, RetrainConfig,
                         TrainConfig)
from caad.pipeline import fit_detector
from caad.spectral_data import (InjectionPlan, assemble_dataset, desk_grid,
                                desk_scenario)
from caad.trainer import train_caad


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cfg = RunConfig(
        data=DataConfig(n_train=48, n_val=16, n_test=24, seed=args.seed),
        model=ModelConfig(gen_base_channels=4, critic_base_channels=4,
                          embedding_dim=16),
        train=TrainConfig(epochs=2, batch_size=8, seed=args.seed),
        retrain=RetrainConfig(epochs=1, h_percent=10.0),
    )
    grid = desk_grid(cfg.data.grid_size)
    counts = (cfg.data.n_train, cfg.data.n_val, cfg.data.n_test)
    scenario = desk_scenario(seed=args.seed, split_counts=counts, grid=grid)
    bundle = assemble_dataset(scenario, grid, counts,
                              injection=InjectionPlan(fraction=1.0,
                                                      seed=args.seed))
    out = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    bundle.save(out / "dataset")
    checkpoint = train_caad(bundle, cfg)
    checkpoint.save(out / "checkpoint")
    bank, calibration = fit_detector(checkpoint, bundle, cfg)
    calibration.save(out / "calibration.json")
    np.savez(out / "bank.npz", m=bank.m, centroids=bank.centroids,
             centroid_embeddings=bank.centroid_embeddings)
    cfg.save(out / "config.json")
    print(f"UI fixture ready at {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
