"""Command-line entry point wiring the full pipeline.

Artifacts live under a run directory (default `runs/default`): the assembled
dataset, checkpoints, calibration, inference report, feedback log, and metric
reports.  Every command snapshots its resolved configuration next to its
outputs so runs are self-describing.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from .config import RunConfig
from .detector import ThresholdCalibration, CentroidBank, score_batch
from .errors import ConfigError
from .evalkit import format_results_table
from .feedback_store import FeedbackLog, FeedbackRecord, oracle_label
from .mnist_data import build_one_class_bundle
from .pipeline import (evaluate_records, fit_detector, infer_test,
                       run_feedback_loop, sweep_feedback)
from .spectral_data import (SCENARIO_PRESETS, DatasetBundle, GridSpec,
                            InjectionPlan, assemble_dataset, bin_emissions,
                            desk_grid, parse_emissions, serialize_emissions,
                            synth_generate)
from .trainer import Checkpoint, ablate, retrain_caad_ef, train_caad
from .uq import read_report, select_hil, write_report


class Ctx:
    def __init__(self, run_dir: Path, cfg: RunConfig):
        self.run_dir = run_dir
        self.cfg = cfg

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def snapshot_config(self):
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.cfg.save(self.path("config.json"))


def _load_config(config, sets, seed) -> RunConfig:
    cfg = RunConfig.load(config) if config else RunConfig()
    if seed is not None:
        sets = list(sets) + [
            f"data.seed={seed}", f"train.seed={seed}", f"uq.seed={seed}",
            f"detector.seed={seed}", f"transform.seed={seed}"]
    if sets:
        cfg = cfg.with_overrides(list(sets))
    return cfg


@click.group()
@click.option("--run-dir", default="runs/default", show_default=True,
              type=click.Path(path_type=Path), help="artifact directory")
@click.option("--config", type=click.Path(exists=True), default=None,
              help="JSON config file")
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE",
              help="dotted config override, e.g. train.epochs=30")
@click.option("--seed", type=int, default=None,
              help="set every stochastic seed at once")
@click.pass_context
def main(ctx, run_dir, config, sets, seed):
    """Spectrum anomaly detection: data, training, scoring, and feedback."""
    try:
        cfg = _load_config(config, sets, seed)
    except ConfigError as e:
        raise click.UsageError(str(e))  # exits 2 with the offending field
    ctx.obj = Ctx(run_dir, cfg)


def _make_grid(cfg: RunConfig) -> GridSpec:
    return desk_grid(cfg.data.grid_size)


def _scenario(cfg: RunConfig):
    if cfg.data.preset not in SCENARIO_PRESETS:
        raise click.UsageError(
            f"preset '{cfg.data.preset}' has no emission generator; "
            f"synthesis presets: {sorted(SCENARIO_PRESETS)}")
    preset = SCENARIO_PRESETS[cfg.data.preset]
    grid = _make_grid(cfg)
    counts = (cfg.data.n_train, cfg.data.n_val, cfg.data.n_test)
    return preset(seed=cfg.data.seed, split_counts=counts, grid=grid), grid, counts


@main.group()
def data():
    """Synthesize, bin, inject, and assemble datasets."""


@data.command("synth")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def data_synth(ctx: Ctx, out):
    """Write the scenario's emission stream as newline-delimited JSON."""
    ctx.snapshot_config()
    scenario, _, _ = _scenario(ctx.cfg)
    records = synth_generate(scenario)
    out = out or ctx.path("emissions.ndjson")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(serialize_emissions(records))
    click.echo(f"wrote {len(records)} emissions to {out}")


@data.command("bin")
@click.option("--emissions", type=click.Path(exists=True, path_type=Path),
              required=False)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def data_bin(ctx: Ctx, emissions, out):
    """Bin an emission stream into raw count grids."""
    emissions = emissions or ctx.path("emissions.ndjson")
    parsed = parse_emissions(emissions.read_bytes())
    grid = _make_grid(ctx.cfg)
    result = bin_emissions(parsed.records, grid)
    out = out or ctx.path("grids")
    out.mkdir(parents=True, exist_ok=True)
    stack = np.stack([g.values for g in result.grids]).astype("<f4")
    (out / "grids.f32").write_bytes(stack.tobytes())
    (out / "grids.json").write_text(json.dumps({
        "count": len(result.grids), "shape": list(grid.shape),
        "window_s": grid.window_s, "t_origin": result.t_origin,
        "skipped_lines": parsed.n_skipped,
        "out_of_range_records": result.n_out_of_range}, sort_keys=True))
    click.echo(f"binned {len(result.grids)} windows "
               f"({result.n_out_of_range} records out of range)")


@data.command("assemble")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def data_assemble(ctx: Ctx, out):
    """Build the full train/val/test dataset for the configured preset."""
    ctx.snapshot_config()
    cfg = ctx.cfg
    out = out or ctx.path("dataset")
    if cfg.data.preset == "mnist":
        bundle = build_one_class_bundle(
            cfg.data.mnist_dir, benign_digit=cfg.data.benign_digit,
            n_train=cfg.data.n_train, n_val=cfg.data.n_val,
            image_size=cfg.data.grid_size, seed=cfg.data.seed)
    else:
        scenario, grid, counts = _scenario(cfg)
        bundle = assemble_dataset(
            scenario, grid, counts, p_thresh=cfg.data.p_thresh,
            injection=InjectionPlan(fraction=cfg.data.injection_fraction,
                                    seed=cfg.data.seed))
    bundle.save(out)
    click.echo(f"dataset at {out}: " + json.dumps(bundle.manifest["counts"])
               if "counts" in bundle.manifest else f"dataset at {out}")


@data.command("inject")
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--fraction", type=float, default=None)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def data_inject(ctx: Ctx, dataset, fraction, out):
    """Re-run hopper injection over a dataset's benign test grids."""
    from .spectral_data import make_hopper_library, inject_hopper
    bundle = DatasetBundle.load(dataset or ctx.path("dataset"))
    frac = ctx.cfg.data.injection_fraction if fraction is None else fraction
    plan = InjectionPlan(fraction=frac, seed=ctx.cfg.data.seed)
    library = make_hopper_library(bundle.mask, plan.n_signatures,
                                  plan.pixels_per_signature, plan.seed)
    rng = np.random.default_rng(plan.seed)
    benign_idx = np.flatnonzero(bundle.test_labels == 0)
    n_inject = round(plan.fraction * len(benign_idx))
    chosen = sorted(rng.choice(len(benign_idx), n_inject, replace=False))
    grids, labels, ids = [bundle.test.copy()], [bundle.test_labels.copy()], \
        list(bundle.ids["test"])
    from .spectral_data import DensityGrid
    extra, extra_ids = [], []
    for bi in chosen:
        idx = benign_idx[bi]
        sig = library[int(rng.integers(len(library)))]
        g = inject_hopper(DensityGrid(bundle.test[idx], 0.0), sig, bundle.stats)
        extra.append(g.values)
        extra_ids.append(f"{ids[idx]}-inj")
    bundle.splits["test"] = np.concatenate([bundle.test, np.stack(extra)])
    bundle.labels["test"] = np.concatenate(
        [bundle.test_labels, np.ones(len(extra), dtype=np.int64)])
    bundle.ids["test"] = ids + extra_ids
    bundle.manifest["splits"]["test"]["count"] = len(bundle.ids["test"])
    bundle.save(out)
    click.echo(f"injected {len(extra)} anomalies; dataset at {out}")


def _load_bundle(ctx: Ctx, dataset) -> DatasetBundle:
    return DatasetBundle.load(dataset or ctx.path("dataset"))


def _load_ckpt(ctx: Ctx, checkpoint) -> Checkpoint:
    return Checkpoint.load(checkpoint or ctx.path("checkpoint"))


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--no-cl", is_flag=True)
@click.option("--no-uq", is_flag=True)
@click.option("--no-unet", is_flag=True)
@click.option("--no-wgan-gp", is_flag=True)
@click.pass_obj
def train(ctx: Ctx, dataset, out, no_cl, no_uq, no_unet, no_wgan_gp):
    """Train the adversarial + contrastive model on the benign train split."""
    cfg = ablate(ctx.cfg, no_cl, no_uq, no_unet, no_wgan_gp)
    ctx.cfg = cfg
    ctx.snapshot_config()
    bundle = _load_bundle(ctx, dataset)
    ckpt = train_caad(bundle, cfg)
    out = out or ctx.path("checkpoint")
    ckpt.save(out)
    click.echo(f"checkpoint at {out} (epoch {ckpt.epoch})")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.pass_obj
def calibrate(ctx: Ctx, dataset, checkpoint):
    """Fit centroids and the anomaly threshold from the validation split."""
    bundle = _load_bundle(ctx, dataset)
    ckpt = _load_ckpt(ctx, checkpoint)
    bank, calibration = fit_detector(ckpt, bundle, ctx.cfg)
    calibration.save(ctx.path("calibration.json"))
    np.savez(ctx.path("bank.npz"), m=bank.m, centroids=bank.centroids,
             centroid_embeddings=bank.centroid_embeddings)
    click.echo(f"threshold {calibration.threshold:.6f} "
               f"(strictness {calibration.strictness})")


def _load_bank(ctx: Ctx) -> CentroidBank:
    z = np.load(ctx.path("bank.npz"))
    return CentroidBank(int(z["m"]), z["centroids"],
                        z["centroid_embeddings"])


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def infer(ctx: Ctx, dataset, checkpoint, out):
    """Score the test split with MC-dropout uncertainty."""
    bundle = _load_bundle(ctx, dataset)
    ckpt = _load_ckpt(ctx, checkpoint)
    bank = _load_bank(ctx)
    calibration = ThresholdCalibration.load(ctx.path("calibration.json"))
    records = infer_test(ckpt, bundle, bank, calibration, ctx.cfg)
    out = out or ctx.path("inference.jsonl")
    write_report(records, out)
    click.echo(f"wrote {len(records)} inference records to {out}")


@main.command()
@click.option("--oracle", is_flag=True,
              help="label from dataset ground truth instead of a human")
@click.option("--h", "h_percent", type=float, default=None)
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.pass_obj
def feedback(ctx: Ctx, oracle, h_percent, dataset):
    """Select the most uncertain instances and record labels for them."""
    if not oracle:
        raise click.UsageError(
            "interactive labeling runs through `caad serve` + the labeling "
            "UI; the CLI only supports --oracle")
    records = read_report(ctx.path("inference.jsonl"))
    h = h_percent if h_percent is not None else ctx.cfg.retrain.h_percent
    hil_ids = select_hil(records, h)
    bundle = _load_bundle(ctx, dataset)
    truth = dict(zip(bundle.ids["test"], bundle.test_labels.tolist()))
    log = FeedbackLog(ctx.path("feedback.jsonl"))
    for record in oracle_label(hil_ids, truth):
        log.append(record)
    click.echo(f"labeled {len(hil_ids)} instances "
               f"({sum(truth[i] for i in hil_ids)} anomalies)")


@main.command()
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def retrain(ctx: Ctx, dataset, checkpoint, out):
    """Fine-tune a checkpoint with the recorded expert feedback."""
    bundle = _load_bundle(ctx, dataset)
    ckpt = _load_ckpt(ctx, checkpoint)
    log = FeedbackLog(ctx.path("feedback.jsonl"))
    fb = log.effective_labels()
    new_ckpt = retrain_caad_ef(ckpt, bundle, fb, ctx.cfg)
    out = out or ctx.path("checkpoint-retrained")
    new_ckpt.save(out)
    click.echo(f"retrained checkpoint at {out} "
               f"({len(fb)} feedback labels)")


@main.command("eval")
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--inference", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--exclude-hil", is_flag=True,
              help="drop the expert-labeled instances before scoring")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def eval_cmd(ctx: Ctx, dataset, inference, exclude_hil, out):
    """Compute the metrics report from an inference run."""
    bundle = _load_bundle(ctx, dataset)
    records = read_report(inference or ctx.path("inference.jsonl"))
    exclude = None
    if exclude_hil:
        log = FeedbackLog(ctx.path("feedback.jsonl"))
        exclude = set(log.effective_labels())
    report = evaluate_records(records, bundle, exclude_ids=exclude)
    out = out or ctx.path("metrics.json")
    payload = report.to_json()
    payload["ablation"] = dataclasses.asdict(ctx.cfg.ablation)
    payload["excluded_hil"] = sorted(exclude) if exclude else []
    Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True))
    click.echo(format_results_table([("this run", report)]))


@main.command()
@click.option("--h-values", default="0,5,10,25", show_default=True)
@click.option("--dataset", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--checkpoint", type=click.Path(exists=True, path_type=Path),
              default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def sweep(ctx: Ctx, h_values, dataset, checkpoint, out):
    """Run the feedback loop across expert budgets and tabulate metrics."""
    bundle = _load_bundle(ctx, dataset)
    ckpt = _load_ckpt(ctx, checkpoint)
    hs = [float(h) for h in h_values.split(",")]
    out = out or ctx.path("sweep.csv")
    rows = sweep_feedback(ckpt, bundle, hs, ctx.cfg, out_csv=out)
    for row in rows:
        click.echo(json.dumps(row, sort_keys=True))


@main.command("ablate")
@click.option("--no-cl", is_flag=True)
@click.option("--no-uq", is_flag=True)
@click.option("--no-unet", is_flag=True)
@click.option("--no-wgan-gp", is_flag=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.pass_obj
def ablate_cmd(ctx: Ctx, no_cl, no_uq, no_unet, no_wgan_gp, out):
    """Emit a config with ablation switches applied."""
    cfg = ablate(ctx.cfg, no_cl, no_uq, no_unet, no_wgan_gp)
    cfg.save(out)
    click.echo(f"ablated config at {out}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8075, show_default=True)
@click.pass_obj
def serve(ctx: Ctx, host, port):
    """Start the expert-feedback HTTP service over this run directory."""
    import uvicorn
    from .feedback_api import build_app
    app = build_app(ctx.run_dir, ctx.cfg)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
