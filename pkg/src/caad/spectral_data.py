"""Wireless-spectrum data path: emission metadata -> density grids -> dataset.

The raw input is a stream of detected radio emissions (time, center frequency,
bandwidth).  Emissions are binned into per-window density grids (count of
packets per quantized bandwidth x frequency cell), min-max normalized with
train-split statistics, denoised by masking pixels that are almost never
active, and finally assembled into train/val/test splits with anomaly labels
coming from three sources: energy at masked pixels ("natural" anomalies),
injected frequency-hopper signatures, and emitter drop events.

A synthetic emission generator stands in for live captures; it is fully
deterministic for a fixed seed so datasets are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CorruptInput, DegenerateStats, EmptyInput, SplitOverlap

REQUIRED_FIELDS = ("ts", "center_freq_hz", "bandwidth_hz")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EmissionRecord:
    """One detected radio emission."""

    ts: float
    center_freq_hz: float
    bandwidth_hz: float
    power_db: Optional[float] = None
    signal_type: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.ts):
            raise ValueError(f"non-finite ts: {self.ts}")
        if not (self.center_freq_hz > 0):
            raise ValueError(f"center_freq_hz must be > 0, got {self.center_freq_hz}")
        if not (self.bandwidth_hz > 0):
            raise ValueError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz}")


@dataclass(frozen=True)
class GridSpec:
    """Binning geometry: frequency rows x bandwidth columns over one window."""

    n_freq_bins: int = 80
    n_bw_bins: int = 80
    freq_range_hz: tuple[float, float] = (800e6, 900e6)
    bw_range_hz: tuple[float, float] = (0.0, 200e3)
    window_s: float = 180.0

    def __post_init__(self):
        if self.n_freq_bins < 1 or self.n_bw_bins < 1:
            raise ValueError("bin counts must be >= 1")
        if not (self.freq_range_hz[1] > self.freq_range_hz[0]):
            raise ValueError("degenerate freq_range_hz")
        if not (self.bw_range_hz[1] > self.bw_range_hz[0]):
            raise ValueError("degenerate bw_range_hz")
        if not (self.window_s > 0):
            raise ValueError("window_s must be > 0")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_freq_bins, self.n_bw_bins)

    def freq_bin_center(self, i: int) -> float:
        lo, hi = self.freq_range_hz
        return lo + (i + 0.5) * (hi - lo) / self.n_freq_bins

    def bw_bin_center(self, j: int) -> float:
        lo, hi = self.bw_range_hz
        return lo + (j + 0.5) * (hi - lo) / self.n_bw_bins


@dataclass
class DensityGrid:
    """Packet-count grid for one time window (frequency rows, bandwidth cols)."""

    values: np.ndarray
    t_start: float
    label: Optional[int] = None       # 0 benign, 1 anomaly, None unlabeled
    split: Optional[str] = None
    instance_id: Optional[str] = None

    def copy(self) -> "DensityGrid":
        return DensityGrid(self.values.copy(), self.t_start, self.label,
                           self.split, self.instance_id)


@dataclass(frozen=True)
class NormStats:
    """Train-set-wide per-pixel count extrema used for min-max normalization."""

    global_min: float
    global_max: float

    def __post_init__(self):
        if not (self.global_max > self.global_min):
            raise DegenerateStats(
                f"global_max ({self.global_max}) must exceed global_min "
                f"({self.global_min})")

    @property
    def span(self) -> float:
        return self.global_max - self.global_min


@dataclass
class DenoiseMask:
    """Per-pixel keep mask: a pixel survives if its empirical probability of
    being nonzero over the train grids is >= p_thresh."""

    keep: np.ndarray          # bool (n_freq, n_bw)
    p_thresh: float
    nonzero_prob: np.ndarray  # float (n_freq, n_bw)

    @property
    def masked_pixels(self) -> np.ndarray:
        """Indices (row, col) of pixels that are masked out."""
        return np.argwhere(~self.keep)


@dataclass(frozen=True)
class HopperSignature:
    """Six-pixel frequency-hopper template, raw density 1 per pixel."""

    pixels: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(set(self.pixels)) != len(self.pixels):
            raise ValueError("signature pixels must be distinct")


@dataclass(frozen=True)
class Emitter:
    center_freq_hz: float
    bandwidth_hz: float
    packet_rate_hz: float
    freq_jitter_hz: float = 0.0
    bw_jitter_hz: float = 0.0
    active_interval: Optional[tuple[float, float]] = None  # None = whole run
    signal_type: Optional[str] = None


@dataclass(frozen=True)
class SynthScenario:
    """Deterministic emission-stream generator configuration."""

    emitters: tuple[Emitter, ...]
    duration_s: float
    seed: int
    drop_events: tuple[tuple[float, int], ...] = ()     # (t, emitter_index)
    hopper_events: tuple[tuple[float, int], ...] = ()   # (t, signature_index)
    signatures: tuple[HopperSignature, ...] = ()
    grid: Optional[GridSpec] = None   # needed to place hopper_events in Hz

    def __post_init__(self):
        for t, idx in self.drop_events:
            if not (0 <= t <= self.duration_s):
                raise ValueError(f"drop event at t={t} outside duration")
            if not (0 <= idx < len(self.emitters)):
                raise ValueError(f"drop event references emitter {idx}")
        for t, idx in self.hopper_events:
            if not (0 <= t <= self.duration_s):
                raise ValueError(f"hopper event at t={t} outside duration")
            if not (0 <= idx < len(self.signatures)):
                raise ValueError(f"hopper event references signature {idx}")
        if self.hopper_events and self.grid is None:
            raise ValueError("hopper events need a grid to map pixels to Hz")


# ---------------------------------------------------------------------------
# Emission stream parsing / serialization (newline-delimited JSON)
# ---------------------------------------------------------------------------

@dataclass
class ParseResult:
    records: list[EmissionRecord]
    n_skipped: int
    bad_lines: list[tuple[int, str]]  # (1-based line number, reason)


def parse_emissions(stream: bytes | io.IOBase) -> ParseResult:
    """Parse a newline-delimited JSON emission stream.

    Malformed lines are skipped and counted; records come back stable-sorted
    by timestamp.  Raises EmptyInput for an empty stream and CorruptInput when
    more than half of the non-empty lines are malformed.
    """
    if isinstance(stream, bytes):
        raw = stream
    else:
        raw = stream.read()
        if isinstance(raw, str):
            raw = raw.encode()
    lines = raw.split(b"\n")

    records: list[EmissionRecord] = []
    bad: list[tuple[int, str]] = []
    n_lines = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        n_lines += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            bad.append((lineno, f"invalid JSON: {e.msg}"))
            continue
        if not isinstance(obj, dict):
            bad.append((lineno, "record is not an object"))
            continue
        missing = [f for f in REQUIRED_FIELDS if f not in obj]
        if missing:
            bad.append((lineno, f"missing fields: {','.join(missing)}"))
            continue
        try:
            rec = EmissionRecord(
                ts=float(obj["ts"]),
                center_freq_hz=float(obj["center_freq_hz"]),
                bandwidth_hz=float(obj["bandwidth_hz"]),
                power_db=None if obj.get("power_db") is None else float(obj["power_db"]),
                signal_type=obj.get("signal_type"),
            )
        except (TypeError, ValueError) as e:
            bad.append((lineno, str(e)))
            continue
        records.append(rec)

    if n_lines == 0:
        raise EmptyInput("emission stream contains no records")
    if len(bad) * 2 > n_lines:
        raise CorruptInput(
            f"{len(bad)}/{n_lines} lines malformed", bad_lines=bad)

    records.sort(key=lambda r: r.ts)  # stable
    return ParseResult(records, n_skipped=len(bad), bad_lines=bad)


def serialize_emissions(records: Iterable[EmissionRecord]) -> bytes:
    """Serialize records as newline-delimited JSON with a fixed field order,
    so that serialize -> parse -> serialize is byte-identical."""
    out = io.BytesIO()
    for r in records:
        obj = {"ts": r.ts, "center_freq_hz": r.center_freq_hz,
               "bandwidth_hz": r.bandwidth_hz}
        if r.power_db is not None:
            obj["power_db"] = r.power_db
        if r.signal_type is not None:
            obj["signal_type"] = r.signal_type
        out.write(json.dumps(obj, separators=(",", ":")).encode())
        out.write(b"\n")
    return out.getvalue()


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------

def _quantize(v: float, lo: float, hi: float, n: int) -> Optional[int]:
    """Half-open bins [edge_i, edge_{i+1}) with the top edge closed.
    Returns None for out-of-range values."""
    if v < lo or v > hi:
        return None
    if v == hi:
        return n - 1
    return int((v - lo) / (hi - lo) * n)


@dataclass
class BinResult:
    grids: list[DensityGrid]
    n_out_of_range: int
    t_origin: float


def bin_emissions(records: Sequence[EmissionRecord], spec: GridSpec,
                  t_start: Optional[float] = None,
                  t_end: Optional[float] = None) -> BinResult:
    """Bin time-sorted emissions into one density grid per contiguous window.

    Each record increments exactly one cell; records whose frequency or
    bandwidth falls outside the spec ranges are dropped and counted.  Windows
    tile [t_start, t_end); when these are omitted they default to the span of
    the records, aligned to multiples of window_s.
    """
    if t_start is None:
        if not records:
            raise EmptyInput("no records and no explicit time span")
        t_start = math.floor(records[0].ts / spec.window_s) * spec.window_s
    if t_end is None:
        t_end = records[-1].ts + spec.window_s  # include the last record

    n_windows = max(1, math.ceil((t_end - t_start) / spec.window_s))
    counts = np.zeros((n_windows, spec.n_freq_bins, spec.n_bw_bins),
                      dtype=np.float32)
    flo, fhi = spec.freq_range_hz
    blo, bhi = spec.bw_range_hz
    dropped = 0
    for r in records:
        if r.ts < t_start or r.ts >= t_end:
            dropped += 1
            continue
        w = int((r.ts - t_start) / spec.window_s)
        fi = _quantize(r.center_freq_hz, flo, fhi, spec.n_freq_bins)
        bj = _quantize(r.bandwidth_hz, blo, bhi, spec.n_bw_bins)
        if fi is None or bj is None:
            dropped += 1
            continue
        counts[w, fi, bj] += 1.0

    grids = [DensityGrid(counts[w], t_start + w * spec.window_s)
             for w in range(n_windows)]
    return BinResult(grids, n_out_of_range=dropped, t_origin=t_start)


# ---------------------------------------------------------------------------
# Normalization and denoising
# ---------------------------------------------------------------------------

def fit_norm_stats(train_grids: Sequence[DensityGrid]) -> NormStats:
    """Global per-pixel count extrema over the train split."""
    if not train_grids:
        raise EmptyInput("no train grids")
    stack = np.stack([g.values for g in train_grids])
    return NormStats(float(stack.min()), float(stack.max()))


def normalize_grids(grids: Sequence[DensityGrid],
                    stats: NormStats) -> list[DensityGrid]:
    """Min-max normalize counts with train statistics, clipping to [0, 1]
    (val/test counts can exceed the train max)."""
    out = []
    for g in grids:
        v = (g.values - stats.global_min) / stats.span
        out.append(replace_values(g, np.clip(v, 0.0, 1.0).astype(np.float32)))
    return out


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return values * stats.span + stats.global_min


def replace_values(g: DensityGrid, values: np.ndarray) -> DensityGrid:
    return DensityGrid(values, g.t_start, g.label, g.split, g.instance_id)


def fit_denoise_mask(train_grids: Sequence[DensityGrid],
                     p_thresh: float = 0.0005) -> DenoiseMask:
    """Empirical per-pixel probability of activity over train grids; pixels
    below p_thresh are masked (boundary: equality survives)."""
    if not train_grids:
        raise EmptyInput("no train grids")
    stack = np.stack([g.values for g in train_grids])
    prob = (stack > 0).mean(axis=0)
    return DenoiseMask(keep=prob >= p_thresh, p_thresh=p_thresh,
                       nonzero_prob=prob)


def apply_mask(grids: Sequence[DensityGrid], mask: DenoiseMask,
               mode: str) -> list[DensityGrid]:
    """mode='zero_out' (train/val): silence masked pixels.
    mode='label_anomaly' (test): grids with energy at any masked pixel are
    labeled anomalous; pixel values stay untouched."""
    if mode not in ("zero_out", "label_anomaly"):
        raise ValueError(f"unknown mask mode: {mode}")
    out = []
    for g in grids:
        if mode == "zero_out":
            v = g.values.copy()
            v[~mask.keep] = 0.0
            out.append(replace_values(g, v))
        else:
            g2 = g.copy()
            if (g2.values[~mask.keep] > 0).any():
                g2.label = 1
            out.append(g2)
    return out


# ---------------------------------------------------------------------------
# Synthetic emission generator
# ---------------------------------------------------------------------------

def synth_generate(scenario: SynthScenario) -> list[EmissionRecord]:
    """Generate the deterministic emission stream for a scenario.

    Emitters fire at fixed rate (packet n at t = (n + 0.5) / rate within the
    active interval) with Gaussian jitter on frequency and bandwidth.  Drop
    events silence an emitter from t onward; hopper events contribute one
    packet per signature pixel at the event time.
    """
    rng = np.random.default_rng(scenario.seed)
    drop_at = {}
    for t, idx in scenario.drop_events:
        drop_at[idx] = min(t, drop_at.get(idx, math.inf))

    records: list[EmissionRecord] = []
    for idx, em in enumerate(scenario.emitters):
        t0, t1 = em.active_interval or (0.0, scenario.duration_s)
        t1 = min(t1, scenario.duration_s, drop_at.get(idx, math.inf))
        n_packets = max(0, math.floor((t1 - t0) * em.packet_rate_hz))
        if n_packets == 0:
            continue
        ts = t0 + (np.arange(n_packets) + 0.5) / em.packet_rate_hz
        ts = ts[ts < t1]
        freqs = em.center_freq_hz + em.freq_jitter_hz * rng.standard_normal(len(ts))
        bws = em.bandwidth_hz + em.bw_jitter_hz * rng.standard_normal(len(ts))
        for t, f, b in zip(ts, freqs, bws):
            if f <= 0 or b <= 0:
                continue  # jitter pushed the packet out of physical range
            records.append(EmissionRecord(float(t), float(f), float(b),
                                          signal_type=em.signal_type))

    for t, sig_idx in scenario.hopper_events:
        sig = scenario.signatures[sig_idx]
        for (fi, bj) in sig.pixels:
            records.append(EmissionRecord(
                float(t),
                scenario.grid.freq_bin_center(fi),
                scenario.grid.bw_bin_center(bj),
                signal_type="hopper"))

    records.sort(key=lambda r: r.ts)
    return records


def make_hopper_library(mask: DenoiseMask, n_signatures: int = 10,
                        pixels_per_signature: int = 6,
                        seed: int = 0) -> list[HopperSignature]:
    """Sample a signature library from the masked (normally quiet) region."""
    quiet = mask.masked_pixels
    if len(quiet) < pixels_per_signature:
        raise ValueError("not enough masked pixels to build signatures")
    rng = np.random.default_rng(seed)
    lib = []
    for _ in range(n_signatures):
        sel = rng.choice(len(quiet), size=pixels_per_signature, replace=False)
        lib.append(HopperSignature(tuple(tuple(int(x) for x in quiet[i])
                                         for i in sel)))
    return lib


# ---------------------------------------------------------------------------
# Anomaly injection
# ---------------------------------------------------------------------------

def inject_hopper(grid: DensityGrid, signature: HopperSignature,
                  stats: NormStats) -> DensityGrid:
    """Add the normalized image of a raw density-1 hopper template to a
    normalized grid and label the result anomalous.  The caller keeps the
    unmodified grid as the benign counterpart."""
    amplitude = 1.0 / stats.span
    v = grid.values.copy()
    for (fi, bj) in signature.pixels:
        v[fi, bj] += amplitude
    out = replace_values(grid, np.clip(v, 0.0, 1.0).astype(np.float32))
    out.label = 1
    return out


class NoOpRegion(UserWarning):
    pass


def inject_drop(grids: Sequence[DensityGrid],
                emitter_region: Sequence[tuple[int, int]],
                drop_t: float) -> list[DensityGrid]:
    """Zero an emitter's cells in every grid at or after the drop time and
    label those grids anomalous; earlier grids pass through untouched."""
    region = list(emitter_region)
    if not region:
        warnings.warn("empty emitter region: drop injection is a no-op",
                      NoOpRegion)
    out = []
    for g in grids:
        if g.t_start >= drop_t and region:
            v = g.values.copy()
            for (fi, bj) in region:
                v[fi, bj] = 0.0
            g2 = replace_values(g, v)
            g2.label = 1
            out.append(g2)
        else:
            out.append(g.copy())
    return out


# ---------------------------------------------------------------------------
# Dataset assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectionPlan:
    """How many benign test grids receive a hopper template (each injected
    grid is appended as a new anomalous instance; the original stays)."""

    fraction: float = 1.0
    n_signatures: int = 10
    pixels_per_signature: int = 6
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.fraction <= 1.0):
            raise ValueError("injection fraction must be in [0, 1]")


@dataclass
class DatasetBundle:
    """Assembled splits plus everything needed to reproduce and consume them."""

    splits: dict[str, np.ndarray]          # (N, n_freq, n_bw) float32 in [0,1]
    labels: dict[str, Optional[np.ndarray]]
    ids: dict[str, list[str]]
    stats: NormStats
    mask: DenoiseMask
    grid_spec: GridSpec
    manifest: dict

    @property
    def train(self) -> np.ndarray:
        return self.splits["train"]

    @property
    def val(self) -> np.ndarray:
        return self.splits["val"]

    @property
    def test(self) -> np.ndarray:
        return self.splits["test"]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels["test"]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in ("train", "val", "test"):
            h.update(self.splits[name].astype("<f4").tobytes())
            lab = self.labels.get(name)
            if lab is not None:
                h.update(np.asarray(lab, dtype="<i4").tobytes())
        return h.hexdigest()

    # -- disk format: manifest.json + {split}.f32 + {split}.labels.json -----

    def save(self, out_dir: str | Path) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, arr in self.splits.items():
            (out_dir / f"{name}.f32").write_bytes(arr.astype("<f4").tobytes())
            lab = self.labels.get(name)
            payload = {
                "ids": self.ids[name],
                "labels": None if lab is None else [int(x) for x in lab],
            }
            (out_dir / f"{name}.labels.json").write_text(
                json.dumps(payload, sort_keys=True))
        manifest = dict(self.manifest)
        manifest["content_hash"] = self.content_hash()
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True))
        return out_dir

    @classmethod
    def load(cls, in_dir: str | Path) -> "DatasetBundle":
        in_dir = Path(in_dir)
        manifest = json.loads((in_dir / "manifest.json").read_text())
        gs = manifest["grid_spec"]
        spec = GridSpec(gs["n_freq_bins"], gs["n_bw_bins"],
                        tuple(gs["freq_range_hz"]), tuple(gs["bw_range_hz"]),
                        gs["window_s"])
        stats = NormStats(manifest["stats"]["global_min"],
                          manifest["stats"]["global_max"])
        mask = DenoiseMask(
            keep=np.array(manifest["mask"]["keep"], dtype=bool),
            p_thresh=manifest["mask"]["p_thresh"],
            nonzero_prob=np.array(manifest["mask"]["nonzero_prob"],
                                  dtype=np.float64))
        splits, labels, ids = {}, {}, {}
        for name in manifest["splits"]:
            raw = (in_dir / f"{name}.f32").read_bytes()
            n = manifest["splits"][name]["count"]
            arr = np.frombuffer(raw, dtype="<f4").reshape(n, *spec.shape)
            splits[name] = arr.copy()
            payload = json.loads((in_dir / f"{name}.labels.json").read_text())
            ids[name] = payload["ids"]
            labels[name] = (None if payload["labels"] is None
                            else np.array(payload["labels"], dtype=np.int64))
        bundle = cls(splits, labels, ids, stats, mask, spec, manifest)
        if bundle.content_hash() != manifest["content_hash"]:
            raise CorruptInput("dataset content hash mismatch")
        return bundle


def assemble_dataset(scenario: SynthScenario, spec: GridSpec,
                     split_counts: tuple[int, int, int],
                     p_thresh: float = 0.0005,
                     injection: Optional[InjectionPlan] = None) -> DatasetBundle:
    """Run the full data path for a synthetic scenario.

    Splits are temporally sequential (train, then val, then test).  Train and
    val are denoised and unlabeled-benign; test grids are labeled from the
    natural-anomaly rule, hopper injection (benign originals retained), and
    any drop events in the scenario.
    """
    n_train, n_val, n_test = split_counts
    records = synth_generate(scenario)
    binned = bin_emissions(records, spec, t_start=0.0,
                           t_end=scenario.duration_s)
    grids = binned.grids
    if n_train + n_val + n_test > len(grids):
        raise SplitOverlap(
            f"requested {n_train}+{n_val}+{n_test} windows but the scenario "
            f"only yields {len(grids)}")

    train = grids[:n_train]
    val = grids[n_train:n_train + n_val]
    test = grids[n_train + n_val:n_train + n_val + n_test]

    stats = fit_norm_stats(train)
    train = normalize_grids(train, stats)
    val = normalize_grids(val, stats)
    test = normalize_grids(test, stats)

    mask = fit_denoise_mask(train, p_thresh)
    train = apply_mask(train, mask, "zero_out")
    val = apply_mask(val, mask, "zero_out")
    for g in test:
        g.label = 0
    test = apply_mask(test, mask, "label_anomaly")
    n_natural = sum(1 for g in test if g.label == 1)

    # Drop events make every window at or after the drop time anomalous.
    drop_times = [t for t, _ in scenario.drop_events]
    n_dropped_windows = 0
    if drop_times:
        t_drop = min(drop_times)
        for g in test:
            if g.t_start + spec.window_s > t_drop and g.label != 1:
                g.label = 1
                n_dropped_windows += 1

    for split_name, split_grids in (("train", train), ("val", val),
                                    ("test", test)):
        for i, g in enumerate(split_grids):
            g.split = split_name
            g.instance_id = f"{split_name}-{i:05d}"

    injection = injection or InjectionPlan()
    injected: list[DensityGrid] = []
    library: list[HopperSignature] = []
    if injection.fraction > 0:
        library = make_hopper_library(mask, injection.n_signatures,
                                      injection.pixels_per_signature,
                                      seed=injection.seed)
        benign = [g for g in test if g.label == 0]
        rng = np.random.default_rng(injection.seed)
        n_inject = round(injection.fraction * len(benign))
        chosen = sorted(rng.choice(len(benign), size=n_inject, replace=False))
        for n, bi in enumerate(chosen):
            src = benign[bi]
            sig_idx = int(rng.integers(len(library)))
            g = inject_hopper(src, library[sig_idx], stats)
            g.split = "test"
            g.instance_id = f"{src.instance_id}-inj"
            injected.append(g)
    test_all = test + injected

    def stack(gs):
        return np.stack([g.values for g in gs]).astype(np.float32)

    splits = {"train": stack(train), "val": stack(val), "test": stack(test_all)}
    labels = {"train": None, "val": None,
              "test": np.array([g.label for g in test_all], dtype=np.int64)}
    ids = {name: [g.instance_id for g in gs]
           for name, gs in (("train", train), ("val", val), ("test", test_all))}

    manifest = {
        "kind": "spectrum-density-grids",
        "seed": scenario.seed,
        "grid_spec": {
            "n_freq_bins": spec.n_freq_bins, "n_bw_bins": spec.n_bw_bins,
            "freq_range_hz": list(spec.freq_range_hz),
            "bw_range_hz": list(spec.bw_range_hz), "window_s": spec.window_s,
        },
        "stats": {"global_min": stats.global_min,
                  "global_max": stats.global_max},
        "mask": {"p_thresh": mask.p_thresh,
                 "keep": mask.keep.astype(int).tolist(),
                 "nonzero_prob": mask.nonzero_prob.tolist()},
        "splits": {name: {"count": len(arr)} for name, arr in splits.items()},
        "counts": {
            "windows": {"train": n_train, "val": n_val, "test": n_test},
            "test_benign": int((labels["test"] == 0).sum()),
            "test_anomaly": int((labels["test"] == 1).sum()),
            "natural_anomalies": n_natural,
            "drop_anomalies": n_dropped_windows,
            "injected": len(injected),
            "out_of_range_records": binned.n_out_of_range,
        },
        "injection": {
            "fraction": injection.fraction,
            "n_signatures": injection.n_signatures,
            "pixels_per_signature": injection.pixels_per_signature,
            "seed": injection.seed,
            "signatures": [[list(p) for p in s.pixels] for s in library],
        },
    }
    return DatasetBundle(splits, labels, ids, stats, mask, spec, manifest)


# ---------------------------------------------------------------------------
# Scenario presets
# ---------------------------------------------------------------------------

def desk_grid(size: int = 32) -> GridSpec:
    return GridSpec(n_freq_bins=size, n_bw_bins=size,
                    freq_range_hz=(900e6, 932e6), bw_range_hz=(0.0, 64e3),
                    window_s=1.0)


def desk_scenario(seed: int = 0, split_counts=(600, 150, 300),
                  grid: Optional[GridSpec] = None) -> SynthScenario:
    """Small stationary-emitter scenario for CPU-scale experiments."""
    grid = grid or desk_grid()
    n_windows = sum(split_counts)
    # rates are low enough that the train-set max count stays small, keeping
    # the normalized image of one hopper packet (1 / global_max) visible
    emitters = (
        Emitter(905e6, 10e3, packet_rate_hz=3.3, freq_jitter_hz=0.45e6,
                bw_jitter_hz=1.2e3, signal_type="nb-telemetry"),
        Emitter(9.12e8, 22e3, packet_rate_hz=4.95, freq_jitter_hz=0.30e6,
                bw_jitter_hz=0.9e3, signal_type="paging"),
        Emitter(9.18e8, 40e3, packet_rate_hz=2.2, freq_jitter_hz=0.60e6,
                bw_jitter_hz=1.5e3, signal_type="lmr"),
        Emitter(9.25e8, 8e3, packet_rate_hz=3.85, freq_jitter_hz=0.35e6,
                bw_jitter_hz=0.8e3, signal_type="nb-telemetry"),
        Emitter(9.09e8, 54e3, packet_rate_hz=2.75, freq_jitter_hz=0.50e6,
                bw_jitter_hz=1.8e3, signal_type="wideband"),
    )
    return SynthScenario(emitters=emitters,
                         duration_s=n_windows * grid.window_s, seed=seed,
                         grid=grid)


def drop_scenario(seed: int = 0, split_counts=(154, 39, 198),
                  grid: Optional[GridSpec] = None) -> SynthScenario:
    """Short-window scenario where a regularly present emitter goes offline
    partway through the test span."""
    grid = grid or desk_grid()
    n_windows = sum(split_counts)
    duration = n_windows * grid.window_s
    n_train, n_val, n_test = split_counts
    # the drop lands inside the test span, leaving some benign test windows
    drop_t = (n_train + n_val + round(0.475 * n_test)) * grid.window_s
    emitters = (
        Emitter(9.10e8, 20e3, packet_rate_hz=8.0, freq_jitter_hz=0.3e6,
                bw_jitter_hz=0.9e3, signal_type="lte-dl"),
        Emitter(9.22e8, 12e3, packet_rate_hz=6.0, freq_jitter_hz=0.4e6,
                bw_jitter_hz=1.0e3, signal_type="ism"),
        Emitter(9.05e8, 44e3, packet_rate_hz=5.0, freq_jitter_hz=0.5e6,
                bw_jitter_hz=1.4e3, signal_type="ism"),
    )
    return SynthScenario(emitters=emitters, duration_s=duration, seed=seed,
                         drop_events=((drop_t, 0),), grid=grid)


SCENARIO_PRESETS = {
    "desk": desk_scenario,
    "drop": drop_scenario,
}
