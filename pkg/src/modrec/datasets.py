"""Dataset generation and on-disk persistence.

A dataset directory holds a JSON ``manifest`` plus raw little-endian
float64 arrays, each stored row-major as [count x N]:

    clean.f64      ground-truth samples
    folded.f64     folded (uncorrupted) samples
    corrupted.f64  observation fed to the recovery algorithms
    strong.f64     two-band mode only: strong high-band component
    weak.f64       two-band mode only: weak low-band component

Per-signal randomness (signal draw, SNR jitter, observation noise and the
classical-baseline noise) derives from the root seed and the signal index
through fixed stream tags, so regeneration is byte-identical and the
benchmark can re-derive each signal's realized SNR without storing it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .signals import (
    Corruption,
    FoldedObservation,
    FoldingConfig,
    SamplingGrid,
    TwoBandConfig,
    add_awgn,
    fold,
    generate_bandlimited,
    generate_two_band,
    jittered_snr,
    quantize_uniform,
    rng_from,
)

MANIFEST_SCHEMA = 1

# Stream tags for the per-signal seed fan-out.
STREAM_SIGNAL = 1
STREAM_JITTER = 2
STREAM_NOISE = 3
STREAM_BASELINE = 4


def signal_seed_streams(root_seed: int, index: int):
    """Spawn keys used for signal i; exposed so the bench can re-derive them."""
    return {
        "signal": (STREAM_SIGNAL, index),
        "jitter": (STREAM_JITTER, index),
        "noise": (STREAM_NOISE, index),
        "baseline": (STREAM_BASELINE, index),
    }


def _stream_seed(root_seed: int, tag: int, index: int) -> int:
    """Fold a stream tag and index into a single derived 64-bit seed."""
    return int(rng_from(root_seed, tag, index).integers(0, 2 ** 63 - 1))


@dataclass
class Dataset:
    mode: str  # "awgn" | "two_band"
    grid: SamplingGrid
    lam: float
    clean: np.ndarray
    folded: np.ndarray
    corrupted: np.ndarray
    train_count: int
    test_count: int
    root_seed: int
    nominal_snr_db: float | None = None
    jitter_db: float = 5.0
    bits: int | None = None
    strong: np.ndarray | None = None
    weak: np.ndarray | None = None
    two_band: TwoBandConfig | None = None

    @property
    def count(self) -> int:
        return self.clean.shape[0]

    def realized_snr_db(self, index: int) -> float:
        if self.mode != "awgn":
            raise ConfigError("realized SNR only applies to AWGN datasets")
        return jittered_snr(self.nominal_snr_db, _stream_seed(self.root_seed, STREAM_JITTER, index),
                            width_db=self.jitter_db)

    def observation(self, index: int) -> FoldedObservation:
        if self.mode == "awgn":
            corruption = Corruption.awgn(self.realized_snr_db(index))
        else:
            corruption = Corruption.quantized(self.bits, self.lam)
        return FoldedObservation(
            samples=self.corrupted[index],
            folding=FoldingConfig(self.lam),
            corruption=corruption,
            grid=self.grid,
        )

    def train_indices(self) -> np.ndarray:
        return np.arange(self.train_count)

    def test_indices(self) -> np.ndarray:
        return np.arange(self.train_count, self.train_count + self.test_count)


def make_awgn_dataset(
    grid: SamplingGrid,
    lam: float,
    nominal_snr_db: float,
    train_count: int,
    test_count: int,
    root_seed: int,
    jitter_db: float = 5.0,
) -> Dataset:
    """Folded bandlimited signals with per-signal jittered AWGN."""
    n = grid.n_samples
    count = train_count + test_count
    clean = np.empty((count, n))
    folded = np.empty((count, n))
    corrupted = np.empty((count, n))
    for i in range(count):
        sig = generate_bandlimited(grid, _stream_seed(root_seed, STREAM_SIGNAL, i))
        clean[i] = sig.samples
        folded[i] = fold(sig.samples, lam)
        snr = jittered_snr(nominal_snr_db, _stream_seed(root_seed, STREAM_JITTER, i),
                           width_db=jitter_db)
        corrupted[i] = add_awgn(folded[i], snr, _stream_seed(root_seed, STREAM_NOISE, i))
    return Dataset(
        mode="awgn", grid=grid, lam=lam, clean=clean, folded=folded,
        corrupted=corrupted, train_count=train_count, test_count=test_count,
        root_seed=root_seed, nominal_snr_db=nominal_snr_db, jitter_db=jitter_db,
    )


def make_two_band_dataset(
    grid: SamplingGrid,
    lam: float,
    bits: int,
    train_count: int,
    test_count: int,
    root_seed: int,
    cfg: TwoBandConfig = TwoBandConfig(),
) -> Dataset:
    """Weak+strong two-band composites, folded then uniformly quantized."""
    n = grid.n_samples
    count = train_count + test_count
    clean = np.empty((count, n))
    folded = np.empty((count, n))
    corrupted = np.empty((count, n))
    strong = np.empty((count, n))
    weak = np.empty((count, n))
    for i in range(count):
        comp, s_comp, w_comp = generate_two_band(
            grid, cfg, _stream_seed(root_seed, STREAM_SIGNAL, i)
        )
        clean[i] = comp.samples
        strong[i] = s_comp.samples
        weak[i] = w_comp.samples
        folded[i] = fold(comp.samples, lam)
        corrupted[i] = quantize_uniform(folded[i], bits, lam)
    return Dataset(
        mode="two_band", grid=grid, lam=lam, clean=clean, folded=folded,
        corrupted=corrupted, train_count=train_count, test_count=test_count,
        root_seed=root_seed, bits=bits, strong=strong, weak=weak, two_band=cfg,
    )


def _write_block(path: str, arr: np.ndarray) -> None:
    np.ascontiguousarray(arr, dtype="<f8").tofile(path)


def write_dataset(ds: Dataset, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "mode": ds.mode,
        "n": ds.grid.n_samples,
        "oversampling": ds.grid.oversampling,
        "max_freq_hz": ds.grid.max_freq_hz,
        "lam": ds.lam,
        "counts": {"train": ds.train_count, "test": ds.test_count},
        "seed": ds.root_seed,
        "corruption": (
            {"kind": "awgn", "nominal_snr_db": ds.nominal_snr_db, "jitter_db": ds.jitter_db}
            if ds.mode == "awgn"
            else {"kind": "quantized", "bits": ds.bits, "range_half_width": ds.lam}
        ),
        "two_band": (
            None if ds.two_band is None else {
                "low_band_hz": list(ds.two_band.low_band_hz),
                "high_band_hz": list(ds.two_band.high_band_hz),
                "mod_freq_hz": ds.two_band.mod_freq_hz,
                "alpha_strong": ds.two_band.alpha_strong,
                "alpha_weak": ds.two_band.alpha_weak,
            }
        ),
    }
    with open(os.path.join(directory, "manifest"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=0)
        fh.write("\n")
    _write_block(os.path.join(directory, "clean.f64"), ds.clean)
    _write_block(os.path.join(directory, "folded.f64"), ds.folded)
    _write_block(os.path.join(directory, "corrupted.f64"), ds.corrupted)
    if ds.mode == "two_band":
        _write_block(os.path.join(directory, "strong.f64"), ds.strong)
        _write_block(os.path.join(directory, "weak.f64"), ds.weak)


def _read_block(path: str, count: int, n: int) -> np.ndarray:
    data = np.fromfile(path, dtype="<f8")
    if data.size != count * n:
        raise ConfigError(f"{path}: expected {count * n} float64 values, found {data.size}")
    return data.reshape(count, n)


def load_dataset(directory: str) -> Dataset:
    with open(os.path.join(directory, "manifest"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("schema") != MANIFEST_SCHEMA:
        raise ConfigError(f"unsupported dataset schema {manifest.get('schema')}")
    grid = SamplingGrid(manifest["n"], manifest["oversampling"], manifest["max_freq_hz"])
    counts = manifest["counts"]
    count = counts["train"] + counts["test"]
    n = grid.n_samples
    corr = manifest["corruption"]
    tb = manifest["two_band"]
    ds = Dataset(
        mode=manifest["mode"],
        grid=grid,
        lam=manifest["lam"],
        clean=_read_block(os.path.join(directory, "clean.f64"), count, n),
        folded=_read_block(os.path.join(directory, "folded.f64"), count, n),
        corrupted=_read_block(os.path.join(directory, "corrupted.f64"), count, n),
        train_count=counts["train"],
        test_count=counts["test"],
        root_seed=manifest["seed"],
        nominal_snr_db=corr.get("nominal_snr_db"),
        jitter_db=corr.get("jitter_db", 5.0),
        bits=corr.get("bits"),
        two_band=None if tb is None else TwoBandConfig(
            low_band_hz=tuple(tb["low_band_hz"]),
            high_band_hz=tuple(tb["high_band_hz"]),
            mod_freq_hz=tb["mod_freq_hz"],
            alpha_strong=tb["alpha_strong"],
            alpha_weak=tb["alpha_weak"],
        ),
    )
    if ds.mode == "two_band":
        ds.strong = _read_block(os.path.join(directory, "strong.f64"), count, n)
        ds.weak = _read_block(os.path.join(directory, "weak.f64"), count, n)
    return ds
