"""Bandlimited test signals, amplitude folding, corruption models and NMSE.

All randomness flows through explicit integer seeds.  A root seed fans out
to independent streams via ``numpy.random.SeedSequence`` spawn keys, so
datasets and benchmarks are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BandError,
    DimensionError,
    FoldingError,
    GridError,
    ZeroSignalError,
)

# Edge shaping defaults.  Each window edge gets a dead zone (samples pushed
# to ~0) plus a raised-cosine ramp; the signal is then re-projected onto its
# band so spectral purity is exact.  Finite-window recovery needs the window
# to open and close below the folding range, otherwise the residual has an
# unobservable constant offset.
DEFAULT_EDGE_DEAD_FRAC = 0.04
DEFAULT_EDGE_RAMP_FRAC = 0.10
_EDGE_PROJECTION_ROUNDS = 2

# Pulse-mixture defaults: a few well-separated bursts whose energy sits in
# the middle of the window, with a smooth in-band spectral profile.  The
# reference recovery algorithms assume the residual folds in compact,
# separated lobes; window edges must stay below the folding range.
DEFAULT_PULSE_RANGE = (2, 4)
DEFAULT_SPREAD_FRAC = 0.17
DEFAULT_MIN_SEP_FRAC = 0.09
DEFAULT_PROFILE_SIGMA = 0.28


def rng_from(seed: int, *key: int) -> np.random.Generator:
    """Deterministic generator derived from a root seed and a spawn key."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


@dataclass(frozen=True)
class SamplingGrid:
    """Uniform sampling grid for a bandlimited signal.

    ``oversampling`` is the ratio of the sampling rate to the signal's
    Nyquist rate; ``band_fraction`` (the occupied fraction of the digital
    band) is stored as the derived value ``1 / oversampling``.
    ``max_freq_hz`` only matters for the physical two-band scenario.
    """

    n_samples: int
    oversampling: float
    max_freq_hz: float = 1.0

    def __post_init__(self):
        if self.n_samples < 2:
            raise GridError(f"n_samples must be >= 2, got {self.n_samples}")
        if not self.oversampling >= 1.0:
            raise GridError(
                f"oversampling must be >= 1 (band fraction <= 1), got {self.oversampling}"
            )
        if not self.max_freq_hz > 0:
            raise GridError(f"max_freq_hz must be positive, got {self.max_freq_hz}")

    @property
    def band_fraction(self) -> float:
        return 1.0 / self.oversampling

    @property
    def sample_rate_hz(self) -> float:
        return 2.0 * self.max_freq_hz * self.oversampling

    @property
    def sample_interval_s(self) -> float:
        return 1.0 / self.sample_rate_hz

    @property
    def hz_per_bin(self) -> float:
        return self.sample_rate_hz / self.n_samples


@dataclass(frozen=True)
class FoldingConfig:
    """Folding half-range (the ADC digitizes amplitudes in [-lam, lam])."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise FoldingError(f"folding half-range must be positive, got {self.lam}")


@dataclass(frozen=True)
class Corruption:
    """Observation corruption: none, AWGN at a given SNR, or uniform quantization."""

    kind: str
    snr_db: float | None = None
    bits: int | None = None
    range_half_width: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "awgn", "quantized"):
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        if self.kind == "awgn" and self.snr_db is None:
            raise ValueError("awgn corruption needs snr_db")
        if self.kind == "quantized" and (self.bits is None or self.range_half_width is None):
            raise ValueError("quantized corruption needs bits and range_half_width")

    @staticmethod
    def none() -> "Corruption":
        return Corruption("none")

    @staticmethod
    def awgn(snr_db: float) -> "Corruption":
        return Corruption("awgn", snr_db=snr_db)

    @staticmethod
    def quantized(bits: int, range_half_width: float) -> "Corruption":
        return Corruption("quantized", bits=bits, range_half_width=range_half_width)


@dataclass(frozen=True)
class Signal:
    """Real sample vector with its grid and the DFT bins allowed to carry energy."""

    samples: np.ndarray
    grid: SamplingGrid
    band_bins: np.ndarray


@dataclass(frozen=True)
class FoldedObservation:
    """Folded (and possibly corrupted) sample vector."""

    samples: np.ndarray
    folding: FoldingConfig
    corruption: Corruption
    grid: SamplingGrid


@dataclass(frozen=True)
class TwoBandConfig:
    """Weak low-frequency band plus strong modulated high-frequency band."""

    low_band_hz: tuple = (-20.0, 20.0)
    high_band_hz: tuple = (50.0, 90.0)
    mod_freq_hz: float = 70.0
    alpha_strong: float = 1.0
    alpha_weak: float = 0.25

    def __post_init__(self):
        if not (self.alpha_strong > self.alpha_weak > 0):
            raise ValueError("need alpha_strong > alpha_weak > 0")
        lo_hi = abs(self.low_band_hz[1])
        if lo_hi >= self.high_band_hz[0]:
            raise BandError("low and high bands must be disjoint")


def in_band_bins(n: int, rho: float) -> np.ndarray:
    """DFT bins whose normalized frequency lies in the closed band [-rho*pi, rho*pi]."""
    k = np.arange(n)
    folded = np.minimum(k, n - k)
    return k[folded <= rho * n / 2.0 + 1e-9]


def _edge_envelope(n: int, dead_frac: float, ramp_frac: float) -> np.ndarray:
    dead = int(round(dead_frac * n))
    ramp = int(round(ramp_frac * n))
    w = np.ones(n)
    if dead > 0:
        w[:dead] = 0.0
        w[n - dead:] = 0.0
    if ramp > 0:
        t = (np.arange(ramp) + 1.0) / (ramp + 1.0)
        rise = 0.5 * (1.0 - np.cos(np.pi * t))
        w[dead:dead + ramp] = rise
        w[n - dead - ramp:n - dead] = rise[::-1]
    return w


def _band_profile(n: int, bins: np.ndarray, profile_sigma: float) -> np.ndarray:
    """Gaussian amplitude profile across the in-band bins, peaked at DC."""
    k = np.arange(n)
    kf = np.minimum(k, n - k).astype(float)
    prof = np.zeros(n)
    kmax = float(kf[bins].max())
    if kmax == 0.0:
        prof[bins] = 1.0
        return prof
    prof[bins] = np.exp(-0.5 * (kf[bins] / (profile_sigma * kmax)) ** 2)
    return prof


def _synthesize_on_bins(
    n: int,
    bins: np.ndarray,
    rng: np.random.Generator,
    dead_frac: float,
    ramp_frac: float,
    pulse_range: tuple = DEFAULT_PULSE_RANGE,
    spread_frac: float = DEFAULT_SPREAD_FRAC,
    min_sep_frac: float = DEFAULT_MIN_SEP_FRAC,
    profile_sigma: float = DEFAULT_PROFILE_SIGMA,
) -> np.ndarray:
    """Unit-peak real pulse mixture supported exactly on ``bins``.

    Draws a handful of pulse centers in the middle of the window with a
    guaranteed minimum separation (one pulse dominates), modulates the
    profiled band kernel to each center, shapes the window edges and
    re-projects onto the band so spectral purity is exact.
    """
    if bins.size == 0:
        raise BandError("band covers no DFT bin on this grid")
    mask = np.zeros(n)
    mask[bins] = 1.0
    prof = _band_profile(n, bins, profile_sigma)
    p = int(rng.integers(pulse_range[0], pulse_range[1] + 1))
    lo, hi = n / 2.0 - spread_frac * n, n / 2.0 + spread_frac * n
    sep = min_sep_frac * n
    slack = max((hi - lo) - (p - 1) * sep, 1e-9)
    offsets = np.sort(rng.uniform(0.0, slack, size=p))
    centers = lo + offsets + np.arange(p) * sep
    slot = rng.permutation(p)
    amps = np.empty(p)
    amps[slot[0]] = rng.uniform(0.75, 1.0) * rng.choice([-1.0, 1.0])
    if p > 1:
        amps[slot[1:]] = rng.uniform(-0.55, 0.55, size=p - 1)
    k = np.arange(n)
    spec = (
        prof[None, :]
        * np.exp(-2j * np.pi * k[None, :] * centers[:, None] / n)
        * amps[:, None]
    ).sum(axis=0)
    x = np.fft.ifft(spec).real
    env = _edge_envelope(n, dead_frac, ramp_frac)
    for _ in range(_EDGE_PROJECTION_ROUNDS):
        x = np.fft.ifft(np.fft.fft(x * env) * mask).real
    return x / np.max(np.abs(x))


def generate_bandlimited(
    grid: SamplingGrid,
    seed: int,
    dead_frac: float = DEFAULT_EDGE_DEAD_FRAC,
    ramp_frac: float = DEFAULT_EDGE_RAMP_FRAC,
) -> Signal:
    """Random unit-peak signal occupying the grid's permitted band.

    Each signal is a mixture of a few separated pulses built from a
    smoothly profiled band kernel, so its energy concentrates midway
    through the window and decays toward the edges.  Out-of-band DFT
    energy is zero up to rounding and the peak is exactly one.
    Deterministic for a fixed seed.
    """
    rho = grid.band_fraction
    if rho > 1.0 + 1e-12:
        raise GridError(f"band fraction {rho} exceeds 1")
    bins = in_band_bins(grid.n_samples, rho)
    rng = rng_from(seed)
    x = _synthesize_on_bins(grid.n_samples, bins, rng, dead_frac, ramp_frac)
    return Signal(samples=x, grid=grid, band_bins=bins)


def hz_band_bins(grid: SamplingGrid, lo_hz: float, hi_hz: float) -> np.ndarray:
    """DFT bins whose physical frequency magnitude lies in [lo_hz, hi_hz]."""
    if hi_hz > grid.sample_rate_hz / 2.0 + 1e-9:
        raise BandError(
            f"band edge {hi_hz} Hz outside Nyquist range {grid.sample_rate_hz / 2.0} Hz"
        )
    n = grid.n_samples
    k = np.arange(n)
    freq = np.minimum(k, n - k) * grid.hz_per_bin
    return k[(freq >= lo_hz - 1e-9) & (freq <= hi_hz + 1e-9)]


def generate_two_band(
    grid: SamplingGrid,
    cfg: TwoBandConfig,
    seed: int,
    dead_frac: float = DEFAULT_EDGE_DEAD_FRAC,
    ramp_frac: float = DEFAULT_EDGE_RAMP_FRAC,
) -> tuple[Signal, Signal, Signal]:
    """Composite of a strong high-frequency and a weak low-frequency component.

    The high component is built at baseband and modulated up by a cosine
    carrier snapped to the nearest DFT bin, so band purity stays exact.
    Returns ``(composite, strong, weak)``; the composite is normalized to
    unit peak and the same scale factor is applied to both components, so
    ``composite == strong + weak``.
    """
    n = grid.n_samples
    res = grid.hz_per_bin
    lo_half = abs(cfg.low_band_hz[1])
    k_lo = int(np.floor(lo_half / res + 1e-9))
    if k_lo < 1:
        raise BandError("low band narrower than one DFT bin")
    k_c = int(round(cfg.mod_freq_hz / res))
    # Half-width of the modulated band, clipped so it stays inside the
    # configured high band after snapping the carrier to the bin grid.
    k_hi_half = min(
        k_lo,
        k_c - int(np.ceil(cfg.high_band_hz[0] / res - 1e-9)),
        int(np.floor(cfg.high_band_hz[1] / res + 1e-9)) - k_c,
    )
    if k_hi_half < 0 or k_c + k_hi_half > n // 2:
        raise BandError("high band unrepresentable on this grid")
    if cfg.high_band_hz[1] > grid.max_freq_hz + 1e-9:
        raise BandError("two-band config exceeds the grid's maximum frequency")

    low_bins = hz_band_bins(grid, 0.0, k_lo * res)
    base_bins = hz_band_bins(grid, 0.0, k_hi_half * res)

    weak_u = _synthesize_on_bins(n, low_bins, rng_from(seed, 1), dead_frac, ramp_frac)
    base = _synthesize_on_bins(n, base_bins, rng_from(seed, 2), dead_frac, ramp_frac)
    carrier = np.cos(2.0 * np.pi * k_c * np.arange(n) / n)
    strong_u = base * carrier
    strong_u = strong_u / np.max(np.abs(strong_u))

    pre = cfg.alpha_strong * strong_u + cfg.alpha_weak * weak_u
    scale = 1.0 / np.max(np.abs(pre))
    composite = pre * scale
    strong = (cfg.alpha_strong * scale) * strong_u
    weak = (cfg.alpha_weak * scale) * weak_u

    hi_bins = np.sort(np.concatenate([(k_c + np.arange(-k_hi_half, k_hi_half + 1)) % n,
                                      (-(k_c + np.arange(-k_hi_half, k_hi_half + 1))) % n]))
    hi_bins = np.unique(hi_bins)
    both = np.unique(np.concatenate([low_bins, hi_bins]))
    return (
        Signal(composite, grid, both),
        Signal(strong, grid, hi_bins),
        Signal(weak, grid, low_bins),
    )


def fold(x: np.ndarray, folding: FoldingConfig | float) -> np.ndarray:
    """Centered modulo: ((x + lam) mod 2*lam) - lam, mapping into [-lam, lam)."""
    lam = folding.lam if isinstance(folding, FoldingConfig) else float(folding)
    if not lam > 0:
        raise FoldingError(f"folding half-range must be positive, got {lam}")
    x = np.asarray(x, dtype=float)
    return np.mod(x + lam, 2.0 * lam) - lam


def fold_residual(x: np.ndarray, folding: FoldingConfig | float) -> np.ndarray:
    """Residual z = fold(x) - x; every entry is an integer multiple of 2*lam."""
    return fold(x, folding) - np.asarray(x, dtype=float)


def add_awgn(x: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise at the given SNR relative to mean-square power."""
    x = np.asarray(x, dtype=float)
    power = float(np.mean(x * x))
    if power == 0.0:
        raise ZeroSignalError("SNR undefined for an all-zero signal")
    if np.isinf(snr_db):
        return x.copy()
    sigma = np.sqrt(power * 10.0 ** (-snr_db / 10.0))
    return x + sigma * rng_from(seed).standard_normal(x.shape)


def jittered_snr(nominal_db: float, seed: int, width_db: float = 5.0) -> float:
    """Uniform draw in [nominal - width, nominal + width] dB."""
    if width_db == 0.0:
        return float(nominal_db)
    return float(nominal_db + rng_from(seed).uniform(-width_db, width_db))


def quantize_uniform(x: np.ndarray, bits: int, range_half_width: float) -> np.ndarray:
    """Mid-rise uniform quantizer over [-range_half_width, range_half_width].

    Out-of-range inputs clamp to the extreme levels (saturation).
    """
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if not range_half_width > 0:
        raise ValueError("range_half_width must be positive")
    x = np.asarray(x, dtype=float)
    n_levels = 2 ** bits
    step = 2.0 * range_half_width / n_levels
    idx = np.floor((x + range_half_width) / step)
    idx = np.clip(idx, 0, n_levels - 1)
    return -range_half_width + step / 2.0 + idx * step


def nmse(truth: np.ndarray, estimate: np.ndarray) -> float:
    """Squared error normalized by the ground-truth energy."""
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise DimensionError(f"shape mismatch {truth.shape} vs {estimate.shape}")
    denom = float(np.sum(truth * truth))
    if denom == 0.0:
        raise ZeroSignalError("NMSE undefined for an all-zero truth")
    diff = truth - estimate
    return float(np.sum(diff * diff) / denom)
