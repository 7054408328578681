"""Difference/summation operators and the out-of-band partial DFT.

The partial operator V selects the DFT rows strictly inside the spectral
gap (rho*pi, 2*pi - rho*pi).  Rows of the full DFT matrix are mutually
orthogonal with squared norm N, so V V^H = N*I for any row subset; the
squared spectral norm of V is therefore N whenever the gap is nonempty.
V^H V, however, is N times a rank-M projection, not N*I.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BandError, DimensionError, GridError, RateTooLowError
from .signals import SamplingGrid, hz_band_bins


def first_diff(x: np.ndarray) -> np.ndarray:
    """First-order difference with the x[-1] = 0 boundary convention.

    y[0] = x[0] and y[n] = x[n] - x[n-1]; exact inverse of :func:`cumsum`.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    y = np.empty_like(x)
    y[0] = x[0]
    y[1:] = x[1:] - x[:-1]
    return y


def cumsum(x: np.ndarray) -> np.ndarray:
    """Running sum; inverse of :func:`first_diff`."""
    return np.cumsum(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class OutOfBandSet:
    """Ordered DFT bin indices strictly inside the spectral gap."""

    n: int
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        object.__setattr__(self, "indices", idx)
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.n):
            raise BandError("indices must be strictly increasing within [0, n)")

    @property
    def m(self) -> int:
        return int(self.indices.size)

    def mask(self) -> np.ndarray:
        mask = np.zeros(self.n)
        mask[self.indices] = 1.0
        return mask


def out_of_band_set(n: int, rho: float) -> OutOfBandSet:
    """All bins k with 2*pi*k/n strictly inside (rho*pi, 2*pi - rho*pi)."""
    if n < 2:
        raise GridError(f"n must be >= 2, got {n}")
    if not 0.0 < rho <= 1.0 + 1e-12:
        raise GridError(f"band fraction must be in (0, 1], got {rho}")
    k = np.arange(n)
    w = 2.0 * k / n  # normalized frequency in units of pi
    inside = (w > rho + 1e-9) & (w < 2.0 - rho - 1e-9)
    return OutOfBandSet(n=n, indices=k[inside])


def full_band_set(n: int) -> OutOfBandSet:
    """All n bins; V is then the complete DFT matrix (used by tests/oracles)."""
    return OutOfBandSet(n=n, indices=np.arange(n))


@dataclass(frozen=True)
class PartialSpectrum:
    """Complex DFT values of a real vector on an out-of-band index set."""

    values: np.ndarray
    band: OutOfBandSet

    def __post_init__(self):
        if np.asarray(self.values).size != self.band.m:
            raise DimensionError(
                f"spectrum length {np.asarray(self.values).size} != band size {self.band.m}"
            )


def partial_spectrum(x: np.ndarray, band: OutOfBandSet) -> PartialSpectrum:
    """Apply V: full FFT followed by row selection."""
    x = np.asarray(x, dtype=float)
    if x.size != band.n:
        raise DimensionError(f"length {x.size} != band n {band.n}")
    return PartialSpectrum(values=np.fft.fft(x)[band.indices], band=band)


def apply_forward(band: OutOfBandSet, z: np.ndarray) -> np.ndarray:
    """V z as a bare complex vector (no wrapper), for solver hot paths."""
    return np.fft.fft(np.asarray(z, dtype=float))[band.indices]


def apply_adjoint(band: OutOfBandSet, s: np.ndarray | PartialSpectrum) -> np.ndarray:
    """Real part of V^H s, length n (the imaginary part is discarded)."""
    if isinstance(s, PartialSpectrum):
        if s.band is not band and not np.array_equal(s.band.indices, band.indices):
            raise DimensionError("spectrum band does not match operator band")
        s = s.values
    s = np.asarray(s, dtype=complex)
    if s.size != band.m:
        raise DimensionError(f"spectrum length {s.size} != band size {band.m}")
    full = np.zeros(band.n, dtype=complex)
    full[band.indices] = s
    return np.fft.ifft(full).real * band.n


@dataclass
class PartialDftOperator:
    """Out-of-band DFT operator with its cached squared spectral norm.

    Entries are V[r, n] = exp(-2j*pi*k_r*n/N); the matrix is never formed
    in the hot path (FFT plus row gather instead).
    """

    band: OutOfBandSet
    norm_sq: float = field(init=False)

    def __post_init__(self):
        if self.band.m == 0:
            raise RateTooLowError("empty out-of-band set: no operator")
        self.norm_sq = _power_iteration_norm_sq(self.band)

    def forward(self, z: np.ndarray) -> np.ndarray:
        return apply_forward(self.band, z)

    def adjoint(self, s: np.ndarray) -> np.ndarray:
        return apply_adjoint(self.band, s)

    def gram(self, z: np.ndarray) -> np.ndarray:
        """Real V^H V z via masked FFT round trip."""
        return np.fft.ifft(np.fft.fft(np.asarray(z, dtype=float)) * self.band.mask()).real * self.band.n

    def dense(self) -> np.ndarray:
        """Explicit M x N complex matrix (small-instance oracles only)."""
        n = self.band.n
        k = self.band.indices[:, None]
        t = np.arange(n)[None, :]
        return np.exp(-2j * np.pi * k * t / n)


def _power_iteration_norm_sq(band: OutOfBandSet, tol: float = 1e-10, max_iters: int = 200) -> float:
    """Largest eigenvalue of V^H V by power iteration on the masked FFT."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(band.n)
    v /= np.linalg.norm(v)
    mask = band.mask()
    lam_prev = 0.0
    for _ in range(max_iters):
        w = np.fft.ifft(np.fft.fft(v) * mask).real * band.n
        lam = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        v = w / norm
        if abs(lam - lam_prev) <= tol * max(1.0, abs(lam)):
            return lam
        lam_prev = lam
    return lam_prev


def operator_norm_sq(op: PartialDftOperator) -> float:
    """Cached ||V||_2^2 (equals N for any nonempty row subset of the DFT)."""
    return op.norm_sq


def band_extract(x: np.ndarray, band_hz: tuple, grid: SamplingGrid) -> np.ndarray:
    """Ideal DFT-domain bandpass: keep bins with |freq| inside band_hz, zero the rest."""
    x = np.asarray(x, dtype=float)
    if x.size != grid.n_samples:
        raise DimensionError(f"length {x.size} != grid size {grid.n_samples}")
    # A negative lower edge means the band is symmetric about DC.
    bins = hz_band_bins(grid, max(band_hz[0], 0.0), band_hz[1])
    mask = np.zeros(grid.n_samples)
    mask[bins] = 1.0
    return np.fft.ifft(np.fft.fft(x) * mask).real
