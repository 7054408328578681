"""Unfolded iterative decoder with a soft-quantization stage.

The network unrolls the soft-thresholding iteration on the residual's
first difference into L layers with learnable per-layer weights, adds a
differentiable staircase (sum of scaled tanh terms) that pulls estimates
toward the 2*lam grid, and trains with NMSE loss under Adam.  Gradients
are computed by hand in reverse mode; no autodiff framework is involved.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .classic import ResidualEstimate, soft_threshold
from .errors import CheckpointError, ConfigError, DimensionError, GridError
from .signals import FoldedObservation, rng_from
from .spectral import (
    OutOfBandSet,
    PartialDftOperator,
    PartialSpectrum,
    first_diff,
    partial_spectrum,
)

CHECKPOINT_SCHEMA = 1


@dataclass(frozen=True)
class SqConfig:
    """Soft-quantizer grid: D = 2*ell + 1 transition points spaced 2*lam apart."""

    lam: float
    ell: int
    shift_offset: float = 0.0

    def __post_init__(self):
        if self.ell < 0:
            raise ConfigError(f"ell must be >= 0, got {self.ell}")

    @property
    def levels(self) -> int:
        return 2 * self.ell + 1

    def shifts(self) -> np.ndarray:
        i = np.arange(1, self.levels + 1)
        return (i - (self.ell + 1)) * 2.0 * self.lam + self.shift_offset


def soft_quantize(x: np.ndarray, sq: SqConfig, beta: float) -> np.ndarray:
    """Differentiable staircase: -lam + sum_i lam * tanh(beta * (x - s_i))."""
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    x = np.asarray(x, dtype=float)
    t = np.tanh(beta * (x[..., None] - sq.shifts()))
    return -sq.lam + sq.lam * t.sum(axis=-1)


def _sq_value_and_dx(x: np.ndarray, sq: SqConfig, beta: float):
    t = np.tanh(beta * (x[..., None] - sq.shifts()))
    sech2 = 1.0 - t * t
    value = -sq.lam + sq.lam * t.sum(axis=-1)
    dx = sq.lam * beta * sech2.sum(axis=-1)
    dbeta = sq.lam * ((x[..., None] - sq.shifts()) * sech2).sum(axis=-1)
    return value, dx, dbeta


@dataclass
class MsquidLayer:
    """One unrolled iteration: affine update, shrinkage, optional soft quantization."""

    w1: np.ndarray
    w2_re: np.ndarray
    w2_im: np.ndarray
    gamma: float
    beta: float
    sq_enabled: bool = True


@dataclass
class MsquidModel:
    layers: list
    sq: SqConfig
    band: OutOfBandSet
    oversampling: float
    max_freq_hz: float = 1.0

    @property
    def n(self) -> int:
        return self.band.n

    @property
    def m(self) -> int:
        return self.band.m

    @property
    def lam(self) -> float:
        return self.sq.lam

    def parameters(self):
        """Flat list of (name, array-or-scalar holder) pairs in declared order."""
        out = []
        for i, layer in enumerate(self.layers):
            out.append((f"layer{i}.w1", layer.w1))
            out.append((f"layer{i}.w2_re", layer.w2_re))
            out.append((f"layer{i}.w2_im", layer.w2_im))
            out.append((f"layer{i}.gamma", layer.gamma))
            out.append((f"layer{i}.beta", layer.beta))
        return out


def init_model(
    band: OutOfBandSet,
    num_layers: int,
    gamma0: float,
    beta0: float,
    sq: SqConfig,
    faithful: bool = False,
    sq_enabled: bool = True,
    oversampling: float = 0.0,
    max_freq_hz: float = 1.0,
) -> MsquidModel:
    """Build the unfolded model at its solver-matched starting point.

    Default (literal) mode sets W1 = (1 - tau*N) * I, which is the zero
    matrix because ||V||^2 = N for every row subset; faithful mode uses
    W1 = I - tau * V^H V with the true partial-operator product so the
    untrained forward pass reproduces plain ISTA.  W2 = tau * V^H split
    into real and imaginary parts in both modes.
    """
    if num_layers < 1:
        raise ConfigError(f"need at least one layer, got {num_layers}")
    n, m = band.n, band.m
    op = PartialDftOperator(band)
    tau = 1.0 / op.norm_sq
    k = band.indices
    t = np.arange(n)
    # V^H entries are exp(+2j*pi*k*t/n); tau * V^H split by parts.
    ang = 2.0 * np.pi * np.outer(t, k) / n
    w2_re = tau * np.cos(ang)
    w2_im = tau * np.sin(ang)
    if faithful:
        gram = np.real(np.fft.ifft(band.mask()[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)) * n
        w1 = np.eye(n) - tau * gram
    else:
        w1 = (1.0 - tau * n) * np.eye(n)
    layers = [
        MsquidLayer(
            w1=w1.copy(),
            w2_re=w2_re.copy(),
            w2_im=w2_im.copy(),
            gamma=float(gamma0),
            beta=float(beta0),
            sq_enabled=sq_enabled,
        )
        for _ in range(num_layers)
    ]
    return MsquidModel(layers=layers, sq=sq, band=band,
                       oversampling=oversampling, max_freq_hz=max_freq_hz)


def default_beta0(sq: SqConfig) -> float:
    """Steepness whose small-beta linearization has unit slope."""
    return 1.0 / (sq.lam * sq.levels)


def _forward_batch(model: MsquidModel, fr: np.ndarray, fi: np.ndarray, keep: bool = False):
    """Forward pass on stacked spectra [B, M]; optionally cache per-layer tensors."""
    b = fr.shape[0]
    z = np.zeros((b, model.n))
    cache = []
    for layer in model.layers:
        u = z @ layer.w1.T + fr @ layer.w2_re.T - fi @ layer.w2_im.T
        v = soft_threshold(u, layer.gamma)
        if layer.sq_enabled:
            q, dx, dbeta = _sq_value_and_dx(v, model.sq, layer.beta)
        else:
            q, dx, dbeta = v, None, None
        if keep:
            cache.append((z, u, v, dx, dbeta))
        z = q
    return z, cache


def forward(model: MsquidModel, spectrum: PartialSpectrum) -> np.ndarray:
    """Network output zhat for one observation spectrum."""
    if not np.array_equal(spectrum.band.indices, model.band.indices):
        raise DimensionError("spectrum band does not match the model band")
    vals = np.asarray(spectrum.values)
    out, _ = _forward_batch(model, vals.real[None, :], vals.imag[None, :])
    return out[0]


def _loss_rows(y: np.ndarray, t: np.ndarray):
    """Per-row NMSE (plain squared error for all-zero targets) and d/dy."""
    denom = np.sum(t * t, axis=1)
    safe = np.where(denom > 0.0, denom, 1.0)
    diff = y - t
    loss = np.sum(diff * diff, axis=1) / safe
    dy = 2.0 * diff / safe[:, None]
    return loss, dy


def loss_and_gradients(model: MsquidModel, batch):
    """Mean NMSE over (spectrum, target) pairs plus reverse-mode gradients.

    Returns (loss, grads) where grads is one dict per layer with keys
    w1, w2_re, w2_im, gamma, beta.  Batch accumulation follows index
    order so results are deterministic.
    """
    if len(batch) == 0:
        raise ConfigError("empty batch")
    fr = np.stack([np.asarray(s.values).real for s, _ in batch])
    fi = np.stack([np.asarray(s.values).imag for s, _ in batch])
    t = np.stack([np.asarray(tgt, dtype=float) for _, tgt in batch])
    return _loss_and_gradients_arrays(model, fr, fi, t)


def _loss_and_gradients_arrays(model: MsquidModel, fr, fi, t):
    b = fr.shape[0]
    y, cache = _forward_batch(model, fr, fi, keep=True)
    loss_rows, dy = _loss_rows(y, t)
    loss = float(np.mean(loss_rows))
    g_out = dy / b
    grads = [None] * len(model.layers)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        z_in, u, v, dx, dbeta = cache[i]
        if layer.sq_enabled:
            g_v = g_out * dx
            g_beta = float(np.sum(g_out * dbeta))
        else:
            g_v = g_out
            g_beta = 0.0
        active = np.abs(u) > layer.gamma
        g_u = np.where(active, g_v, 0.0)
        g_gamma = float(np.sum(np.where(active, -np.sign(u) * g_v, 0.0)))
        grads[i] = {
            "w1": g_u.T @ z_in,
            "w2_re": g_u.T @ fr,
            "w2_im": -(g_u.T @ fi),
            "gamma": g_gamma,
            "beta": g_beta,
        }
        g_out = g_u @ layer.w1
    return loss, grads


# ---------------------------------------------------------------------------
# Optimizer


@dataclass
class AdamState:
    """Standard Adam accumulators over the model's parameter list."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    def ensure(self, shapes):
        if not self.first_moment:
            self.first_moment = [np.zeros(s) for s in shapes]
            self.second_moment = [np.zeros(s) for s in shapes]


def _model_param_arrays(model: MsquidModel):
    """Per-layer parameter views; scalars are boxed as 0-d arrays on the fly."""
    arrays = []
    for layer in model.layers:
        arrays.extend([layer.w1, layer.w2_re, layer.w2_im,
                       np.float64(layer.gamma), np.float64(layer.beta)])
    return arrays


def adam_step(model: MsquidModel, grads, state: AdamState) -> None:
    """One bias-corrected Adam update over every learnable parameter.

    Thresholds are projected back to gamma >= 0 and beta > 0 afterwards,
    keeping the layer invariants intact.
    """
    flat_grads = []
    for g in grads:
        flat_grads.extend([g["w1"], g["w2_re"], g["w2_im"], g["gamma"], g["beta"]])
    shapes = [np.shape(g) for g in flat_grads]
    state.ensure(shapes)
    if len(state.first_moment) != len(flat_grads):
        raise DimensionError("optimizer state does not match parameter count")
    state.step_count += 1
    c1 = 1.0 - state.beta1 ** state.step_count
    c2 = 1.0 - state.beta2 ** state.step_count
    updates = []
    for j, g in enumerate(flat_grads):
        g = np.asarray(g, dtype=float)
        if state.first_moment[j].shape != g.shape:
            raise DimensionError("gradient shape changed between steps")
        state.first_moment[j] = state.beta1 * state.first_moment[j] + (1 - state.beta1) * g
        state.second_moment[j] = state.beta2 * state.second_moment[j] + (1 - state.beta2) * g * g
        m_hat = state.first_moment[j] / c1
        v_hat = state.second_moment[j] / c2
        updates.append(state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon))
    i = 0
    for layer in model.layers:
        layer.w1 -= updates[i]; i += 1
        layer.w2_re -= updates[i]; i += 1
        layer.w2_im -= updates[i]; i += 1
        layer.gamma = max(float(layer.gamma - updates[i]), 0.0); i += 1
        layer.beta = max(float(layer.beta - updates[i]), 1e-6); i += 1


# ---------------------------------------------------------------------------
# Training


@dataclass
class SpectrumDataset:
    """Stacked network inputs (Re/Im of gap spectra) and residual-difference targets."""

    fr: np.ndarray
    fi: np.ndarray
    target: np.ndarray

    def __len__(self):
        return self.fr.shape[0]

    def subset(self, idx) -> "SpectrumDataset":
        return SpectrumDataset(self.fr[idx], self.fi[idx], self.target[idx])


def evaluate_nmse(model: MsquidModel, data: SpectrumDataset) -> float:
    y, _ = _forward_batch(model, data.fr, data.fi)
    loss_rows, _ = _loss_rows(y, data.target)
    return float(np.mean(loss_rows))


def train(
    model: MsquidModel,
    train_set: SpectrumDataset,
    val_set: SpectrumDataset,
    epochs: int,
    lr: float = 1e-3,
    batch_size: int = 32,
    seed: int = 0,
):
    """Mini-batch Adam training; returns the best-validation model and history.

    Shuffling is driven by the seed only, so identical calls produce
    bit-identical parameter trajectories.  Aborts on non-finite loss.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ConfigError("training and validation sets must be nonempty")
    state = AdamState(lr=lr)
    history = {"train_loss": [], "val_nmse": []}
    best_val = evaluate_nmse(model, val_set)
    best_layers = copy.deepcopy(model.layers)
    rng = rng_from(seed)
    n = len(train_set)
    for epoch in range(epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss, grads = _loss_and_gradients_arrays(
                model, train_set.fr[idx], train_set.fi[idx], train_set.target[idx]
            )
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (loss={loss}); lower the learning rate"
                )
            adam_step(model, grads, state)
            epoch_losses.append(loss)
        val_nmse = evaluate_nmse(model, val_set)
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_nmse"].append(val_nmse)
        if val_nmse < best_val:
            best_val = val_nmse
            best_layers = copy.deepcopy(model.layers)
    model.layers = best_layers
    return model, history


# ---------------------------------------------------------------------------
# Checkpoints


def save_model(model: MsquidModel, path) -> None:
    """Write a checkpoint: one JSON header line, then raw little-endian f64 blocks."""
    header = {
        "schema": CHECKPOINT_SCHEMA,
        "n": model.n,
        "m": model.m,
        "band_indices": model.band.indices.tolist(),
        "num_layers": len(model.layers),
        "lam": model.lam,
        "ell": model.sq.ell,
        "shift_offset": model.sq.shift_offset,
        "sq_enabled": [bool(l.sq_enabled) for l in model.layers],
        "oversampling": model.oversampling,
        "max_freq_hz": model.max_freq_hz,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for layer in model.layers:
            for arr in (layer.w1, layer.w2_re, layer.w2_im,
                        np.atleast_1d(layer.gamma), np.atleast_1d(layer.beta)):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> MsquidModel:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"unreadable checkpoint header in {path}") from exc
        if header.get("schema") != CHECKPOINT_SCHEMA:
            raise CheckpointError(f"unsupported checkpoint schema {header.get('schema')}")
        n, m, num_layers = header["n"], header["m"], header["num_layers"]
        band = OutOfBandSet(n=n, indices=np.asarray(header["band_indices"], dtype=int))
        if band.m != m:
            raise CheckpointError("band indices inconsistent with recorded m")
        sq = SqConfig(lam=header["lam"], ell=header["ell"], shift_offset=header["shift_offset"])
        blob = fh.read()
    sizes = [n * n, n * m, n * m, 1, 1] * num_layers
    expected = sum(sizes) * 8
    if len(blob) != expected:
        raise CheckpointError(
            f"checkpoint {path} holds {len(blob)} parameter bytes, expected {expected}"
        )
    flat = np.frombuffer(blob, dtype="<f8")
    layers = []
    pos = 0
    for i in range(num_layers):
        w1 = flat[pos:pos + n * n].reshape(n, n).copy(); pos += n * n
        w2_re = flat[pos:pos + n * m].reshape(n, m).copy(); pos += n * m
        w2_im = flat[pos:pos + n * m].reshape(n, m).copy(); pos += n * m
        gamma = float(flat[pos]); pos += 1
        beta = float(flat[pos]); pos += 1
        layers.append(MsquidLayer(w1=w1, w2_re=w2_re, w2_im=w2_im, gamma=gamma,
                                  beta=beta, sq_enabled=bool(header["sq_enabled"][i])))
    return MsquidModel(layers=layers, sq=sq, band=band,
                       oversampling=header["oversampling"],
                       max_freq_hz=header["max_freq_hz"])


# ---------------------------------------------------------------------------
# Recovery


def msquid_recover(folded: FoldedObservation, model: MsquidModel) -> ResidualEstimate:
    """Full recovery: gap spectrum of the observation's difference, network
    estimate, grid rounding and summation."""
    grid = folded.grid
    if grid.n_samples != model.n:
        raise GridError(f"model expects n={model.n}, observation has {grid.n_samples}")
    if model.oversampling and abs(grid.oversampling - model.oversampling) > 1e-9:
        raise GridError("model was trained for a different oversampling factor")
    if abs(folded.folding.lam - model.lam) > 1e-12:
        raise ConfigError("folding range differs between observation and model")
    spec = partial_spectrum(first_diff(folded.samples), model.band)
    zhat = forward(model, spec)
    return ResidualEstimate.from_zhat(zhat, model.lam)
