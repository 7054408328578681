"""Modulo (self-reset) sampling simulation and recovery toolkit."""

from .signals import (
    Corruption,
    FoldedObservation,
    FoldingConfig,
    SamplingGrid,
    Signal,
    TwoBandConfig,
    add_awgn,
    fold,
    fold_residual,
    generate_bandlimited,
    generate_two_band,
    jittered_snr,
    nmse,
    quantize_uniform,
)
from .spectral import (
    OutOfBandSet,
    PartialDftOperator,
    PartialSpectrum,
    apply_adjoint,
    band_extract,
    cumsum,
    first_diff,
    full_band_set,
    operator_norm_sq,
    out_of_band_set,
    partial_spectrum,
)
from .classic import (
    B2r2Config,
    HodConfig,
    IstaConfig,
    ResidualEstimate,
    b2r2_recover,
    hod_order,
    hod_recover,
    lasso_b2r2_recover,
    round_to_grid,
    soft_threshold,
    unfold,
)

__all__ = [name for name in dir() if not name.startswith("_")]
