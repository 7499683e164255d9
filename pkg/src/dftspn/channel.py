"""Flat line-of-sight channel: multiplicative phase noise and AWGN.

The channel gain is fixed at one. SNR values refer to the signal bandwidth:
with the unitary chain of :mod:`dftspn.waveform`, a per-sample noise variance
``sigma2 = 10 ** (-snr_db / 10)`` lands on each demodulated symbol with the
same variance, so ``snr_db`` is also the per-symbol Es/N0. Full-band
(sampled bandwidth) SNR is ``snr_db + 10*log10(n_active / n_fft)``.
"""

from __future__ import annotations

import math

import numpy as np

from .pn_model import PnTrace


def apply_phase_noise(x, phi) -> np.ndarray:
    """Rotate every sample by its phase-noise value: ``y[p] = x[p] * exp(j*phi[p])``."""
    samples = phi.samples if isinstance(phi, PnTrace) else np.asarray(phi, dtype=float)
    x = np.asarray(x, dtype=complex)
    if x.shape != samples.shape:
        raise ValueError(f"signal/phase length mismatch: {x.shape} vs {samples.shape}")
    return x * np.exp(1j * samples)


def noise_variance(snr_db: float) -> float:
    return 0.0 if snr_db == math.inf else 10.0 ** (-snr_db / 10.0)


def complex_gaussian(shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circular complex Gaussian samples."""
    g = rng.standard_normal((2,) + tuple(np.atleast_1d(shape)))
    return (g[0] + 1j * g[1]) / math.sqrt(2.0)


def add_awgn(x, snr_db: float, seed=None) -> np.ndarray:
    """Add circular white Gaussian noise of variance ``10**(-snr_db/10)`` per sample.

    ``snr_db = inf`` returns ``x`` unchanged.
    """
    x = np.asarray(x, dtype=complex)
    if snr_db == math.inf:
        return x.copy()
    if not math.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite or +inf, got {snr_db}")
    rng = np.random.default_rng(seed)
    return x + math.sqrt(noise_variance(snr_db)) * complex_gaussian(x.shape, rng)
