"""Exact rotation/ICI decomposition of the received DFT-s-OFDM symbols.

For one symbol body with phase samples ``phi`` (length ``n_fft``) the
noiseless received block is ``r = H s`` with

    H = D^H Map^T F diag(exp(j*phi)) F^H Map D

(D: unitary N_a-point DFT, F: unitary n_fft-point DFT, Map: localized bin
mapping). The rotation term is ``alpha_k = H[k, k]`` and the ICI term is
``beta_k = sum_{n != k} H[k, n] s_n``.

Two independent evaluations exist: the explicit matrix chain
(:func:`effective_matrix`, reference) and the literal triple sums
(:func:`alpha_beta_sums`). With the unitary conventions used here the
triple-sum prefactor ``1/(N_a*N_p)`` maps onto the chain with a scale
constant of exactly 1 (:data:`CONVENTION_SCALE`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .waveform import FrameConfig

#: Factor relating the triple-sum normalisation to the unitary chain.
CONVENTION_SCALE = 1.0

#: Largest FFT size accepted by the brute-force triple-sum path.
BRUTE_FORCE_MAX_NFFT = 64


class OracleSizeError(RuntimeError):
    """Brute-force evaluation requested beyond :data:`BRUTE_FORCE_MAX_NFFT`."""


@dataclass(frozen=True)
class InterferenceDecomposition:
    alpha: np.ndarray
    beta: np.ndarray
    h_eff: np.ndarray | None = None


def symbol_phases(phi, cfg: FrameConfig) -> np.ndarray:
    """Split a frame-long phase trace into ``(n_sym, n_fft)`` body segments (CP dropped)."""
    phi = np.asarray(getattr(phi, "samples", phi), dtype=float)
    if phi.size % cfg.symbol_len:
        raise ValueError(f"trace length {phi.size} is not a multiple of {cfg.symbol_len}")
    return phi.reshape(-1, cfg.symbol_len)[:, cfg.cp_len:]


def _dft(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def transmit_matrix(cfg: FrameConfig) -> np.ndarray:
    """``n_fft x n_active`` matrix of the transmit chain (symbol body, no CP)."""
    mapping = np.zeros((cfg.n_fft, cfg.n_active))
    mapping[cfg.offset + np.arange(cfg.n_active), np.arange(cfg.n_active)] = 1.0
    return _dft(cfg.n_fft).conj().T @ mapping @ _dft(cfg.n_active)


def effective_matrix(phi, cfg: FrameConfig) -> np.ndarray:
    """``N_a x N_a`` matrix mapping transmitted to received symbols for one body."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (cfg.n_fft,):
        raise ValueError(f"phase segment must have length n_fft={cfg.n_fft}, got {phi.shape}")
    t = transmit_matrix(cfg)
    return t.conj().T @ (np.exp(1j * phi)[:, None] * t)


def alpha_fast(phi, cfg: FrameConfig) -> np.ndarray:
    """Diagonal of the effective matrix for one or many bodies in O(n_fft log n_fft).

    ``H[k, k]`` only depends on the circular spectrum ``c`` of ``exp(j*phi)``
    through lags ``d = -(N_a-1) .. N_a-1`` weighted by ``N_a - |d|``; the lags
    are folded modulo ``N_a`` and summed with an inverse DFT.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    n, na = cfg.n_fft, cfg.n_active
    c = np.fft.fft(np.exp(1j * phi), axis=-1) / n
    d = np.arange(na)
    g = (na - d) * c[:, d]
    g[:, 1:] += d[1:] * c[:, (d[1:] - na) % n]
    return np.fft.ifft(g, axis=-1)


def body_chain(s, phi, cfg: FrameConfig) -> np.ndarray:
    """Noiseless received blocks for symbols ``s`` and body phases ``phi`` (both ``(n_sym, ...)``)."""
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    grid = np.zeros((s.shape[0], cfg.n_fft), dtype=complex)
    grid[:, cfg.offset:cfg.offset + cfg.n_active] = np.fft.fft(s, axis=-1, norm="ortho")
    body = np.fft.ifft(grid, axis=-1, norm="ortho") * np.exp(1j * phi)
    rx = np.fft.fft(body, axis=-1, norm="ortho")[:, cfg.offset:cfg.offset + cfg.n_active]
    return np.fft.ifft(rx, axis=-1, norm="ortho")


def decompose(phi, s, cfg: FrameConfig, with_matrix: bool = False) -> InterferenceDecomposition:
    """Rotation and ICI terms for one or many symbol bodies.

    ``phi`` is ``(n_sym, n_fft)`` (or a single body), ``s`` the matching
    ``(n_sym, n_active)`` transmitted blocks. ``with_matrix`` additionally
    returns the explicit effective matrices (small sizes).
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    alpha = alpha_fast(phi, cfg)
    beta = body_chain(s, phi, cfg) - alpha * s
    h = np.stack([effective_matrix(p, cfg) for p in phi]) if with_matrix else None
    return InterferenceDecomposition(alpha, beta, h)


def alpha_beta_sums(phi, s, cfg: FrameConfig, m_range: str = "printed") -> InterferenceDecomposition:
    """Brute-force evaluation of the rotation and ICI triple sums.

    ``m_range="printed"`` sums the transmit-bin index ``m`` over all
    ``n_fft`` bins as the formulas are usually typeset; ``"active"``
    restricts it to the ``n_active`` occupied bins, which is what the
    physical chain does.
    """
    n, na = cfg.n_fft, cfg.n_active
    if n > BRUTE_FORCE_MAX_NFFT:
        raise OracleSizeError(f"brute-force sums capped at n_fft <= {BRUTE_FORCE_MAX_NFFT}, got {n}")
    if m_range not in ("printed", "active"):
        raise ValueError("m_range must be 'printed' or 'active'")
    phi = np.asarray(phi, dtype=float)
    s = np.asarray(s, dtype=complex)
    f = np.arange(na)
    m = np.arange(n if m_range == "printed" else na)
    p = np.arange(n)
    u = np.exp(1j * phi)
    # G[m, f] = sum_p exp(j 2pi (m - f) p / n) exp(j phi(p))
    diff = m[:, None] - f[None, :]
    g = np.einsum("mfp,p->mf", np.exp(2j * np.pi * diff[:, :, None] * p[None, None, :] / n), u)
    k = np.arange(na)
    # B[n, k] = sum_{f, m} G[m, f] exp(j 2pi (k f - n m) / na)
    ek = np.exp(2j * np.pi * np.outer(k, f) / na)        # [k, f]
    en = np.exp(-2j * np.pi * np.outer(k, m) / na)       # [n, m]
    b = np.einsum("mf,kf,nm->nk", g, ek, en)
    scale = CONVENTION_SCALE / (na * n)
    alpha = np.diag(b) * scale
    off = b * scale
    off[np.diag_indices(na)] = 0.0
    beta = s @ off                                       # beta_k = sum_{n != k} s_n B[n, k]
    return InterferenceDecomposition(alpha, beta, (b * scale).T)


def true_phi_prime(decomp: InterferenceDecomposition) -> tuple[np.ndarray, float]:
    """Phase of the rotation term and the unit-modulus residual ``max | |alpha| - 1 |``."""
    alpha = decomp.alpha
    return np.angle(alpha), float(np.max(np.abs(np.abs(alpha) - 1.0)))


def max_relative_deviation(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    scale = max(np.max(np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b)) / scale)
