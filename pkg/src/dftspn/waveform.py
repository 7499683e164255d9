"""DFT-s-OFDM transmit/receive chain and Gray-coded square QAM.

Transform conventions
---------------------
All transforms are unitary (``norm="ortho"``). A block of ``n_active`` symbols
is spread with a forward DFT, placed on FFT bins ``offset .. offset+n_active-1``
and brought to the time domain with an inverse FFT of size ``n_fft``. With
unit-energy constellations the time-domain average power is therefore
``n_active / n_fft`` (the occupancy factor), and white noise of per-sample
variance ``sigma2`` shows up with the same variance on every demodulated
symbol.

Gray table
----------
For ``m`` bits per symbol the first ``m/2`` bits select the in-phase level
and the last ``m/2`` the quadrature level. Each half is Gray-decoded to an
integer ``n`` and mapped to the PAM amplitude ``(M - 1) - 2n`` with
``M = 2**(m/2)``; the point is scaled to unit average energy. For QPSK this
gives ``00 -> (1+j)/sqrt(2)``, ``01 -> (1-j)/sqrt(2)``, ``10 -> (-1+j)/sqrt(2)``,
``11 -> (-1-j)/sqrt(2)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

MOD_ORDERS = (2, 4, 6, 8)


@dataclass(frozen=True)
class FrameConfig:
    """Dimensions of one DFT-s-OFDM frame.

    Defaults follow the sub-THz numerology used throughout the package:
    2048-point IFFT, 1024 active carriers, 1966.08 MHz sampling (960 kHz
    subcarrier spacing).
    """

    n_fft: int = 2048
    n_active: int = 1024
    cp_len: int = 0
    n_symbols: int = 10
    mod_order: int = 4
    fs: float = 1966.08e6
    offset: int = 0

    def __post_init__(self):
        if not 0 < self.n_active < self.n_fft:
            raise ValueError(f"need 0 < n_active < n_fft, got n_active={self.n_active}, n_fft={self.n_fft}")
        if self.mod_order not in MOD_ORDERS:
            raise ValueError(f"mod_order must be one of {MOD_ORDERS}, got {self.mod_order}")
        if self.cp_len < 0 or self.n_symbols < 1:
            raise ValueError("cp_len must be >= 0 and n_symbols >= 1")
        if not 0 <= self.offset <= self.n_fft - self.n_active:
            raise ValueError("subcarrier offset places the block outside the FFT")

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.cp_len

    @property
    def frame_len(self) -> int:
        return self.n_symbols * self.symbol_len

    @property
    def occupancy(self) -> float:
        return self.n_active / self.n_fft

    def to_dict(self) -> dict:
        return asdict(self)


# -- QAM ---------------------------------------------------------------------

def _gray_decode(g: np.ndarray) -> np.ndarray:
    n = g.copy()
    shift = g >> 1
    while np.any(shift):
        n ^= shift
        shift >>= 1
    return n


@lru_cache(maxsize=None)
def _pam_levels(bits_per_axis: int) -> tuple[np.ndarray, float]:
    m = 1 << bits_per_axis
    levels = (m - 1) - 2.0 * np.arange(m)
    scale = np.sqrt(2.0 * (m * m - 1) / 3.0)
    return levels, scale


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return (bits.astype(np.int64) * weights).sum(axis=-1)


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def constellation(mod_order: int) -> np.ndarray:
    """All ``2**mod_order`` points, indexed by the integer value of their bit label."""
    labels = np.arange(1 << mod_order)
    return qam_map(_int_to_bits(labels, mod_order).ravel(), mod_order)


def qam_map(bits, mod_order: int) -> np.ndarray:
    """Map a bit sequence onto unit-energy Gray-coded square QAM symbols."""
    if mod_order not in MOD_ORDERS:
        raise ValueError(f"mod_order must be one of {MOD_ORDERS}")
    bits = np.asarray(bits)
    if bits.size % mod_order:
        raise ValueError(f"bit count {bits.size} is not a multiple of {mod_order}")
    half = mod_order // 2
    groups = bits.reshape(-1, mod_order)
    levels, scale = _pam_levels(half)
    i_idx = _gray_decode(_bits_to_int(groups[:, :half]))
    q_idx = _gray_decode(_bits_to_int(groups[:, half:]))
    return (levels[i_idx] + 1j * levels[q_idx]) / scale


def qam_demap_hard(symbols, mod_order: int) -> np.ndarray:
    """Minimum-distance hard decisions followed by Gray de-mapping."""
    if mod_order not in MOD_ORDERS:
        raise ValueError(f"mod_order must be one of {MOD_ORDERS}")
    half = mod_order // 2
    m = 1 << half
    _, scale = _pam_levels(half)
    y = np.asarray(symbols, dtype=complex).ravel()

    def axis_index(v):
        # level (m-1) - 2n  ->  n; square grid makes per-axis slicing exact
        v = np.clip(np.nan_to_num(v, nan=0.0), -1e6, 1e6) * scale
        n = np.rint(((m - 1) - v) / 2.0)
        return np.clip(n, 0, m - 1).astype(np.int64)

    i_n = axis_index(y.real)
    q_n = axis_index(y.imag)
    gray_i = i_n ^ (i_n >> 1)
    gray_q = q_n ^ (q_n >> 1)
    bits = np.concatenate([_int_to_bits(gray_i, half), _int_to_bits(gray_q, half)], axis=1)
    return bits.ravel()


def random_bits(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


# -- DFT-s-OFDM --------------------------------------------------------------

def modulate(blocks, cfg: FrameConfig) -> np.ndarray:
    """Transmit chain for one or more symbol blocks.

    Parameters
    ----------
    blocks : array_like, shape (n_active,) or (n_sym, n_active)
        QAM symbols (PTRS already inserted).
    cfg : FrameConfig

    Returns
    -------
    np.ndarray
        Concatenated time-domain samples, ``n_sym * (n_fft + cp_len)`` long.
    """
    x = np.atleast_2d(np.asarray(blocks, dtype=complex))
    if x.shape[-1] != cfg.n_active:
        raise ValueError(f"block length {x.shape[-1]} != n_active {cfg.n_active}")
    spread = np.fft.fft(x, axis=-1, norm="ortho")
    grid = np.zeros((x.shape[0], cfg.n_fft), dtype=complex)
    grid[:, cfg.offset:cfg.offset + cfg.n_active] = spread
    body = np.fft.ifft(grid, axis=-1, norm="ortho")
    if cfg.cp_len:
        body = np.concatenate([body[:, -cfg.cp_len:], body], axis=1)
    return body.ravel()


def demodulate(signal, cfg: FrameConfig) -> np.ndarray:
    """Receive chain: CP removal, FFT, bin extraction, inverse DFT.

    Returns an ``(n_sym, n_active)`` array of received symbols ``r``.
    """
    y = np.asarray(signal, dtype=complex)
    if y.ndim != 1 or y.size % cfg.symbol_len:
        raise ValueError(f"signal length {y.size} is not a multiple of the symbol length {cfg.symbol_len}")
    body = y.reshape(-1, cfg.symbol_len)[:, cfg.cp_len:]
    grid = np.fft.fft(body, axis=-1, norm="ortho")
    return np.fft.ifft(grid[:, cfg.offset:cfg.offset + cfg.n_active], axis=-1, norm="ortho")

