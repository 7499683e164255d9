"""PTRS patterns, pilot values and the pilot sampling matrix.

Pilots live in the pre-DFT domain, one pattern per DFT-s-OFDM symbol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PatternError(ValueError):
    """Invalid PTRS pattern parameters."""


@dataclass(frozen=True)
class PtrsPattern:
    kind: str  # "distributed" or "contiguous"
    chi_p: np.ndarray
    n_active: int
    l_spacing: int | None = None
    n_groups: int | None = None
    group_size: int | None = None

    @property
    def k(self) -> int:
        return int(self.chi_p.size)

    @property
    def is_contiguous(self) -> bool:
        return self.kind == "contiguous"

    def data_mask(self) -> np.ndarray:
        mask = np.ones(self.n_active, dtype=bool)
        mask[self.chi_p] = False
        return mask

    def label(self) -> str:
        if self.is_contiguous:
            return f"contiguous(ng={self.n_groups},ns={self.group_size})"
        return f"distributed(l={self.l_spacing})"

    def to_dict(self) -> dict:
        if self.is_contiguous:
            return {"type": "contiguous", "ng": self.n_groups, "ns": self.group_size}
        return {"type": "distributed", "l": self.l_spacing}

    def __eq__(self, other):
        return (
            isinstance(other, PtrsPattern)
            and self.to_dict() == other.to_dict()
            and self.n_active == other.n_active
        )

    def __hash__(self):
        return hash((self.kind, self.n_active, self.l_spacing, self.n_groups, self.group_size))


def distributed_pattern(n_active: int, l_spacing: int) -> PtrsPattern:
    """Pilots every ``l_spacing`` positions starting at index 0."""
    if l_spacing < 1 or n_active % l_spacing:
        raise PatternError(f"PTRS spacing L={l_spacing} must divide N_a={n_active}")
    chi = np.arange(0, n_active, l_spacing)
    return PtrsPattern("distributed", chi, n_active, l_spacing=l_spacing)


def contiguous_pattern(n_active: int, n_groups: int, group_size: int) -> PtrsPattern:
    """``n_groups`` blocks of ``group_size`` adjacent pilots with evenly spaced starts."""
    if n_groups < 1 or group_size < 1:
        raise PatternError("n_groups and group_size must be >= 1")
    if n_groups * group_size > n_active:
        raise PatternError(f"N_G*N_S={n_groups * group_size} exceeds N_a={n_active}")
    starts = (np.arange(n_groups) * n_active) // n_groups
    ends = np.append(starts[1:], n_active)
    if np.any(starts + group_size > ends):
        raise PatternError(f"group of {group_size} pilots overflows into the next group start")
    chi = (starts[:, None] + np.arange(group_size)).ravel()
    return PtrsPattern("contiguous", chi, n_active, n_groups=n_groups, group_size=group_size)


def pattern_from_dict(d: dict, n_active: int) -> PtrsPattern:
    kind = d.get("type")
    if kind == "distributed":
        return distributed_pattern(n_active, int(d["l"]))
    if kind == "contiguous":
        return contiguous_pattern(n_active, int(d["ng"]), int(d["ns"]))
    raise PatternError(f"unknown PTRS pattern type {kind!r}")


_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def pilot_sequence(k: int, seed=None) -> np.ndarray:
    """``k`` unit-modulus QPSK pilots drawn from a seeded stream."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    return _QPSK[rng.integers(0, 4, size=k)]


def sampling_matrix(pattern: PtrsPattern, n_active: int | None = None) -> np.ndarray:
    """K x N_a 0/1 matrix selecting the pilot positions of a length-N_a vector."""
    n_active = pattern.n_active if n_active is None else n_active
    m = np.zeros((pattern.k, n_active))
    m[np.arange(pattern.k), pattern.chi_p] = 1.0
    return m


def insert_pilots(data, pilots, pattern: PtrsPattern) -> np.ndarray:
    """Build ``(n_sym, N_a)`` blocks from data symbols and a pilot vector.

    ``data`` has shape ``(n_sym, N_a - K)``; the same pilots go into every symbol.
    """
    data = np.atleast_2d(np.asarray(data, dtype=complex))
    blocks = np.empty((data.shape[0], pattern.n_active), dtype=complex)
    blocks[:, pattern.data_mask()] = data
    blocks[:, pattern.chi_p] = pilots
    return blocks


def group_average(values, pattern: PtrsPattern) -> tuple[np.ndarray, np.ndarray]:
    """Average de-rotated pilot observations per contiguous group.

    Parameters
    ----------
    values : array_like, shape (..., K)
        Complex pilot observations ``r_i s_i* / |s_i|^2`` in pattern order.
    pattern : PtrsPattern
        Must be contiguous.

    Returns
    -------
    means : np.ndarray, shape (..., N_G)
    rep_idx : np.ndarray, shape (N_G,)
        Representative index of each group (floor of its mean index).
    """
    if not pattern.is_contiguous:
        raise PatternError("group_average requires a contiguous PTRS pattern")
    v = np.asarray(values)
    shape = v.shape[:-1] + (pattern.n_groups, pattern.group_size)
    means = v.reshape(shape).mean(axis=-1)
    idx = pattern.chi_p.reshape(pattern.n_groups, pattern.group_size)
    rep_idx = np.floor(idx.mean(axis=1)).astype(int)
    return means, rep_idx
