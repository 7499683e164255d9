"""Pilot-based phase-noise estimators for DFT-s-OFDM blocks.

Every estimator maps the pilot observations of one (or a stack of) received
blocks to a length-``N_a`` phase estimate; :func:`correct` then de-rotates
the block. Implemented estimators:

* ``cpee`` - one common phase per block (arg of the pilot sum)
* ``ci``   - piecewise-constant hold between consecutive pilots
* ``li``   - linear interpolation of unwrapped pilot phases
* ``dct``  - least-squares fit of a truncated orthonormal DCT-II basis
* ``if``   - LMMSE interpolation filter built from second-order statistics

Functions accept a single observation (1-D arrays) or a stack with a
leading symbol axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ptrs import PatternError, PtrsPattern


class DegenerateInputError(ValueError):
    """Phase is undefined because a complex quantity is exactly zero."""


class DctConditionError(ValueError):
    """Requested more DCT coefficients than pilots (N_D > K)."""


@dataclass(frozen=True)
class PilotObservation:
    """De-rotated pilots ``a_i = r_i s_i* / |s_i|^2`` at indices ``chi_p``."""

    a_p: np.ndarray
    chi_p: np.ndarray
    s_p: np.ndarray

    @property
    def k(self) -> int:
        return int(self.chi_p.size)


def observe_pilots(r, pattern: PtrsPattern | np.ndarray, pilots) -> PilotObservation:
    """Extract and de-rotate the pilots from received block(s) ``r``."""
    chi = pattern.chi_p if isinstance(pattern, PtrsPattern) else np.asarray(pattern)
    pilots = np.asarray(pilots, dtype=complex)
    s_p = pilots.conj() / np.abs(pilots) ** 2
    r = np.asarray(r, dtype=complex)
    return PilotObservation(r[..., chi] * s_p, chi, s_p)


def _angle_checked(z: np.ndarray) -> np.ndarray:
    if np.any(z == 0):
        raise DegenerateInputError("phase of an exactly-zero complex value is undefined")
    return np.angle(z)


def cpee_estimate(obs: PilotObservation) -> np.ndarray:
    """Common phase: ``arg(sum_i a_i)``; scalar (or one value per stacked block)."""
    return _angle_checked(obs.a_p.sum(axis=-1))


def ci_estimate(obs: PilotObservation, n_active: int, extend_head: bool = False) -> np.ndarray:
    """Hold each pilot phase until the next pilot index.

    The first pilot must sit at index 0; with ``extend_head`` the first value
    is also used for the positions before it (needed for group-averaged
    observations whose representative index is a group center).
    """
    chi = obs.chi_p
    if chi[0] != 0 and not extend_head:
        raise PatternError("constant interpolation needs a pilot at index 0")
    phases = np.angle(obs.a_p)
    seg = np.searchsorted(chi, np.arange(n_active), side="right") - 1
    return phases[..., np.maximum(seg, 0)]


def _unwrap(ph: np.ndarray) -> np.ndarray:
    # numpy's unwrap keeps successive differences in [-pi, pi]
    return np.unwrap(ph, axis=-1)


def li_estimate(obs: PilotObservation, n_active: int) -> np.ndarray:
    """Piecewise-linear interpolation through unwrapped pilot phases.

    Positions before the first or after the last pilot follow the slope of
    the nearest segment. A single pilot falls back to a constant.
    """
    chi = obs.chi_p.astype(float)
    ph = _unwrap(np.angle(obs.a_p))
    n = np.arange(n_active, dtype=float)
    if chi.size == 1:
        return np.broadcast_to(ph[..., :1], ph.shape[:-1] + (n_active,)).copy()
    seg = np.clip(np.searchsorted(chi, n, side="right") - 1, 0, chi.size - 2)
    x0, x1 = chi[seg], chi[seg + 1]
    y0, y1 = ph[..., seg], ph[..., seg + 1]
    return y0 + (y1 - y0) * (n - x0) / (x1 - x0)


# -- DCT -------------------------------------------------------------------------

@dataclass(frozen=True)
class DctBasis:
    psi_na: np.ndarray  # (N_a, N_D)
    psi_k: np.ndarray   # (K, N_D) rows of psi_na at the pilot indices

    @property
    def n_d(self) -> int:
        return self.psi_na.shape[1]


def dct_basis_matrix(n: int, n_d: int) -> np.ndarray:
    """Orthonormal DCT-II basis vectors as columns, shape ``(n, n_d)``."""
    k = np.arange(n)[:, None]
    order = np.arange(n_d)[None, :]
    psi = np.sqrt(2.0 / n) * np.cos(np.pi * order * (2 * k + 1) / (2 * n))
    psi[:, 0] /= np.sqrt(2.0)
    return psi


def build_dct_basis(n_active: int, chi_p, n_d: int) -> DctBasis:
    chi_p = np.asarray(chi_p)
    if n_d < 1:
        raise ValueError("n_d must be >= 1")
    if n_d > chi_p.size:
        raise DctConditionError(
            f"N_D={n_d} exceeds the pilot count K={chi_p.size}; the DCT fit requires N_D <= K"
        )
    psi = dct_basis_matrix(n_active, n_d)
    return DctBasis(psi, psi[chi_p])


def dct_estimate(obs: PilotObservation, basis: DctBasis, r_p=None, strict: bool = False) -> np.ndarray:
    """DCT fit of the residual pilot phase around the average phase.

    The average phase is ``arg(sum a_i)`` by default. With ``strict=True``
    it is ``arg(sum r_i)`` computed from the raw received pilots ``r_p``,
    which only coincides with the default when all pilots are equal.
    """
    if basis.psi_k.shape[0] != obs.k:
        raise ValueError("basis was built for a different pilot set")
    if strict:
        if r_p is None:
            raise ValueError("strict mode needs the raw received pilots r_p")
        phi_av = _angle_checked(np.asarray(r_p).sum(axis=-1))
    else:
        phi_av = _angle_checked(obs.a_p.sum(axis=-1))
    resid = np.angle(obs.a_p * np.exp(-1j * np.asarray(phi_av))[..., None])
    normal = basis.psi_k.T @ basis.psi_k
    cond = np.linalg.cond(normal)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(f"DCT normal matrix is singular (condition number {cond:.3g})")
    x = np.linalg.solve(normal, basis.psi_k.T @ np.moveaxis(resid, -1, 0))
    fit = np.moveaxis(basis.psi_na @ x, 0, -1)
    return np.asarray(phi_av)[..., None] + fit


# -- interpolation filter ----------------------------------------------------------

RIDGE_EPS = 1e-10
RIDGE_COND = 1e12


def _check_hermitian(name: str, m: np.ndarray, tol: float = 1e-8) -> None:
    scale = max(np.max(np.abs(m)), 1.0)
    if np.max(np.abs(m - m.conj().T)) > tol * scale:
        raise ValueError(f"{name} is not Hermitian")


def if_system(r_phi, r_beta, r_w, m_p, s_p) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A, C)`` with ``A = P + Q + V`` (K x K) and ``C = M_p R_phi`` (K x N_a).

    ``Q`` and ``V`` weight the projected ICI/noise correlations with the
    pilot outer product ``s_p[i] * conj(s_p[j])``.
    """
    m_p = np.asarray(m_p)
    s_p = np.asarray(s_p, dtype=complex)
    outer = np.outer(s_p, s_p.conj())
    p = m_p @ r_phi.conj().T @ m_p.T
    q = (m_p @ r_beta.conj().T @ m_p.T) * outer
    v = (m_p @ r_w.conj().T @ m_p.T) * outer
    return p + q + v, m_p @ r_phi


def build_if_filter(cov, m_p, s_p) -> np.ndarray:
    """LMMSE interpolation filter ``Z = R_phi^H M_p^H A^+`` of shape ``(N_a, K)``.

    ``cov`` is anything exposing ``r_phi``, ``r_beta`` and ``r_w`` (normally a
    :class:`~dftspn.covariance.CovarianceSet`). ``A^+`` equals
    ``(A^H A)^-1 A^H``, evaluated as a linear solve against ``A``. When
    ``cond(A) > 1e12`` a ridge ``1e-10 * trace(A)/K * I`` is added first.
    """
    r_phi, r_beta, r_w = (np.asarray(x, dtype=complex) for x in (cov.r_phi, cov.r_beta, cov.r_w))
    for name, m in (("R_phi", r_phi), ("R_beta", r_beta), ("R_w", r_w)):
        _check_hermitian(name, m)
    a, _ = if_system(r_phi, r_beta, r_w, m_p, s_p)
    k = a.shape[0]
    if np.linalg.cond(a) > RIDGE_COND:
        a = a + RIDGE_EPS * np.real(np.trace(a)) / k * np.eye(k)
    rhs = np.asarray(m_p) @ r_phi              # (K, N_a) = (R_phi^H M_p^H)^H
    # Z = rhs^H A^{-1}  <=>  Z^H = A^{-H} rhs
    return np.linalg.solve(a.conj().T, rhs).conj().T


def if_estimate(z: np.ndarray, obs: PilotObservation) -> np.ndarray:
    """Phase of the filtered pilot vector ``Z a_p``."""
    return _angle_checked(obs.a_p @ z.T)


def correct(r, phi_hat) -> np.ndarray:
    """De-rotate received symbols: ``r * exp(-j * phi_hat)`` (scalars broadcast)."""
    phi_hat = np.asarray(phi_hat, dtype=float)
    r = np.asarray(r, dtype=complex)
    if phi_hat.ndim == r.ndim - 1:
        phi_hat = phi_hat[..., None]
    return r * np.exp(-1j * phi_hat)
