"""Second-order statistics for the interpolation filter.

:func:`train_covariances` estimates the raw correlation matrices
``R_phi = E[Phi' Phi'^H]`` (``Phi'_k = exp(j*arg(alpha_k))``) and
``R_beta = E[beta beta^H]`` by simulating noiseless frames and reading the
exact rotation/ICI terms from :mod:`dftspn.oracle`. Thermal noise is not part
of training; ``R_w = sigma2 * I`` is attached analytically and can be
swapped per SNR with :meth:`CovarianceSet.with_noise`.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import oracle, ptrs, waveform
from ._rng import derive_rng
from .pn_model import PsdSpec, WienerSpec, combine_tx_rx, generate_pn, psd_to_dict
from .waveform import FrameConfig

# frames per accumulation block; fixed so the reduction order never depends on workers
_BLOCK = 16


class CovarianceValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CovarianceSet:
    r_phi: np.ndarray
    r_beta: np.ndarray
    r_w: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_active(self) -> int:
        return self.r_phi.shape[0]

    def with_noise(self, sigma2: float) -> "CovarianceSet":
        return replace(self, r_w=rw_model(sigma2, self.n_active), meta={**self.meta, "sigma2": sigma2})

    def validate(self) -> None:
        for name in ("r_phi", "r_beta", "r_w"):
            validate_matrix(name, getattr(self, name))


def rw_model(sigma2: float, n_active: int) -> np.ndarray:
    """White-noise correlation ``sigma2 * I``."""
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    return sigma2 * np.eye(n_active, dtype=complex)


def validate_matrix(name: str, m: np.ndarray) -> None:
    """Raise unless ``m`` is Hermitian (1e-10) and PSD (eigs >= -1e-8 * trace/N)."""
    n = m.shape[0]
    if m.shape != (n, n):
        raise CovarianceValidationError(f"{name} is not square")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if np.max(np.abs(m - m.conj().T)) > 1e-10 * scale:
        raise CovarianceValidationError(f"{name} is not Hermitian")
    tr = float(np.real(np.trace(m)))
    eig_min = float(np.linalg.eigvalsh(m)[0])
    if eig_min < -1e-8 * max(tr, 0.0) / n - 1e-300:
        raise CovarianceValidationError(f"{name} is not positive semidefinite (min eigenvalue {eig_min:.3g})")


def training_frame(cfg: FrameConfig, source, pattern, pilots, seed: int, frame: int):
    """Per-symbol rotation/ICI terms of one noiseless training frame.

    Returns ``(Phi', beta)``, both ``(n_symbols, n_active)``.
    """
    # stream namespace 1 keeps training draws disjoint from simulation draws
    rng_tx = derive_rng(seed, 1, frame, 0)
    rng_rx = derive_rng(seed, 1, frame, 1)
    rng_data = derive_rng(seed, 1, frame, 2)
    n = cfg.frame_len
    phi = combine_tx_rx(generate_pn(source, n, cfg.fs, rng_tx), generate_pn(source, n, cfg.fs, rng_rx))
    n_data = cfg.n_active - pattern.k
    bits = waveform.random_bits(cfg.n_symbols * n_data * cfg.mod_order, rng_data)
    data = waveform.qam_map(bits, cfg.mod_order).reshape(cfg.n_symbols, n_data)
    blocks = ptrs.insert_pilots(data, pilots, pattern)
    dec = oracle.decompose(oracle.symbol_phases(phi, cfg), blocks, cfg)
    return np.exp(1j * np.angle(dec.alpha)), dec.beta


def _train_block(args):
    cfg, source, pattern, pilots, seed, frames = args
    na = cfg.n_active
    acc_phi = np.zeros((na, na), dtype=complex)
    acc_beta = np.zeros((na, na), dtype=complex)
    sum_beta = np.zeros(na, dtype=complex)
    for fr in frames:
        phi_p, beta = training_frame(cfg, source, pattern, pilots, seed, fr)
        # sum over symbols of v v^H, v as column vector
        acc_phi += phi_p.T @ phi_p.conj()
        acc_beta += beta.T @ beta.conj()
        sum_beta += beta.sum(axis=0)
    return acc_phi, acc_beta, sum_beta


def _source_id(source) -> str:
    if isinstance(source, WienerSpec):
        return f"wiener({source.step_var!r})"
    return source.name


def _source_dict(source) -> dict:
    if isinstance(source, WienerSpec):
        return {"type": "wiener", "step_var": source.step_var}
    return {"type": "psd", **psd_to_dict(source)}


def train_covariances(
    cfg: FrameConfig,
    source: PsdSpec | WienerSpec,
    pattern,
    n_frames: int = 2000,
    seed: int = 0,
    pilots=None,
    sigma2: float = 0.0,
    workers: int = 1,
) -> CovarianceSet:
    """Monte Carlo estimate of ``R_phi`` and ``R_beta`` over ``n_frames`` frames.

    Each frame uses the same continuous Tx+Rx phase-noise model, random QAM
    data and the given pilots at the pattern positions (pilots default to
    ``pilot_sequence(K, seed)``). Accumulation runs in fixed blocks of frames
    summed in block order, so results do not depend on ``workers``.
    """
    if n_frames < 100:
        raise ValueError("training needs n_frames >= 100")
    if pilots is None:
        pilots = ptrs.pilot_sequence(pattern.k, seed)
    blocks = [range(i, min(i + _BLOCK, n_frames)) for i in range(0, n_frames, _BLOCK)]
    jobs = [(cfg, source, pattern, pilots, seed, b) for b in blocks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_train_block, jobs))
    else:
        parts = [_train_block(j) for j in jobs]
    na = cfg.n_active
    acc_phi = np.zeros((na, na), dtype=complex)
    acc_beta = np.zeros((na, na), dtype=complex)
    sum_beta = np.zeros(na, dtype=complex)
    for p_phi, p_beta, s_beta in parts:
        acc_phi += p_phi
        acc_beta += p_beta
        sum_beta += s_beta
    count = n_frames * cfg.n_symbols
    r_phi = acc_phi / count
    r_beta = acc_beta / count
    r_phi = 0.5 * (r_phi + r_phi.conj().T)
    r_beta = 0.5 * (r_beta + r_beta.conj().T)
    mean_beta = sum_beta / count
    meta = {
        "model_id": _source_id(source),
        "source": _source_dict(source),
        "n_active": na,
        "n_frames": n_frames,
        "n_vectors": count,
        "seed": seed,
        "sigma2": sigma2,
        "pattern": pattern.to_dict(),
        "beta_mean_norm": float(np.linalg.norm(mean_beta)),
        "beta_rms": float(math.sqrt(max(np.real(np.trace(r_beta)), 0.0) / na)),
    }
    return CovarianceSet(r_phi, r_beta, rw_model(sigma2, na), meta)


# -- cache files ---------------------------------------------------------------------

def cache_key(cfg: FrameConfig, source, pattern, n_frames: int, seed: int, pilots) -> str:
    payload = json.dumps(
        {
            "cfg": cfg.to_dict(),
            "source": _source_dict(source),
            "pattern": pattern.to_dict(),
            "n_frames": n_frames,
            "seed": seed,
            "pilots": [[float(p.real), float(p.imag)] for p in np.asarray(pilots)],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _open_text(path: Path, mode: str):
    if path.suffix == ".gz":
        raw = open(path, mode + "b")
        # mtime=0 keeps the bytes reproducible
        gz = gzip.GzipFile(filename="", mode=mode + "b", fileobj=raw, mtime=0)
        return io.TextIOWrapper(gz, encoding="utf-8", newline="\n"), raw
    return open(path, mode, encoding="utf-8", newline="\n"), None


def _write_matrix(fh, name: str, m: np.ndarray) -> None:
    fh.write(f"# matrix {name}\n")
    inter = np.empty((m.shape[0], 2 * m.shape[1]))
    inter[:, 0::2] = m.real
    inter[:, 1::2] = m.imag
    for row in inter:
        fh.write(",".join(repr(float(v)) for v in row))
        fh.write("\n")


def save_covariances(cov: CovarianceSet, path) -> Path:
    """Write ``cov`` as CSV (``.csv`` or gzip-compressed ``.csv.gz``).

    Layout: ``#``-prefixed header lines with the JSON metadata, then for
    ``r_phi`` and ``r_beta`` a ``# matrix <name>`` line followed by
    ``N_a`` rows of interleaved real/imag values. ``r_w`` is rebuilt from
    ``sigma2`` on load.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh, raw = _open_text(path, "w")
    try:
        fh.write("# dftspn covariance set v1\n")
        fh.write("# meta " + json.dumps(cov.meta, sort_keys=True) + "\n")
        _write_matrix(fh, "r_phi", cov.r_phi)
        _write_matrix(fh, "r_beta", cov.r_beta)
    finally:
        fh.close()
        if raw is not None:
            raw.close()
    return path


def load_covariances(path, validate: bool = True) -> CovarianceSet:
    path = Path(path)
    fh, raw = _open_text(path, "r")
    try:
        lines = fh.read().splitlines()
    finally:
        fh.close()
        if raw is not None:
            raw.close()
    if not lines or not lines[0].startswith("# dftspn covariance set"):
        raise CovarianceValidationError(f"{path} is not a covariance cache file")
    meta = json.loads(lines[1][len("# meta "):])
    mats: dict[str, list[str]] = {}
    current = None
    for line in lines[2:]:
        if line.startswith("# matrix "):
            current = line.split()[-1]
            mats[current] = []
        elif line:
            mats[current].append(line)
    out = {}
    for name, rows in mats.items():
        arr = np.array([[float(v) for v in r.split(",")] for r in rows])
        out[name] = arr[:, 0::2] + 1j * arr[:, 1::2]
    cov = CovarianceSet(out["r_phi"], out["r_beta"], rw_model(float(meta["sigma2"]), out["r_phi"].shape[0]), meta)
    if validate:
        cov.validate()
    return cov
