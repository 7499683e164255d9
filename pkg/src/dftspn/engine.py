"""Monte Carlo evaluation of the phase-noise estimators.

Seeding is counter based: the draws of frame ``i`` come from
``(seed, 0, i, stream)`` regardless of estimator, SNR or worker layout.
Different estimators and SNR points at the same seed therefore see identical
phase-noise, data and (unit-variance) noise realizations; only the noise
scale changes with SNR.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channel, estimators, oracle, ptrs, waveform
from ._rng import derive_rng
from .covariance import CovarianceSet, train_covariances
from .pn_model import combine_tx_rx, generate_pn
from .ptrs import PtrsPattern
from .waveform import FrameConfig

ESTIMATORS = ("cpee", "ci", "li", "dct", "if", "genie")


class ConfigError(ValueError):
    """Inconsistent simulation parameters, detected before simulating."""


@dataclass(frozen=True)
class EstimatorSpec:
    name: str
    n_d: int | None = None
    strict_dct: bool = False

    def __post_init__(self):
        if self.name not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.name!r}; choose from {ESTIMATORS}")
        if self.name == "dct" and (self.n_d is None or self.n_d < 1):
            raise ConfigError("the dct estimator needs n_d >= 1")

    @property
    def label(self) -> str:
        return f"dct-{self.n_d}" if self.name == "dct" else self.name

    @classmethod
    def parse(cls, obj) -> "EstimatorSpec":
        if isinstance(obj, EstimatorSpec):
            return obj
        if isinstance(obj, str):
            if obj.startswith("dct-"):
                return cls("dct", n_d=int(obj[4:]))
            return cls(obj)
        return cls(obj["name"], n_d=obj.get("n_d"), strict_dct=bool(obj.get("strict", False)))


@dataclass
class TrialMetrics:
    ber: float
    ser: float
    phase_mse: float
    evm: float
    n_bits: int
    n_bit_errors: int
    n_symbols: int
    n_symbol_errors: int
    n_frames: int

    @property
    def ber_stderr(self) -> float:
        if self.n_bits == 0:
            return math.nan
        return math.sqrt(max(self.ber * (1 - self.ber), 0.0) / self.n_bits)


def check_compatible(cfg: FrameConfig, pattern: PtrsPattern, est: EstimatorSpec) -> None:
    if pattern.n_active != cfg.n_active:
        raise ConfigError(f"pattern built for N_a={pattern.n_active}, frame has N_a={cfg.n_active}")
    if pattern.k >= cfg.n_active:
        raise ConfigError("pattern leaves no data positions")
    if est.name == "dct" and est.n_d > pattern.k:
        raise ConfigError(f"dct with N_D={est.n_d} needs N_D <= K, but the pattern has K={pattern.k} pilots")


class PhaseTracker:
    """An estimator bound to a frame layout, pilot set and noise level."""

    def __init__(self, cfg: FrameConfig, pattern: PtrsPattern, pilots, est: EstimatorSpec,
                 sigma2: float = 0.0, cov: CovarianceSet | None = None):
        check_compatible(cfg, pattern, est)
        self.cfg, self.pattern, self.est = cfg, pattern, est
        self.pilots = np.asarray(pilots, dtype=complex)
        self.grouped = pattern.is_contiguous and est.name in ("cpee", "ci", "li")
        if est.name == "dct":
            self.basis = estimators.build_dct_basis(cfg.n_active, pattern.chi_p, est.n_d)
        if est.name == "if":
            if cov is None:
                raise ConfigError("the if estimator needs a covariance set")
            m_p = ptrs.sampling_matrix(pattern)
            s_p = self.pilots.conj() / np.abs(self.pilots) ** 2
            self.z = estimators.build_if_filter(cov.with_noise(sigma2), m_p, s_p)

    def estimate(self, r: np.ndarray, phi_true: np.ndarray | None = None) -> np.ndarray:
        """Phase estimate of shape ``(n_sym, N_a)`` for received blocks ``r``."""
        name, na = self.est.name, self.cfg.n_active
        if name == "genie":
            return phi_true
        obs = estimators.observe_pilots(r, self.pattern, self.pilots)
        if self.grouped:
            means, rep = ptrs.group_average(obs.a_p, self.pattern)
            obs = estimators.PilotObservation(means, rep, obs.s_p)
        if name == "cpee":
            return np.repeat(estimators.cpee_estimate(obs)[..., None], na, axis=-1)
        if name == "ci":
            return estimators.ci_estimate(obs, na, extend_head=self.grouped)
        if name == "li":
            return estimators.li_estimate(obs, na)
        if name == "dct":
            r_p = np.asarray(r)[..., self.pattern.chi_p]
            return estimators.dct_estimate(obs, self.basis, r_p=r_p, strict=self.est.strict_dct)
        return estimators.if_estimate(self.z, obs)


@dataclass
class Frame:
    bits: np.ndarray        # (n_sym, n_data * mod_order)
    blocks: np.ndarray      # (n_sym, N_a) transmitted symbols
    rx_clean: np.ndarray    # time-domain samples after phase noise
    noise: np.ndarray       # unit-variance complex noise, same length
    phi_prime: np.ndarray   # (n_sym, N_a) true rotation phases


def make_frame(cfg: FrameConfig, source, pattern: PtrsPattern, pilots, seed: int, index: int) -> Frame:
    n = cfg.frame_len
    tx_pn = generate_pn(source, n, cfg.fs, derive_rng(seed, 0, index, 0))
    rx_pn = generate_pn(source, n, cfg.fs, derive_rng(seed, 0, index, 1))
    phi = combine_tx_rx(tx_pn, rx_pn)
    n_data = cfg.n_active - pattern.k
    bits = waveform.random_bits(cfg.n_symbols * n_data * cfg.mod_order, derive_rng(seed, 0, index, 2))
    data = waveform.qam_map(bits, cfg.mod_order).reshape(cfg.n_symbols, n_data)
    blocks = ptrs.insert_pilots(data, pilots, pattern)
    rx_clean = channel.apply_phase_noise(waveform.modulate(blocks, cfg), phi)
    noise = channel.complex_gaussian(n, derive_rng(seed, 0, index, 3))
    alpha = oracle.alpha_fast(oracle.symbol_phases(phi, cfg), cfg)
    return Frame(bits.reshape(cfg.n_symbols, -1), blocks, rx_clean, noise, np.angle(alpha))


def _default_pilots(pattern: PtrsPattern, seed: int) -> np.ndarray:
    return ptrs.pilot_sequence(pattern.k, derive_rng(seed, 2, 0))


def train_for(cfg, source, pattern, pilots, seed: int, n_frames: int = 200, workers: int = 1) -> CovarianceSet:
    """Covariance set for the IF estimator; seed namespace separate from simulation."""
    return train_covariances(cfg, source, pattern, n_frames=n_frames, seed=seed, pilots=pilots, workers=workers)


def run_point(
    cfg: FrameConfig,
    source,
    pattern: PtrsPattern,
    estimator,
    snr_db: float,
    n_frames: int,
    seed: int = 0,
    *,
    pilots=None,
    cov: CovarianceSet | None = None,
    min_errors: int | None = None,
    min_frames: int = 1,
    train_frames: int = 200,
) -> TrialMetrics:
    """Simulate one operating point.

    Frames are processed in order until ``n_frames`` (the cap) is reached,
    or earlier once ``min_errors`` bit errors have been counted and at least
    ``min_frames`` frames were run. Error statistics only cover data
    positions; ``phase_mse`` averages ``|exp(j*phi_hat) - exp(j*phi')|^2``
    over all ``N_a`` positions.
    """
    est = EstimatorSpec.parse(estimator)
    check_compatible(cfg, pattern, est)
    if pilots is None:
        pilots = _default_pilots(pattern, seed)
    if est.name == "if" and cov is None:
        cov = train_for(cfg, source, pattern, pilots, seed, train_frames)
    sigma2 = channel.noise_variance(snr_db)
    tracker = PhaseTracker(cfg, pattern, pilots, est, sigma2, cov)
    data_mask = pattern.data_mask()
    sigma = math.sqrt(sigma2)

    bit_err = sym_err = n_bits = n_syms = 0
    mse_sum = evm_num = evm_den = 0.0
    frames_run = 0
    for i in range(n_frames):
        fr = make_frame(cfg, source, pattern, pilots, seed, i)
        r = waveform.demodulate(fr.rx_clean + sigma * fr.noise, cfg)
        phi_hat = tracker.estimate(r, fr.phi_prime)
        s_hat = estimators.correct(r, phi_hat)[:, data_mask]
        rx_bits = waveform.qam_demap_hard(s_hat, cfg.mod_order).reshape(fr.bits.shape)
        wrong = rx_bits != fr.bits
        bit_err += int(wrong.sum())
        sym_err += int(wrong.reshape(cfg.n_symbols, -1, cfg.mod_order).any(axis=-1).sum())
        n_bits += wrong.size
        n_syms += s_hat.size
        mse_sum += float(np.sum(np.abs(np.exp(1j * phi_hat) - np.exp(1j * fr.phi_prime)) ** 2))
        s_tx = fr.blocks[:, data_mask]
        evm_num += float(np.sum(np.abs(s_hat - s_tx) ** 2))
        evm_den += float(np.sum(np.abs(s_tx) ** 2))
        frames_run += 1
        if min_errors is not None and bit_err >= min_errors and frames_run >= min_frames:
            break
    return TrialMetrics(
        ber=bit_err / n_bits,
        ser=sym_err / n_syms,
        phase_mse=mse_sum / (frames_run * cfg.n_symbols * cfg.n_active),
        evm=math.sqrt(evm_num / evm_den),
        n_bits=n_bits,
        n_bit_errors=bit_err,
        n_symbols=n_syms,
        n_symbol_errors=sym_err,
        n_frames=frames_run,
    )


# -- sweeps -------------------------------------------------------------------

CSV_COLUMNS = (
    "estimator", "pattern", "l", "ng", "ns", "k", "snr_db",
    "ber", "ser", "phase_mse", "evm",
    "n_bits", "n_bit_errors", "n_symbols", "n_symbol_errors", "n_frames", "seed",
)


@dataclass
class SweepRow:
    estimator: str
    pattern: PtrsPattern
    snr_db: float
    metrics: TrialMetrics
    seed: int
    runtime_s: float = 0.0

    def as_record(self) -> dict:
        pd = self.pattern.to_dict()
        rec = {
            "estimator": self.estimator,
            "pattern": pd["type"],
            "l": pd.get("l", ""),
            "ng": pd.get("ng", ""),
            "ns": pd.get("ns", ""),
            "k": self.pattern.k,
            "snr_db": self.snr_db,
            "seed": self.seed,
        }
        rec.update({k: v for k, v in asdict(self.metrics).items()})
        return rec


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def to_csv(self) -> str:
        """CSV text with the fixed column order of :data:`CSV_COLUMNS`; floats use ``repr``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            rec = row.as_record()
            w.writerow([repr(v) if isinstance(v, float) else v for v in (rec[c] for c in CSV_COLUMNS)])
        return buf.getvalue()

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()


def read_sweep_csv(text: str) -> list[dict]:
    """Parse a sweep CSV back into typed records."""
    ints = {"k", "n_bits", "n_bit_errors", "n_symbols", "n_symbol_errors", "n_frames", "seed"}
    floats = {"snr_db", "ber", "ser", "phase_mse", "evm"}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        for key in ("l", "ng", "ns"):
            rec[key] = int(rec[key]) if rec[key] != "" else None
        for key in ints:
            rec[key] = int(rec[key])
        for key in floats:
            rec[key] = float(rec[key])
        out.append(rec)
    return out


def _run_job(job):
    (cfg, source, pattern, est, snr, n_frames, seed, pilots, cov, min_errors, min_frames) = job
    t0 = time.perf_counter()
    m = run_point(cfg, source, pattern, est, snr, n_frames, seed, pilots=pilots, cov=cov,
                  min_errors=min_errors, min_frames=min_frames)
    return m, time.perf_counter() - t0


def sweep(
    cfg: FrameConfig,
    source,
    patterns,
    estimator_list,
    snr_grid,
    n_frames: int,
    seed: int = 0,
    *,
    min_errors: int | None = None,
    min_frames: int = 1,
    train_frames: int = 200,
    covs: dict | None = None,
    workers: int = 1,
) -> SweepResult:
    """Cartesian product pattern x estimator x SNR, rows in that nesting order.

    Compatibility of every combination is checked before simulating. IF
    covariances are trained once per pattern in the calling process (or
    taken from ``covs`` keyed by pattern) and shared with the workers.
    """
    patterns = list(patterns)
    ests = [EstimatorSpec.parse(e) for e in estimator_list]
    snrs = [float(s) for s in snr_grid]
    if not (patterns and ests and snrs):
        raise ConfigError("patterns, estimators and SNR grid must be non-empty")
    for p in patterns:
        for e in ests:
            check_compatible(cfg, p, e)
    jobs, keys = [], []
    covs = dict(covs or {})
    for p in patterns:
        pilots = _default_pilots(p, seed)
        if any(e.name == "if" for e in ests) and p not in covs:
            covs[p] = train_for(cfg, source, p, pilots, seed, train_frames)
        for e in ests:
            for s in snrs:
                cov = covs.get(p) if e.name == "if" else None
                jobs.append((cfg, source, p, e, s, n_frames, seed, pilots, cov, min_errors, min_frames))
                keys.append((e.label, p, s))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    rows = [SweepRow(lbl, p, s, m, seed, rt) for (lbl, p, s), (m, rt) in zip(keys, results)]
    return SweepResult(rows)


# -- SNR search ----------------------------------------------------------------------

@dataclass
class TargetSearch:
    snr_db: float | None
    reachable: bool
    bracket: tuple[float, float]
    evaluations: list[tuple[float, float, int]]  # (snr_db, ber, n_bit_errors)


def snr_for_target_ber(
    cfg: FrameConfig,
    source,
    pattern: PtrsPattern,
    estimator,
    target_ber: float,
    seed: int = 0,
    *,
    snr_lo: float = 0.0,
    snr_cap: float = 40.0,
    resolution_db: float = 0.1,
    min_errors: int = 100,
    min_frames: int = 10,
    max_bits: int | None = None,
    pilots=None,
    cov: CovarianceSet | None = None,
    train_frames: int = 200,
) -> TargetSearch:
    """Bisection for the lowest SNR whose BER is at or below ``target_ber``.

    Every evaluation runs until ``min_errors`` bit errors (and at least
    ``min_frames`` frames) or until ``max_bits`` bits, by default
    ``100 / target_ber``, i.e. about 100 expected errors at the target.
    All evaluations share the same seed, so BER is compared on common
    realizations. Returns ``reachable=False`` when the BER at ``snr_cap``
    is still above target.
    """
    if not 0 < target_ber < 0.5:
        raise ValueError("target_ber must lie in (0, 0.5)")
    est = EstimatorSpec.parse(estimator)
    check_compatible(cfg, pattern, est)
    if pilots is None:
        pilots = _default_pilots(pattern, seed)
    if est.name == "if" and cov is None:
        cov = train_for(cfg, source, pattern, pilots, seed, train_frames)
    bits_per_frame = cfg.n_symbols * (cfg.n_active - pattern.k) * cfg.mod_order
    max_bits = max_bits or int(math.ceil(100.0 / target_ber))
    cap_frames = max(min_frames, int(math.ceil(max_bits / bits_per_frame)))
    evals: list[tuple[float, float, int]] = []

    def ber_at(snr: float) -> float:
        m = run_point(cfg, source, pattern, est, snr, cap_frames, seed, pilots=pilots, cov=cov,
                      min_errors=min_errors, min_frames=min_frames)
        evals.append((snr, m.ber, m.n_bit_errors))
        return m.ber

    if ber_at(snr_cap) > target_ber:
        return TargetSearch(None, False, (snr_cap, snr_cap), evals)
    lo, hi = snr_lo, snr_cap
    if ber_at(lo) <= target_ber:
        return TargetSearch(lo, True, (lo, lo), evals)
    while hi - lo > resolution_db:
        mid = 0.5 * (lo + hi)
        if ber_at(mid) <= target_ber:
            hi = mid
        else:
            lo = mid
    return TargetSearch(hi, True, (lo, hi), evals)


def manifest(config: dict, result: SweepResult, seed: int) -> dict:
    """Run manifest: config echo, seed, CSV content hash and per-row runtimes."""
    from . import __version__

    return {
        "package": "dftspn",
        "version": __version__,
        "seed": seed,
        "config": config,
        "csv_sha256": result.content_hash(),
        "rows": len(result.rows),
        "runtime_s": [round(r.runtime_s, 6) for r in result.rows],
    }


def dumps_manifest(m: dict) -> str:
    return json.dumps(m, indent=2, sort_keys=True) + "\n"
