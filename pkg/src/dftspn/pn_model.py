"""Oscillator phase-noise models and discrete-time trace generation.

The PSD follows the multi pole-zero family used for 3GPP oscillator models::

    S(f) = S0 * prod_n [1 + (f / fz_n) ** az_n] / prod_m [1 + (f / fp_m) ** ap_m]

``S0`` is expressed in dBc/Hz and already includes any carrier scaling (see
:func:`carrier_scale`). Values returned by :func:`psd_eval` are single-sideband
levels L(f); the generated phase trace has two-sided PSD equal to L(|f|) in
rad^2/Hz.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class PsdSpec:
    """Parametric phase-noise PSD.

    ``zeros`` and ``poles`` hold ``(corner_hz, exponent)`` pairs. ``psd0`` is
    the level at ``f_carrier``; ``f_carrier_ref`` is the carrier the model
    was originally specified for. ``psd0 = -inf`` disables phase noise.
    """

    psd0: float
    zeros: tuple[tuple[float, float], ...] = ()
    poles: tuple[tuple[float, float], ...] = ()
    f_carrier_ref: float = 30e9
    f_carrier: float | None = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "zeros", tuple((float(f), float(a)) for f, a in self.zeros))
        object.__setattr__(self, "poles", tuple((float(f), float(a)) for f, a in self.poles))
        if self.f_carrier is None:
            object.__setattr__(self, "f_carrier", float(self.f_carrier_ref))
        for f, a in self.zeros + self.poles:
            if not (f > 0 and a > 0):
                raise ValueError(f"corner frequency and exponent must be positive, got ({f}, {a})")
        if self.f_carrier_ref <= 0 or self.f_carrier <= 0:
            raise ValueError("carrier frequencies must be positive")

    @property
    def is_off(self) -> bool:
        return self.psd0 == -math.inf


#: Spec that produces identically zero phase noise.
NO_PHASE_NOISE = PsdSpec(psd0=-math.inf, name="off")


@dataclass(frozen=True)
class PnTrace:
    """Real-valued phase trajectory in radians sampled at ``fs``."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if np.iscomplexobj(samples):
            raise TypeError("phase samples must be real")
        object.__setattr__(self, "samples", samples.astype(float, copy=False))

    def __len__(self) -> int:
        return self.samples.shape[0]


def _linear_shape(spec: PsdSpec, f: np.ndarray) -> np.ndarray:
    num = np.ones_like(f)
    den = np.ones_like(f)
    for fz, az in spec.zeros:
        num = num * (1.0 + (f / fz) ** az)
    for fp, ap in spec.poles:
        den = den * (1.0 + (f / fp) ** ap)
    return num / den


def psd_eval(spec: PsdSpec, f):
    """Evaluate the PSD in dBc/Hz at offset frequency ``f`` (Hz, > 0)."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr <= 0):
        raise ValueError("PSD is only defined for f > 0")
    out = spec.psd0 + 10.0 * np.log10(_linear_shape(spec, f_arr))
    return float(out) if out.ndim == 0 else out


def psd_linear(spec: PsdSpec, f) -> np.ndarray:
    """Linear PSD in rad^2/Hz; zero everywhere when the PSD is switched off."""
    f_arr = np.asarray(f, dtype=float)
    if spec.is_off:
        return np.zeros_like(f_arr)
    return 10.0 ** (spec.psd0 / 10.0) * _linear_shape(spec, f_arr)


def carrier_scale(spec: PsdSpec, f_new: float) -> PsdSpec:
    """Move ``spec`` to carrier ``f_new`` with the 20*log10 frequency-ratio rule.

    The scaling is always taken relative to ``f_carrier_ref`` so repeated
    calls do not accumulate.
    """
    if f_new <= 0:
        raise ValueError("carrier frequency must be positive")
    psd0_ref = spec.psd0 - 20.0 * math.log10(spec.f_carrier / spec.f_carrier_ref)
    return replace(spec, psd0=psd0_ref + 20.0 * math.log10(f_new / spec.f_carrier_ref), f_carrier=float(f_new))


def scale_power(spec: PsdSpec, delta_db: float) -> PsdSpec:
    """Shift the whole PSD by ``delta_db``."""
    return replace(spec, psd0=spec.psd0 + delta_db)


def generate_trace(spec: PsdSpec, n_samples: int, fs: float, seed=None) -> PnTrace:
    """Synthesize a phase trace by frequency-domain shaping of white noise.

    Complex Gaussian bins are weighted by ``sqrt(L(f) * fs * n)`` on the
    positive-frequency half, the DC bin is zeroed and the Hermitian-symmetric
    spectrum is inverted with ``irfft`` (the imaginary residue is exactly
    zero). The expected periodogram ``|X_k|^2 / (fs * n)`` equals ``L(f_k)``.

    ``seed`` may be an int, a :class:`numpy.random.SeedSequence` or a
    :class:`numpy.random.Generator`.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if fs <= 0:
        raise ValueError("fs must be positive")
    rng = np.random.default_rng(seed)
    n_bins = n_samples // 2 + 1
    # draw even when off so the stream position does not depend on the PSD
    g = rng.standard_normal((2, n_bins))
    if spec.is_off:
        return PnTrace(np.zeros(n_samples), fs)
    f = np.arange(1, n_bins) * fs / n_samples
    amp = np.sqrt(psd_linear(spec, f) * fs * n_samples)
    spectrum = np.zeros(n_bins, dtype=complex)
    spectrum[1:] = amp * (g[0, 1:] + 1j * g[1, 1:]) / np.sqrt(2.0)
    if n_samples % 2 == 0:
        # Nyquist bin must be real; keep its expected power
        spectrum[-1] = amp[-1] * g[0, -1]
    return PnTrace(np.fft.irfft(spectrum, n=n_samples), fs)


def wiener_trace(n_samples: int, step_var: float, fs: float = 1.0, seed=None) -> PnTrace:
    """Random-walk phase starting at zero with per-sample increment variance ``step_var``."""
    if step_var < 0:
        raise ValueError("step_var must be non-negative")
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal(n_samples) * math.sqrt(step_var)
    steps[0] = 0.0
    return PnTrace(np.cumsum(steps), fs)


@dataclass(frozen=True)
class WienerSpec:
    """Random-walk phase noise with per-sample increment variance ``step_var`` (rad^2)."""

    step_var: float
    name: str = "wiener"


def generate_pn(source, n_samples: int, fs: float, seed=None) -> PnTrace:
    """Draw a trace from either a :class:`PsdSpec` or a :class:`WienerSpec`."""
    if isinstance(source, WienerSpec):
        return wiener_trace(n_samples, source.step_var, fs, seed)
    return generate_trace(source, n_samples, fs, seed)


def combine_tx_rx(tx: PnTrace, rx: PnTrace) -> PnTrace:
    """Sum of transmitter and receiver phase noise."""
    if len(tx) != len(rx):
        raise ValueError(f"trace length mismatch: {len(tx)} vs {len(rx)}")
    if tx.fs != rx.fs:
        raise ValueError(f"sampling rate mismatch: {tx.fs} vs {rx.fs}")
    return PnTrace(tx.samples + rx.samples, tx.fs)


# -- serialization -----------------------------------------------------------

def psd_to_dict(spec: PsdSpec) -> dict:
    """JSON-ready dict; ``psd0_dbc_hz`` is the level at ``f_carrier_ref_hz``."""
    return {
        "name": spec.name,
        "psd0_dbc_hz": spec.psd0 - 20.0 * math.log10(spec.f_carrier / spec.f_carrier_ref),
        "f_carrier_ref_hz": spec.f_carrier_ref,
        "f_carrier_hz": spec.f_carrier,
        "zeros": [{"f_hz": f, "exp": a} for f, a in spec.zeros],
        "poles": [{"f_hz": f, "exp": a} for f, a in spec.poles],
    }


def psd_from_dict(d: dict) -> PsdSpec:
    spec = PsdSpec(
        psd0=float(d["psd0_dbc_hz"]),
        zeros=[(z["f_hz"], z["exp"]) for z in d.get("zeros", [])],
        poles=[(p["f_hz"], p["exp"]) for p in d.get("poles", [])],
        f_carrier_ref=float(d["f_carrier_ref_hz"]),
        name=d.get("name", "custom"),
    )
    if d.get("f_carrier_hz") is not None:
        spec = carrier_scale(spec, float(d["f_carrier_hz"]))
    return spec


def save_psd(spec: PsdSpec, path) -> None:
    Path(path).write_text(json.dumps(psd_to_dict(spec), indent=2) + "\n")


def load_psd(path) -> PsdSpec:
    return psd_from_dict(json.loads(Path(path).read_text()))


def builtin_psd_names() -> list[str]:
    files = resources.files("dftspn").joinpath("data/psd")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def builtin_psd(name: str) -> PsdSpec:
    """Load one of the PSD configs shipped with the package (e.g. ``"pn_140ghz"``)."""
    res = resources.files("dftspn").joinpath(f"data/psd/{name}.json")
    if not res.is_file():
        raise KeyError(f"unknown PSD config {name!r}; available: {builtin_psd_names()}")
    return psd_from_dict(json.loads(res.read_text()))
