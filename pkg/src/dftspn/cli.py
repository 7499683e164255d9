"""Command-line front end: ``dftspn run | oracle-check | train``.

Exit codes: 0 success, 2 invalid configuration, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import engine, oracle, ptrs
from .covariance import cache_key, load_covariances, save_covariances, train_covariances
from .estimators import DctConditionError
from .pn_model import (
    NO_PHASE_NOISE,
    PsdSpec,
    WienerSpec,
    builtin_psd,
    carrier_scale,
    generate_pn,
    load_psd,
    psd_from_dict,
)
from .waveform import FrameConfig, demodulate, modulate

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
WORKERS_ENV = "DFTSPN_WORKERS"

DEFAULT_FRAME = {
    "n_fft": 2048,
    "n_active": 1024,
    "cp_len": 0,
    "n_symbols": 10,
    "mod_order": 4,
    "fs": 1966.08e6,
    "offset": 0,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    frame: FrameConfig
    source: PsdSpec | WienerSpec
    patterns: list
    estimators: list
    snr_db: list
    n_frames: int = 50
    min_errors: int | None = None
    min_frames: int = 1
    train_frames: int = 200
    seed: int = 0
    out: str = "results"
    raw: dict = field(default_factory=dict)


def _parse_source(obj, base_dir: Path):
    if obj is None or obj == "off":
        return NO_PHASE_NOISE
    if isinstance(obj, str):
        path = base_dir / obj
        return load_psd(path) if obj.endswith(".json") else builtin_psd(obj)
    if obj.get("type") == "wiener":
        return WienerSpec(float(obj["step_var"]))
    if "file" in obj:
        spec = load_psd(base_dir / obj["file"])
    elif "builtin" in obj:
        spec = builtin_psd(obj["builtin"])
    else:
        spec = psd_from_dict(obj)
    if obj.get("carrier_hz"):
        spec = carrier_scale(spec, float(obj["carrier_hz"]))
    return spec


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    """Build and cross-validate a :class:`RunConfig`; raises :class:`ConfigError`."""
    try:
        frame = FrameConfig(**{**DEFAULT_FRAME, **raw.get("frame", {})})
        source = _parse_source(raw.get("psd", "pn_140ghz"), base_dir)
        pats = [ptrs.pattern_from_dict(p, frame.n_active)
                for p in raw.get("patterns", [{"type": "distributed", "l": 8}])]
        ests = [engine.EstimatorSpec.parse(e)
                for e in raw.get("estimators", ["cpee", "ci", "li", {"name": "dct", "n_d": 2}, "if"])]
        snrs = [float(s) for s in raw.get("snr_db", [10, 15, 20, 25, 30])]
        for p in pats:
            for e in ests:
                engine.check_compatible(frame, p, e)
        training = raw.get("training", {})
        cfg = RunConfig(
            frame=frame,
            source=source,
            patterns=pats,
            estimators=ests,
            snr_db=snrs,
            n_frames=int(raw.get("n_frames", 50)),
            min_errors=raw.get("min_errors"),
            min_frames=int(raw.get("min_frames", 1)),
            train_frames=int(training.get("n_frames", 200)),
            seed=int(raw.get("seed", 0)),
            out=str(raw.get("out", "results")),
            raw=raw,
        )
    except ConfigError:
        raise
    except (ptrs.PatternError, engine.ConfigError, DctConditionError) as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if not (cfg.patterns and cfg.estimators and cfg.snr_db):
        raise ConfigError("patterns, estimators and snr_db must be non-empty")
    if cfg.n_frames < 1:
        raise ConfigError("n_frames must be >= 1")
    return cfg


def _read_config(path: str) -> tuple[dict, Path]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text), p.parent
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _workers(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _cov_path(out_dir: Path, rc: RunConfig, pattern, pilots) -> Path:
    key = cache_key(rc.frame, rc.source, pattern, rc.train_frames, rc.seed, pilots)
    model = getattr(rc.source, "name", "pn")
    return out_dir / f"cov_{model}_{key}.csv.gz"


# -- subcommands -------------------------------------------------------------------

def cmd_run(args) -> int:
    raw, base = _read_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    rc = parse_config(raw, base)
    out_dir = Path(args.out or rc.out)
    covs = {}
    cache_dir = raw.get("training", {}).get("cache_dir")
    if cache_dir and any(e.name == "if" for e in rc.estimators):
        for p in rc.patterns:
            path = _cov_path(base / cache_dir, rc, p, engine._default_pilots(p, rc.seed))
            if path.exists():
                covs[p] = load_covariances(path)
    result = engine.sweep(
        rc.frame, rc.source, rc.patterns, rc.estimators, rc.snr_db, rc.n_frames, rc.seed,
        min_errors=rc.min_errors, min_frames=rc.min_frames, train_frames=rc.train_frames,
        covs=covs, workers=_workers(args.workers),
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    csv_path.write_text(result.to_csv())
    (out_dir / "sweep.manifest.json").write_text(engine.dumps_manifest(engine.manifest(raw, result, rc.seed)))
    print(f"wrote {len(result.rows)} rows to {csv_path}")
    return EXIT_OK


def oracle_check(frame: FrameConfig, source, trials: int, seed: int, phase: str = "random") -> dict:
    """Compare chain, matrix and triple-sum evaluations on ``trials`` random instances.

    ``phase="random"`` draws i.i.d. N(0, 0.25) phases per sample; otherwise
    phases come from ``source``.
    """
    rng = np.random.default_rng(seed)
    body = replace(frame, cp_len=0, n_symbols=1)
    worst = {"chain_vs_matrix": 0.0, "sums_active_vs_matrix": 0.0, "sums_printed_vs_matrix": 0.0}
    for _ in range(trials):
        if phase == "random":
            phi = rng.normal(scale=0.5, size=frame.n_fft)
        else:
            phi = generate_pn(source, frame.n_fft, frame.fs, rng).samples
        s = (rng.normal(size=frame.n_active) + 1j * rng.normal(size=frame.n_active)) / math.sqrt(2)
        ref = oracle.effective_matrix(phi, frame) @ s
        chain = demodulate(modulate(s, body) * np.exp(1j * phi), body)[0]
        worst["chain_vs_matrix"] = max(worst["chain_vs_matrix"], oracle.max_relative_deviation(chain, ref))
        for mode in ("active", "printed"):
            d = oracle.alpha_beta_sums(phi, s, frame, m_range=mode)
            key = f"sums_{mode}_vs_matrix"
            worst[key] = max(worst[key], oracle.max_relative_deviation(d.alpha * s + d.beta, ref))
    worst["passed"] = worst["chain_vs_matrix"] < 1e-10 and worst["sums_active_vs_matrix"] < 1e-8
    worst["printed_range_diverges"] = worst["sums_printed_vs_matrix"] >= 1e-8
    return worst


def cmd_oracle_check(args) -> int:
    raw, base = _read_config(args.config)
    try:
        frame = FrameConfig(**{**DEFAULT_FRAME, "n_fft": 16, "n_active": 8, "n_symbols": 1, **raw.get("frame", {})})
        source = _parse_source(raw.get("psd", "off"), base)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    if frame.n_fft > oracle.BRUTE_FORCE_MAX_NFFT:
        print(f"error: oracle-check is capped at n_fft <= {oracle.BRUTE_FORCE_MAX_NFFT} "
              f"(requested {frame.n_fft}); the triple sums cost O(N_a^2 * n_fft^2)", file=sys.stderr)
        return EXIT_CONFIG
    seed = args.seed if args.seed is not None else int(raw.get("seed", 0))
    rep = oracle_check(frame, source, int(raw.get("trials", 10)), seed, raw.get("phase", "random"))
    print(f"max relative deviation, chain vs effective matrix:       {rep['chain_vs_matrix']:.3e}")
    print(f"max relative deviation, triple sums (m over N_a) vs chain: {rep['sums_active_vs_matrix']:.3e}")
    print(f"max relative deviation, triple sums (m over N_p) vs chain: {rep['sums_printed_vs_matrix']:.3e}")
    if rep["printed_range_diverges"]:
        print("divergence: summing the transmit-bin index m over all N_p bins adds terms for "
              "unoccupied bins; restricting m to the N_a active bins reproduces the chain exactly")
    print("PASS" if rep["passed"] else "FAIL")
    return EXIT_OK if rep["passed"] else 1


def cmd_train(args) -> int:
    raw, base = _read_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    rc = parse_config(raw, base)
    cache_dir = raw.get("training", {}).get("cache_dir")
    out_dir = Path(args.out) if args.out else (base / cache_dir if cache_dir else Path(rc.out))
    for p in rc.patterns:
        pilots = engine._default_pilots(p, rc.seed)
        path = _cov_path(out_dir, rc, p, pilots)
        if path.exists():
            print(f"cached {path}")
            continue
        cov = train_covariances(rc.frame, rc.source, p, n_frames=rc.train_frames, seed=rc.seed,
                                pilots=pilots, workers=_workers(args.workers))
        save_covariances(cov, path)
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dftspn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, hlp in (
        ("run", cmd_run, "run a Monte Carlo sweep and write CSV + manifest"),
        ("oracle-check", cmd_oracle_check, "cross-check the analytic interference decomposition"),
        ("train", cmd_train, "train and cache IF covariance sets"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
