"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line; ``conftest.py`` prints the
collected lines in the terminal summary.
"""

import json
import math
import time
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from dftspn import cli, engine, estimators, oracle
from dftspn.covariance import CovarianceSet
from dftspn.pn_model import NO_PHASE_NOISE, WienerSpec, builtin_psd, generate_pn, generate_trace, psd_eval, scale_power
from dftspn.ptrs import PatternError, contiguous_pattern, distributed_pattern, sampling_matrix
from dftspn.waveform import FrameConfig, demodulate, modulate

RESULTS = []


def report(num, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {title}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    assert ok, line


def test_c1_oracle_equivalence():
    t0 = time.perf_counter()
    cfg = FrameConfig(n_fft=16, n_active=8, n_symbols=1)
    worst = {"chain": 0.0, "active": 0.0, "printed": 0.0}
    for seed in range(10):
        rng = np.random.default_rng(seed)
        phi = generate_pn(WienerSpec(0.05), 16, 1.0, seed).samples + rng.normal(scale=0.3, size=16)
        s = (rng.normal(size=8) + 1j * rng.normal(size=8)) / math.sqrt(2)
        dec = oracle.decompose(phi, s, cfg)
        chain = demodulate(modulate(s, cfg) * np.exp(1j * phi), cfg)[0]
        worst["chain"] = max(worst["chain"], oracle.max_relative_deviation(chain, dec.alpha[0] * s + dec.beta[0]))
        ref = oracle.effective_matrix(phi, cfg) @ s
        worst["chain"] = max(worst["chain"], oracle.max_relative_deviation(chain, ref))
        for mode in ("active", "printed"):
            d = oracle.alpha_beta_sums(phi, s, cfg, m_range=mode)
            worst[mode] = max(worst[mode], oracle.max_relative_deviation(d.alpha * s + d.beta, chain))
    runtime = time.perf_counter() - t0
    # the printed index range diverges; the report path is the CLI divergence message
    rep = cli.oracle_check(cfg, NO_PHASE_NOISE, 10, 0)
    ok = (worst["chain"] < 1e-10 and (worst["printed"] < 1e-8 or (worst["active"] < 1e-8 and rep["printed_range_diverges"]))
          and runtime < 10)
    report(1, "oracle equivalence", ok,
           f"chain {worst['chain']:.1e}, sums over N_a {worst['active']:.1e}, "
           f"sums over N_p {worst['printed']:.1e} (documented divergence), {runtime:.2f}s")


def test_c2_degenerate_exactness():
    t0 = time.perf_counter()
    cfg = FrameConfig(n_fft=256, n_active=128, n_symbols=4, fs=245.76e6)
    pat = distributed_pattern(128, 8)
    names = ["cpee", "ci", "li", "dct-2", "if"]
    clean = [engine.run_point(cfg, NO_PHASE_NOISE, pat, e, math.inf, 2, train_frames=100) for e in names]
    ok_clean = all(m.ber == 0 and m.phase_mse < 1e-20 for m in clean)

    theta = 0.3
    pilots = engine._default_pilots(pat, 0)
    frame = engine.make_frame(cfg, NO_PHASE_NOISE, pat, pilots, 0, 0)
    r = demodulate(modulate(frame.blocks, cfg) * np.exp(1j * theta), cfg)
    ones = CovarianceSet(np.ones((128, 128), complex), np.zeros((128, 128), complex), np.zeros((128, 128), complex))
    worst = 0.0
    for e in names:
        tr = engine.PhaseTracker(cfg, pat, pilots, engine.EstimatorSpec.parse(e), 0.0, ones)
        worst = max(worst, float(np.max(np.abs(tr.estimate(r) - theta))))
    runtime = time.perf_counter() - t0
    report(2, "degenerate exactness", ok_clean and worst < 1e-10 and runtime < 5,
           f"max |phi_hat - 0.3| = {worst:.1e}, {runtime:.2f}s")


def _ber_16qam(snr_db):
    q = lambda x: 0.5 * erfc(x / math.sqrt(2))
    a = math.sqrt(10 ** (snr_db / 10) / 5)
    return (3 * q(a) + 2 * q(3 * a) - q(5 * a)) / 4


def test_c3_awgn_anchor():
    t0 = time.perf_counter()
    cfg = FrameConfig(n_symbols=10)
    pat = distributed_pattern(1024, 8)
    bits_per_frame = cfg.n_symbols * (1024 - pat.k) * cfg.mod_order
    n_frames = math.ceil(1_000_000 / bits_per_frame)
    worst, ok = 0.0, True
    for snr in (4.0, 6.0, 8.0, 10.0, 12.0):
        m = engine.run_point(cfg, NO_PHASE_NOISE, pat, "genie", snr, n_frames, seed=int(snr))
        z = abs(m.ber - _ber_16qam(snr)) / m.ber_stderr
        worst = max(worst, z)
        ok &= m.n_bits >= 1_000_000 and z < 3
    runtime = time.perf_counter() - t0
    report(3, "AWGN anchor", ok and runtime < 120, f"worst deviation {worst:.2f} SE, {runtime:.1f}s")


def test_c4_lmmse_dominance():
    t0 = time.perf_counter()
    na, n = 64, 10_000
    pat = distributed_pattern(na, 8)
    idx = np.arange(na)
    # random-walk phase with a random start: C = c0 + q * min(m, n)
    c = 0.05 + 0.002 * np.minimum.outer(idx, idx)
    r_phi = np.exp(-(np.diag(c)[:, None] + np.diag(c)[None, :] - 2 * c) / 2).astype(complex)
    rng = np.random.default_rng(2024)
    phi = rng.normal(size=(n, na)) @ np.linalg.cholesky(c).T
    w = (rng.normal(size=(n, pat.k)) + 1j * rng.normal(size=(n, pat.k))) / math.sqrt(2)
    m_p = sampling_matrix(pat)
    ok, margins = True, []
    for snr in (10, 15, 20, 25, 30):
        s2 = 10 ** (-snr / 10)
        obs = estimators.PilotObservation(np.exp(1j * phi[:, pat.chi_p]) + math.sqrt(s2) * w, pat.chi_p, np.ones(pat.k))
        cov = SimpleNamespace(r_phi=r_phi, r_beta=np.zeros((na, na)), r_w=s2 * np.eye(na))
        z = estimators.build_if_filter(cov, m_p, np.ones(pat.k))

        def mse(ph):
            return np.mean(np.abs(np.exp(1j * ph) - np.exp(1j * phi)) ** 2, axis=1)

        e_if = mse(estimators.if_estimate(z, obs))
        for other in (estimators.li_estimate(obs, na), estimators.ci_estimate(obs, na)):
            d = e_if - mse(other)
            upper = d.mean() + 3 * d.std(ddof=1) / math.sqrt(n)
            margins.append(upper)
            ok &= upper <= 0
    runtime = time.perf_counter() - t0
    report(4, "LMMSE dominance", ok and runtime < 300, f"largest paired upper bound {max(margins):.2e}, {runtime:.1f}s")


def _target(cfg, src, pat, est, target, pilots, cov):
    return engine.snr_for_target_ber(cfg, src, pat, est, target, 1, pilots=pilots, cov=cov, min_frames=20)


@pytest.mark.slow
def test_c5_contiguous_density_trend():
    t0 = time.perf_counter()
    cfg, src = FrameConfig(mod_order=4), builtin_psd("pn_140ghz")
    snr, brackets = {}, []
    for ng, ns in ((2, 2), (4, 4)):
        pat = contiguous_pattern(1024, ng, ns)
        pilots = engine._default_pilots(pat, 1)
        cov = engine.train_for(cfg, src, pat, pilots, 1, 200)
        for est in ("if", "ci", "li"):
            res = _target(cfg, src, pat, est, 1e-3, pilots, cov)
            snr[(ng, est)] = res.snr_db if res.reachable else math.inf
            brackets.append(res.bracket[1] - res.bracket[0])
    gap = {ng: min(snr[(ng, "ci")], snr[(ng, "li")]) - snr[(ng, "if")] for ng in (2, 4)}
    runtime = time.perf_counter() - t0
    ok = (snr[(2, "if")] <= snr[(2, "ci")] and snr[(2, "if")] <= snr[(2, "li")]
          and gap[4] < gap[2] and max(brackets) <= 0.1 + 1e-12 and runtime < 1800)
    report(5, "contiguous pilot-density trend", ok,
           f"(2,2) IF/CI/LI {snr[(2, 'if')]:.2f}/{snr[(2, 'ci')]:.2f}/{snr[(2, 'li')]:.2f} dB, "
           f"gap {gap[2]:.2f} -> {gap[4]:.2f} dB, {runtime:.0f}s")


@pytest.mark.slow
def test_c6_low_density_trend():
    t0 = time.perf_counter()
    cfg, src = FrameConfig(mod_order=6), builtin_psd("pn_300ghz")
    pat = distributed_pattern(1024, 64)
    pilots = engine._default_pilots(pat, 1)
    cov = engine.train_for(cfg, src, pat, pilots, 1, 200)
    r_if = _target(cfg, src, pat, "if", 1e-2, pilots, cov)
    r_li = _target(cfg, src, pat, "li", 1e-2, pilots, cov)
    r_cpee = _target(cfg, src, pat, "cpee", 1e-2, pilots, cov)
    runtime = time.perf_counter() - t0
    ok = (pat.k == 16 and r_if.reachable and r_li.reachable
          and r_if.bracket[1] < r_li.bracket[0] and not r_cpee.reachable and runtime < 1800)
    report(6, "low-density trend", ok,
           f"IF {r_if.snr_db} dB, LI {r_li.snr_db} dB, CPEE BER at 40 dB {r_cpee.evaluations[0][1]:.3f}, {runtime:.0f}s")


_FUZZ = {"cases": 0, "rejected": 0}


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(na=st.sampled_from([12, 16, 48, 64, 96, 128, 1024]), kind=st.sampled_from(["d", "c"]),
       a=st.integers(1, 64), b=st.integers(1, 8), extra=st.integers(1, 20))
def _fuzz_dct(na, kind, a, b, extra):
    try:
        pat = distributed_pattern(na, a) if kind == "d" else contiguous_pattern(na, a % 8 + 1, b)
    except PatternError:
        return
    n_d = pat.k + extra
    _FUZZ["cases"] += 1
    hits = 0
    try:
        estimators.build_dct_basis(na, pat.chi_p, n_d)
    except estimators.DctConditionError:
        hits += 1
    try:
        engine.check_compatible(FrameConfig(n_fft=2 * na, n_active=na), pat, engine.EstimatorSpec("dct", n_d=n_d))
    except engine.ConfigError:
        hits += 1
    _FUZZ["rejected"] += hits == 2


def test_c7_dct_validity():
    _FUZZ.update(cases=0, rejected=0)
    _fuzz_dct()
    rng = np.random.default_rng(7)
    worst = 0.0
    for na, l in ((12, 4), (64, 8), (128, 16), (1024, 64)):
        pat = distributed_pattern(na, l)
        for n_d in range(1, pat.k + 1):
            basis = estimators.build_dct_basis(na, pat.chi_p, n_d)
            profile = basis.psi_na @ rng.uniform(-0.2, 0.2, n_d) * math.sqrt(na) / 4
            obs = estimators.PilotObservation(np.exp(1j * profile[pat.chi_p]), pat.chi_p, np.ones(pat.k))
            worst = max(worst, float(np.max(np.abs(estimators.dct_estimate(obs, basis) - profile))))
    ok = _FUZZ["cases"] > 0 and _FUZZ["rejected"] == _FUZZ["cases"] and worst < 1e-10
    report(7, "DCT validity", ok, f"{_FUZZ['rejected']}/{_FUZZ['cases']} fuzz cases rejected, reconstruction {worst:.1e}")


def test_c8_pn_fidelity():
    spec, n, fs = builtin_psd("pn_300ghz"), 4096, 1966.08e6
    f = np.fft.rfftfreq(n, 1 / fs)
    acc = np.zeros(f.size)
    for seed in range(200):
        x = generate_trace(spec, n, fs, seed).samples
        acc += np.abs(np.fft.rfft(x)) ** 2 / (fs * n)
    per = acc / 200
    worst = 0.0
    lo = fs / n
    while lo < fs / 2:
        sel = (f >= lo) & (f < min(10 * lo, fs / 2 + 1))
        target = np.mean(10 ** (psd_eval(spec, f[sel]) / 10))
        worst = max(worst, abs(10 * np.log10(per[sel].mean() / target)))
        lo *= 10
    base = np.array([np.var(generate_trace(spec, n, fs, s).samples) for s in range(200)])
    ratios = []
    for x_db in (-10.0, 3.0, 10.0):
        shifted = np.array([np.var(generate_trace(scale_power(spec, x_db), n, fs, s).samples) for s in range(200)])
        ratios.append(shifted.mean() / base.mean() / 10 ** (x_db / 10))
    var_err = max(abs(r - 1) for r in ratios)
    report(8, "PN generator fidelity", worst < 2 and var_err < 0.05,
           f"worst decade error {worst:.2f} dB, variance scaling error {100 * var_err:.2f}%")


def test_c9_reproducibility(tmp_path):
    cfg = {
        "frame": {"n_fft": 256, "n_active": 128, "n_symbols": 4, "fs": 245.76e6},
        "psd": "pn_300ghz",
        "patterns": [{"type": "distributed", "l": 8}, {"type": "contiguous", "ng": 4, "ns": 2}],
        "estimators": ["cpee", "ci", "li", "dct-2", "if"],
        "snr_db": [10, 20, 30],
        "n_frames": 4,
        "training": {"n_frames": 100},
        "seed": 11,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for w in (1, 8, 1):
        out = tmp_path / f"w{w}_{len(outs)}"
        assert cli.main(["run", "--config", str(path), "--out", str(out), "--workers", str(w)]) == 0
        outs.append((out / "sweep.csv").read_bytes())
    ok = outs[0] == outs[1] == outs[2] and outs[0].count(b"\n") == 31
    report(9, "reproducibility", ok, "1 vs 8 workers byte-identical CSV" if ok else "CSV bytes differ")
