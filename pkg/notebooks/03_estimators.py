# %% [markdown]
# # Pilot-based phase trackers on one frame
#
# Simulate a single 16-QAM frame with 300 GHz phase noise, run every
# tracker on it and compare the estimates with the true rotation phases.

# %%
import numpy as np

from dftspn import engine, estimators, waveform
from dftspn.pn_model import builtin_psd
from dftspn.ptrs import contiguous_pattern, distributed_pattern, sampling_matrix

cfg = waveform.FrameConfig(n_symbols=4)
src = builtin_psd("pn_300ghz")
snr_db = 25.0

# %%
def one_frame(pattern, seed=0):
    pilots = engine._default_pilots(pattern, seed)
    cov = engine.train_for(cfg, src, pattern, pilots, seed, n_frames=100)
    fr = engine.make_frame(cfg, src, pattern, pilots, seed, 0)
    sigma2 = 10 ** (-snr_db / 10)
    r = waveform.demodulate(fr.rx_clean + np.sqrt(sigma2) * fr.noise, cfg)
    rows = []
    for name in ("cpee", "ci", "li", "dct-4", "if", "genie"):
        tr = engine.PhaseTracker(cfg, pattern, pilots, engine.EstimatorSpec.parse(name), sigma2, cov)
        est = tr.estimate(r, fr.phi_prime)
        mse = np.mean(np.abs(np.exp(1j * est) - np.exp(1j * fr.phi_prime)) ** 2)
        rows.append((name, mse))
    return rows


for pat in (distributed_pattern(1024, 32), contiguous_pattern(1024, 4, 4)):
    print(pat.label())
    for name, mse in one_frame(pat):
        print(f"   {name:6s} {mse:.2e}")

# %% [markdown]
# ## The interpolation filter itself
#
# Each row of Z weights the K pilot observations for one output position.
# Near a pilot the weight concentrates on it; between pilots it spreads.

# %%
pat = distributed_pattern(1024, 64)
pilots = engine._default_pilots(pat, 0)
cov = engine.train_for(cfg, src, pat, pilots, 0, n_frames=100).with_noise(10 ** (-snr_db / 10))
z = estimators.build_if_filter(cov, sampling_matrix(pat), pilots.conj())
for n in (0, 32, 64, 96):
    print(n, np.round(np.abs(z[n, :4]), 3))
