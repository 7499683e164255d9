# %% [markdown]
# # Phase-noise models
#
# Load the shipped oscillator PSDs, look at their levels, and check that
# synthesized traces have the intended spectrum.

# %%
import numpy as np

from dftspn.pn_model import (
    WienerSpec,
    builtin_psd,
    builtin_psd_names,
    carrier_scale,
    combine_tx_rx,
    generate_pn,
    generate_trace,
    psd_eval,
)

print(builtin_psd_names())
spec = builtin_psd("pn_140ghz")
spec

# %% [markdown]
# Moving the oscillator to a higher carrier raises the whole curve by
# 20*log10 of the frequency ratio.

# %%
offsets = np.array([1e4, 1e5, 1e6, 1e7, 1e8])
for fc in (140e9, 220e9, 300e9):
    levels = psd_eval(carrier_scale(spec, fc), offsets)
    print(f"{fc / 1e9:5.0f} GHz  " + "  ".join(f"{v:7.1f}" for v in levels))

# %% [markdown]
# ## Traces
#
# One frame of the default numerology: 2048-point FFT at 1966.08 MHz, ten
# symbols. Transmitter and receiver oscillators are independent and add up.

# %%
fs, n = 1966.08e6, 2048 * 10
hi = builtin_psd("pn_300ghz")
phi = combine_tx_rx(generate_trace(hi, n, fs, seed=1), generate_trace(hi, n, fs, seed=2))
print(f"rms phase {np.std(phi.samples):.3f} rad, peak {np.max(np.abs(phi.samples)):.3f} rad")

# %% [markdown]
# Averaged periodogram against the model, one number per decade.

# %%
n = 4096
f = np.fft.rfftfreq(n, 1 / fs)
per = np.mean([np.abs(np.fft.rfft(generate_trace(hi, n, fs, s).samples)) ** 2 / (fs * n) for s in range(200)], axis=0)
lo = fs / n
while lo < fs / 2:
    sel = (f >= lo) & (f < 10 * lo)
    meas = 10 * np.log10(per[sel].mean())
    model = 10 * np.log10(np.mean(10 ** (psd_eval(hi, f[sel]) / 10)))
    print(f"[{lo / 1e6:8.2f} MHz, x10)  measured {meas:7.2f}  model {model:7.2f} dBc/Hz")
    lo *= 10

# %% [markdown]
# A random walk is handy when the exact correlation must be known in
# closed form.

# %%
walk = generate_pn(WienerSpec(1e-4), 10_000, fs, seed=3)
print(np.var(np.diff(walk.samples)))
