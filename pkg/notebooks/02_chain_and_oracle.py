# %% [markdown]
# # Transmit chain and the interference decomposition
#
# Phase noise in a DFT-spread block acts as a matrix on the data. Its
# diagonal rotates each symbol, the rest leaks between symbols. This
# script builds that matrix on a toy size and compares it with the
# simulated chain.

# %%
import numpy as np

from dftspn import oracle
from dftspn.waveform import FrameConfig, constellation, demodulate, modulate, qam_map

cfg = FrameConfig(n_fft=16, n_active=8, n_symbols=1)
rng = np.random.default_rng(0)
s = qam_map(rng.integers(0, 2, 8 * 4), 4)
phi = rng.normal(scale=0.2, size=16)

# %%
h = oracle.effective_matrix(phi, cfg)
chain = demodulate(modulate(s, cfg) * np.exp(1j * phi), cfg)[0]
print("chain vs H s:", oracle.max_relative_deviation(chain, h @ s))

dec = oracle.decompose(phi, s, cfg)
print("|alpha|:", np.round(np.abs(dec.alpha[0]), 4))
print("ICI power / signal power:", np.sum(np.abs(dec.beta) ** 2) / np.sum(np.abs(s) ** 2))

# %% [markdown]
# ## Summation form
#
# The same terms written as explicit sums over subcarriers. Running the
# transmit-bin index over the occupied bins reproduces the chain; running
# it over every FFT bin does not.

# %%
for mode in ("active", "printed"):
    d = oracle.alpha_beta_sums(phi, s, cfg, m_range=mode)
    print(f"{mode:8s}", oracle.max_relative_deviation(d.alpha * s + d.beta, chain))

# %% [markdown]
# ## Gray mapping
#
# The 16-QAM table, index = bits read most-significant first.

# %%
for i, p in enumerate(constellation(4)):
    print(f"{i:04b}  {p.real:+.4f} {p.imag:+.4f}j")
