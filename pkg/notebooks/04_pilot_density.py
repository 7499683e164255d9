# %% [markdown]
# # How much do denser pilots buy?
#
# SNR needed for a target BER, per tracker, for two contiguous layouts.
# About half a minute on one core.

# %%
from dftspn import engine
from dftspn.pn_model import builtin_psd
from dftspn.ptrs import contiguous_pattern
from dftspn.waveform import FrameConfig

cfg, src, target = FrameConfig(mod_order=4), builtin_psd("pn_140ghz"), 1e-3

# %%
table = {}
for ng, ns in ((2, 2), (4, 4)):
    pat = contiguous_pattern(1024, ng, ns)
    pilots = engine._default_pilots(pat, 1)
    cov = engine.train_for(cfg, src, pat, pilots, 1, 200)
    for est in ("if", "li", "ci", "cpee"):
        res = engine.snr_for_target_ber(cfg, src, pat, est, target, 1, pilots=pilots, cov=cov, min_frames=20)
        table[(pat.label(), est)] = res.snr_db if res.reachable else None

for (label, est), snr in table.items():
    print(f"{label:12s} {est:5s} " + ("unreachable" if snr is None else f"{snr:6.2f} dB"))

# %% [markdown]
# The same grid as a CSV sweep, which is what `dftspn run` writes.

# %%
pat = contiguous_pattern(1024, 2, 2)
res = engine.sweep(cfg, src, [pat], ["li", "if"], [15, 20, 25], n_frames=5, seed=1)
print(res.to_csv())
