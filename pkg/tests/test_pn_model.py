import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dftspn.pn_model import (
    NO_PHASE_NOISE,
    PnTrace,
    PsdSpec,
    WienerSpec,
    builtin_psd,
    builtin_psd_names,
    carrier_scale,
    combine_tx_rx,
    generate_pn,
    generate_trace,
    load_psd,
    psd_eval,
    psd_linear,
    save_psd,
    scale_power,
    wiener_trace,
)


class TestPsdEval:
    def test_flat(self):
        assert psd_eval(PsdSpec(-100.0), 1e6) == pytest.approx(-100.0, abs=1e-12)

    @given(f=st.floats(1e2, 1e10), fc=st.floats(1e3, 1e9), a=st.floats(0.5, 4))
    def test_pole_zero_cancel(self, f, fc, a):
        spec = PsdSpec(-90.0, zeros=[(fc, a)], poles=[(fc, a)])
        assert psd_eval(spec, f) == pytest.approx(-90.0, abs=1e-9)

    def test_single_pole(self):
        spec = PsdSpec(-80.0, poles=[(1e6, 2)])
        assert psd_eval(spec, 10e6) == pytest.approx(-100.0432, abs=1e-4)

    def test_vectorized(self):
        spec = PsdSpec(-80.0, poles=[(1e6, 2)])
        out = psd_eval(spec, [1e5, 1e6, 1e7])
        assert out.shape == (3,)
        assert np.all(np.diff(out) < 0)

    @pytest.mark.parametrize("f", [0.0, -1.0])
    def test_domain(self, f):
        with pytest.raises(ValueError):
            psd_eval(PsdSpec(-80.0), f)

    def test_off_is_zero_linear(self):
        assert np.all(psd_linear(NO_PHASE_NOISE, [1.0, 2.0]) == 0)


class TestCarrierScale:
    def test_identity(self):
        spec = builtin_psd("pn_140ghz")
        assert carrier_scale(spec, spec.f_carrier) == spec

    def test_decade(self):
        spec = PsdSpec(-90.0, f_carrier_ref=1e9)
        assert carrier_scale(spec, 10e9).psd0 == pytest.approx(-70.0)

    def test_140_to_300(self):
        spec = PsdSpec(-90.0, f_carrier_ref=140e9)
        assert carrier_scale(spec, 300e9).psd0 - spec.psd0 == pytest.approx(6.6199, abs=1e-4)

    def test_no_accumulation(self):
        spec = PsdSpec(-90.0, f_carrier_ref=30e9)
        twice = carrier_scale(carrier_scale(spec, 140e9), 300e9)
        assert twice.psd0 == pytest.approx(carrier_scale(spec, 300e9).psd0)

    def test_domain(self):
        with pytest.raises(ValueError):
            carrier_scale(PsdSpec(-90.0), 0.0)


class TestGenerateTrace:
    def test_off_gives_zeros(self):
        tr = generate_trace(NO_PHASE_NOISE, 256, 1e6, seed=3)
        assert np.all(tr.samples == 0)

    def test_deterministic(self):
        spec = builtin_psd("pn_300ghz")
        a = generate_trace(spec, 1000, 1e8, seed=7).samples
        b = generate_trace(spec, 1000, 1e8, seed=7).samples
        assert np.array_equal(a, b)

    def test_real_and_length(self):
        tr = generate_trace(builtin_psd("pn_140ghz"), 1001, 1e8, seed=0)
        assert len(tr) == 1001 and tr.samples.dtype == float

    def test_seed_changes_trace(self):
        spec = builtin_psd("pn_140ghz")
        assert not np.array_equal(generate_trace(spec, 64, 1e8, 1).samples, generate_trace(spec, 64, 1e8, 2).samples)

    def test_expected_variance(self):
        # E[var] follows from Parseval on the shaped spectrum
        spec, n, fs = builtin_psd("pn_300ghz"), 512, 122.88e6
        f = np.arange(1, n // 2 + 1) * fs / n
        lin = psd_linear(spec, f)
        expected = fs / n * (2 * lin[:-1].sum() + lin[-1])
        var = np.mean([np.mean(generate_trace(spec, n, fs, s).samples ** 2) for s in range(2000)])
        assert var == pytest.approx(expected, rel=0.05)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            generate_trace(PsdSpec(-80.0), 1, 1e6)
        with pytest.raises(ValueError):
            generate_trace(PsdSpec(-80.0), 16, -1.0)


class TestWiener:
    def test_starts_at_zero(self):
        assert wiener_trace(10, 0.1, seed=0).samples[0] == 0.0

    def test_increment_variance(self):
        x = wiener_trace(200_000, 0.01, seed=1).samples
        assert np.var(np.diff(x)) == pytest.approx(0.01, rel=0.02)

    def test_dispatch(self):
        a = generate_pn(WienerSpec(0.01), 50, 1.0, 4).samples
        assert np.array_equal(a, wiener_trace(50, 0.01, 1.0, 4).samples)


class TestCombine:
    def test_zero_rx(self):
        tx = generate_trace(builtin_psd("pn_140ghz"), 100, 1e8, 1)
        out = combine_tx_rx(tx, PnTrace(np.zeros(100), 1e8))
        assert np.array_equal(out.samples, tx.samples)

    def test_doubling(self):
        tx = generate_trace(builtin_psd("pn_140ghz"), 100, 1e8, 1)
        assert np.array_equal(combine_tx_rx(tx, tx).samples, 2 * tx.samples)

    def test_independent_sum(self):
        spec = builtin_psd("pn_140ghz")
        a, b = generate_trace(spec, 100, 1e8, 10), generate_trace(spec, 100, 1e8, 11)
        assert np.array_equal(combine_tx_rx(a, b).samples, a.samples + b.samples)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            combine_tx_rx(PnTrace(np.zeros(3), 1.0), PnTrace(np.zeros(4), 1.0))
        with pytest.raises(ValueError):
            combine_tx_rx(PnTrace(np.zeros(3), 1.0), PnTrace(np.zeros(3), 2.0))

    def test_complex_rejected(self):
        with pytest.raises(TypeError):
            PnTrace(np.zeros(3, dtype=complex), 1.0)


class TestConfigs:
    def test_builtins_listed(self):
        assert {"pn_140ghz", "pn_300ghz"} <= set(builtin_psd_names())

    def test_builtin_carriers(self):
        lo, hi = builtin_psd("pn_140ghz"), builtin_psd("pn_300ghz")
        assert lo.f_carrier == 140e9 and hi.f_carrier == 300e9
        assert hi.psd0 - lo.psd0 == pytest.approx(20 * math.log10(300 / 140))

    def test_unknown(self):
        with pytest.raises(KeyError):
            builtin_psd("nope")

    def test_round_trip(self, tmp_path):
        spec = scale_power(carrier_scale(builtin_psd("pn_140ghz"), 220e9), 3.0)
        save_psd(spec, tmp_path / "x.json")
        back = load_psd(tmp_path / "x.json")
        assert back.psd0 == pytest.approx(spec.psd0)
        assert back.zeros == spec.zeros and back.poles == spec.poles
        assert back.f_carrier == spec.f_carrier

    @settings(max_examples=25)
    @given(delta=st.floats(-20, 20))
    def test_scale_power_variance(self, delta):
        spec = builtin_psd("pn_140ghz")
        a = generate_trace(spec, 256, 1e8, 5).samples
        b = generate_trace(scale_power(spec, delta), 256, 1e8, 5).samples
        assert np.var(b) / np.var(a) == pytest.approx(10 ** (delta / 10), rel=1e-9)
