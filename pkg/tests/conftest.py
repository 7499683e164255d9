from pathlib import Path

import numpy as np
import pytest

from dftspn.waveform import FrameConfig

GOLDEN = Path(__file__).parent / "golden"


def load_golden(name):
    data = np.loadtxt(GOLDEN / f"{name}.csv", delimiter=",", skiprows=1)
    return data[:, 0].astype(int), data[:, 1] + 1j * data[:, 2]


@pytest.fixture
def small_cfg():
    return FrameConfig(n_fft=128, n_active=64, n_symbols=4, mod_order=4, fs=122.88e6)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
