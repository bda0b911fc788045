import numpy as np
import pytest

from twrnest.model import PskAlphabet, SystemParams, derive_channels, generate_channels, synthesize_block


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_block(rng, M=4, N=30, snr_db=20.0, pilots=None, channels=None):
    params = SystemParams.from_snr(snr_db)
    channels = generate_channels(rng) if channels is None else channels
    block = synthesize_block(rng, channels, params, M, N, pilots)
    return block, params, derive_channels(channels, params)


def noiseless_block(rng, M, N, channels=None, t1=None, t2=None):
    """Block with sigma = 0 built directly, for exact-geometry checks."""
    params = SystemParams.from_powers(1.0, 1.0, 2.0, 0.0, 0.0)
    channels = generate_channels(rng) if channels is None else channels
    alphabet = PskAlphabet(M)
    if t1 is None:
        t1 = alphabet.points[rng.integers(M, size=N)]
    if t2 is None:
        t2 = alphabet.points[rng.integers(M, size=N)]
    d = derive_channels(channels, params)
    z = params.A * d.a * t1 + params.A * d.b * t2
    return z, t1, t2, params, d


# acceptance criteria append "(number, passed, detail)" here
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
