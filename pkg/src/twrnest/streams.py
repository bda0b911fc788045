"""Replayable random streams.

Every draw in an experiment comes from a Philox (counter-based) generator
keyed by integers such as ``(seed_base, channel, trial, role)``, so any
single trial can be regenerated without running the ones before it.
"""

import numpy as np

CHANNEL = 0
SYMBOLS = 1
NOISE = 2


def stream(*key):
    """Independent generator for an integer key tuple."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def seed_base(master_seed, M, N):
    """Per-cell 63-bit seed derived from the master seed and the cell's (M, N)."""
    state = np.random.SeedSequence([int(master_seed), int(M), int(N)]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def channel_stream(master_seed, index):
    return stream(master_seed, CHANNEL, index)


def trial_streams(base, channel_index, trial_index):
    """``(symbol_rng, noise_rng)`` for one trial."""
    return (stream(base, channel_index, trial_index, SYMBOLS),
            stream(base, channel_index, trial_index, NOISE))
