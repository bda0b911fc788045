"""Seeded Monte-Carlo sweeps of MSE and SER.

Channel realisations are keyed by the master seed and the channel index
only, and symbol/noise draws by ``(seed_base(M, N), channel, trial)``.  So
within one block length every estimator and every SNR sees the same
channels, symbols and unit-variance noise; only the noise scaling changes
with SNR.  Results are reduced in trial order, which makes them independent
of the number of worker processes.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
import logging
import math

import numpy as np

from . import streams
from .bounds import crb, fim_blocks
from .estimators import (
    DMLEstimator,
    GMLEstimator,
    LSEstimator,
    MCMLEstimator,
    ambiguity_pilots,
    detect_symbols,
    mcml_pilots,
    orthogonal_pilots,
)
from .model import PskAlphabet, SystemParams, derive_channels, generate_channels, synthesize_block

logger = logging.getLogger(__name__)

ESTIMATORS = ("DML", "MCML", "GML", "LS", "PERFECT_CSI")


@dataclass(frozen=True)
class GridConfig:
    final_step: float = 1e-3
    refinement_factor: int = 10
    divisions: int = 50
    scale: float = 3.0
    n_starts: int = 1


@dataclass(frozen=True)
class SweepConfig:
    """Everything needed to run, and replay, a sweep.

    SNR is ``P2 / sigma^2`` in dB with equal noise variance at relay and
    terminal.  ``alpha = P1/P2`` and ``beta = Pr/(P1+P2)``; the default is
    equal powers.
    """

    estimators: tuple
    M: int
    N_values: tuple
    snr_db_values: tuple
    n_channel_realizations: int = 300
    n_noise_trials_per_channel: int = 10
    rho: float = 0.3
    alpha: float = 1.0
    beta: float = 1.0
    P2: float = 1.0
    J_dml_ambiguity: int = 2
    J_mcml: int = 2
    J_ls: int = 4
    master_seed: int = 0
    grid: GridConfig = field(default_factory=GridConfig)
    ser_target_errors: int = 100
    ser_min_blocks: int = 100
    ser_max_blocks: int = 20000
    ser_batch_blocks: int = 50

    def __post_init__(self):
        for name in ("estimators", "N_values", "snr_db_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if isinstance(self.grid, dict):
            object.__setattr__(self, "grid", GridConfig(**self.grid))

    def validate(self, kind="mse"):
        """Raise ``ValueError`` naming the first offending field."""
        if not self.estimators:
            raise ValueError("estimators: must list at least one estimator")
        for name in self.estimators:
            if name not in ESTIMATORS:
                raise ValueError(f"estimators: unknown estimator {name!r}")
        if kind == "mse" and "PERFECT_CSI" in self.estimators:
            raise ValueError("estimators: PERFECT_CSI is only meaningful in SER sweeps")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError("M: must be an integer >= 2")
        if "MCML" in self.estimators and self.M != 2:
            raise ValueError("estimators: MCML requires M = 2")
        if not self.N_values:
            raise ValueError("N_values: must not be empty")
        if not self.snr_db_values:
            raise ValueError("snr_db_values: must not be empty")
        if any(int(n) != n or n < 2 for n in self.N_values):
            raise ValueError("N_values: block lengths must be integers >= 2")
        if not all(math.isfinite(s) for s in self.snr_db_values):
            raise ValueError("snr_db_values: must be finite")
        for name in ("n_channel_realizations", "n_noise_trials_per_channel"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: must be >= 1")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError("rho: must lie in [-1, 1]")
        for name in ("alpha", "beta", "P2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name}: must be positive")
        if "LS" in self.estimators and self.J_ls < 2:
            raise ValueError("J_ls: LS needs at least 2 pilots")
        if "MCML" in self.estimators and self.J_mcml < 1:
            raise ValueError("J_mcml: MCML needs at least 1 pilot")
        if self.J_dml_ambiguity < 0:
            raise ValueError("J_dml_ambiguity: must be >= 0")
        n_min = min(self.N_values)
        for name in ("J_dml_ambiguity", "J_mcml", "J_ls"):
            if getattr(self, name) >= n_min:
                raise ValueError(f"{name}: block of {n_min} samples is too short for the pilot policy")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed: must be an unsigned 64-bit integer")
        if self.ser_batch_blocks < 1 or self.ser_min_blocks < 0 or self.ser_max_blocks < 1:
            raise ValueError("ser_batch_blocks: block budget must be positive")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{sorted(unknown)[0]}: unknown field")
        return cls(**data)

    def params(self, snr_db):
        return SystemParams.from_snr(snr_db, P2=self.P2, alpha=self.alpha, beta=self.beta)

    def pilots_for(self, estimator):
        P1, P2 = self.alpha * self.P2, self.P2
        if estimator in ("DML", "GML"):
            return ambiguity_pilots(self.J_dml_ambiguity, self.M, P1, P2) if self.J_dml_ambiguity else None
        if estimator == "MCML":
            return mcml_pilots(self.J_mcml, P1, P2)
        if estimator == "LS":
            return orthogonal_pilots(self.J_ls, self.M, P1, P2)
        return None


@dataclass
class MseCell:
    estimator: str
    M: int
    N: int
    snr_db: float
    mse_a: float
    mse_b_mag: float | None
    crb_a_avg: float | None
    n_trials: int
    seed_base: int
    crb_singular: int = 0


@dataclass
class SerCell:
    estimator: str
    M: int
    N_block: int
    J_pilots: int
    snr_db: float
    ser: float
    n_symbols: int
    n_errors: int
    seed_base: int
    n_blocks: int = 0


@dataclass
class SweepResult:
    kind: str
    cells: list

    def cell(self, estimator, N, snr_db):
        for c in self.cells:
            n = c.N if self.kind == "mse" else c.N_block
            if c.estimator == estimator and n == N and c.snr_db == snr_db:
                return c
        raise KeyError((estimator, N, snr_db))


@dataclass
class TrialRecord:
    channel_index: int
    trial_index: int
    h1: complex
    h2: complex
    g1: complex
    g2: complex
    a: complex
    b: complex
    a_hat: complex
    b_mag_hat: float | None
    sq_err_a: float
    sq_err_b_mag: float | None


def make_estimator(name, config, params):
    g = config.grid
    grid_kw = dict(final_step=g.final_step, refinement_factor=g.refinement_factor,
                   grid_divisions=g.divisions, grid_scale=g.scale, n_starts=g.n_starts)
    if name == "DML":
        return DMLEstimator(amplification=params.A, order=config.M, power=params.P2, **grid_kw)
    if name == "MCML":
        return MCMLEstimator(amplification=params.A, power=params.P2, **grid_kw)
    if name == "GML":
        return GMLEstimator(amplification=params.A, order=config.M, power=params.P2)
    if name == "LS":
        return LSEstimator(amplification=params.A, order=config.M, power=params.P2)
    raise ValueError(f"no estimator object for {name!r}")


def _run_estimator(name, block, config, params, derived):
    """``(a_hat, b_mag_hat, phi_b_hat)`` for one block."""
    if name == "PERFECT_CSI":
        return derived.a, abs(derived.b), derived.phi_b
    est = make_estimator(name, config, params)
    est.fit(block.z, block.t1, block.pilot_indices, block.x2_pilots)
    return est.a_, est.b_mag_, est.phi_b_


def _block(config, channels, params, N, base, c, k, pilots):
    sym_rng, noise_rng = streams.trial_streams(base, c, k)
    return synthesize_block(sym_rng, channels, params, config.M, N, pilots, noise_rng)


def _channels(config, c):
    return generate_channels(streams.channel_stream(config.master_seed, c), config.rho)


def _mse_unit(config, estimators, N, snr_db, c, with_crb, keep_records=False):
    """All noise trials of one channel realisation at one (N, SNR)."""
    params = config.params(snr_db)
    channels = _channels(config, c)
    derived = derive_channels(channels, params)
    base = streams.seed_base(config.master_seed, config.M, N)
    K = config.n_noise_trials_per_channel
    out = {name: {"a": np.empty(K), "b": np.empty(K), "rec": []} for name in estimators}
    crbs = []
    for k in range(K):
        for name in estimators:
            block = _block(config, channels, params, N, base, c, k, config.pilots_for(name))
            a_hat, b_mag_hat, _ = _run_estimator(name, block, config, params, derived)
            err_a = abs(a_hat - derived.a) ** 2
            err_b = (b_mag_hat - abs(derived.b)) ** 2
            out[name]["a"][k] = err_a
            out[name]["b"][k] = err_b
            if keep_records:
                out[name]["rec"].append(TrialRecord(
                    c, k, channels.h1, channels.h2, channels.g1, channels.g2,
                    derived.a, derived.b, complex(a_hat), b_mag_hat, float(err_a), float(err_b)))
        if with_crb:
            block = _block(config, channels, params, N, base, c, k, None)
            crbs.append(crb(fim_blocks(block.t1, block.t2_true, derived.b, params.A,
                                       params.P1, params.P2, derived.sigma_o2)))
    return out, crbs


def _map(fn, items, workers):
    if workers is None or workers <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _mse_item(config, estimators, with_crb, item):
    N, snr_db, c = item
    return _mse_unit(config, estimators, N, snr_db, c, with_crb)


def run_mse_sweep(config, workers=1):
    """MSE of ``a`` and ``|b|`` for every (estimator, N, SNR) cell.

    Cells for ``M > 2`` also carry the deterministic CRB on ``a`` averaged
    over the same symbol draws (singular draws skipped and counted).
    """
    config.validate("mse")
    with_crb = config.M > 2
    items = [(N, snr, c) for N in config.N_values for snr in config.snr_db_values
             for c in range(config.n_channel_realizations)]
    results = _map(partial(_mse_item, config, config.estimators, with_crb), items, workers)

    cells = []
    C = config.n_channel_realizations
    for i, (N, snr) in enumerate((N, s) for N in config.N_values for s in config.snr_db_values):
        chunk = results[i * C:(i + 1) * C]
        base = streams.seed_base(config.master_seed, config.M, N)
        crb_vals = [r.crb_a for _, crbs in chunk for r in crbs if not r.singular]
        n_crb = sum(len(crbs) for _, crbs in chunk)
        crb_avg = float(np.mean(crb_vals)) if crb_vals else None
        for name in config.estimators:
            sq_a = np.concatenate([out[name]["a"] for out, _ in chunk])
            sq_b = np.concatenate([out[name]["b"] for out, _ in chunk])
            cells.append(MseCell(
                estimator=name, M=config.M, N=N, snr_db=snr,
                mse_a=float(np.mean(sq_a)), mse_b_mag=float(np.mean(sq_b)),
                crb_a_avg=crb_avg, n_trials=sq_a.size, seed_base=base,
                crb_singular=n_crb - len(crb_vals) if with_crb else 0,
            ))
        logger.info("mse cell N=%s snr=%s done", N, snr)
    return SweepResult("mse", cells)


def trial_errors(config, N, snr_db, workers=1):
    """Per-trial squared errors of ``a`` for every estimator at one (N, SNR).

    Returns ``{estimator: array of shape (n_channel_realizations, n_noise_trials_per_channel)}``,
    the same draws that :func:`run_mse_sweep` averages; rows are channel
    realisations, which makes per-channel bootstrap straightforward.
    """
    config.validate("mse")
    items = [(N, snr_db, c) for c in range(config.n_channel_realizations)]
    results = _map(partial(_mse_item, config, config.estimators, False), items, workers)
    return {name: np.vstack([out[name]["a"] for out, _ in results]) for name in config.estimators}


def replay_cell(cell, config):
    """Regenerate every trial of an MSE cell, in the original order.

    Raises
    ------
    ValueError
        If the cell does not belong to ``config`` (seed or coordinates differ).
    """
    if cell.estimator not in config.estimators or cell.M != config.M:
        raise ValueError("cell does not belong to this configuration")
    if cell.N not in config.N_values or cell.snr_db not in config.snr_db_values:
        raise ValueError("cell coordinates are not part of this configuration")
    if streams.seed_base(config.master_seed, cell.M, cell.N) != cell.seed_base:
        raise ValueError("seed mismatch between cell and configuration")
    records = []
    for c in range(config.n_channel_realizations):
        out, _ = _mse_unit(config, (cell.estimator,), cell.N, cell.snr_db, c, False, keep_records=True)
        records.extend(out[cell.estimator]["rec"])
    return records


def _ser_unit(config, estimators, N, snr_db, batch):
    """Symbol and error counts per estimator for one batch of coherence blocks."""
    params = config.params(snr_db)
    alphabet = PskAlphabet(config.M, params.P2)
    base = streams.seed_base(config.master_seed, config.M, N)
    B = config.ser_batch_blocks
    counts = {name: [0, 0] for name in estimators}
    for t in range(batch * B, (batch + 1) * B):
        channels = _channels(config, t)
        derived = derive_channels(channels, params)
        for name in estimators:
            block = _block(config, channels, params, N, base, t, 0, config.pilots_for(name))
            a_hat, _, phi_hat = _run_estimator(name, block, config, params, derived)
            detected = detect_symbols(block.z, block.t1, a_hat, phi_hat, params.A, alphabet)
            mask = block.data_mask
            wrong = alphabet.index_of(detected[mask]) != alphabet.index_of(block.t2_true[mask])
            counts[name][0] += int(mask.sum())
            counts[name][1] += int(wrong.sum())
    return counts


def _ser_item(config, N, snr_db, item):
    batch, active = item
    return _ser_unit(config, active, N, snr_db, batch)


def _ser_done(config, blocks, errors):
    if blocks >= config.ser_max_blocks:
        return True
    return blocks >= config.ser_min_blocks and errors >= config.ser_target_errors


def run_ser_sweep(config, workers=1):
    """SER of each estimator on data positions, per (N, SNR).

    Every estimator sees the same coherence blocks; each keeps adding
    batches until it has ``ser_target_errors`` errors (and at least
    ``ser_min_blocks`` blocks) or reaches ``ser_max_blocks``.
    """
    config.validate("ser")
    B = config.ser_batch_blocks
    cells = []
    for N in config.N_values:
        base = streams.seed_base(config.master_seed, config.M, N)
        for snr in config.snr_db_values:
            totals = {name: [0, 0, 0] for name in config.estimators}  # symbols, errors, blocks
            active = list(config.estimators)
            batch = 0
            while active:
                n_par = max(1, workers or 1)
                items = [(batch + i, tuple(active)) for i in range(n_par)]
                results = _map(partial(_ser_item, config, N, snr), items, workers)
                for counts in results:
                    for name in list(active):
                        sym, err = counts[name]
                        tot = totals[name]
                        tot[0] += sym
                        tot[1] += err
                        tot[2] += B
                        if _ser_done(config, tot[2], tot[1]):
                            active.remove(name)
                batch += n_par
            for name in config.estimators:
                sym, err, blocks = totals[name]
                pilots = config.pilots_for(name)
                cells.append(SerCell(
                    estimator=name, M=config.M, N_block=N, J_pilots=0 if pilots is None else pilots.J,
                    snr_db=snr, ser=err / sym, n_symbols=sym, n_errors=err, seed_base=base, n_blocks=blocks,
                ))
            logger.info("ser cell N=%s snr=%s done", N, snr)
    return SweepResult("ser", cells)


def snr_at_ser(snr_db, ser, target):
    """SNR where a decreasing SER curve crosses ``target`` (log-linear interpolation).

    Returns ``nan`` if the curve never crosses the target.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ser = np.asarray(ser, dtype=float)
    for i in range(len(ser) - 1):
        hi, lo = ser[i], ser[i + 1]
        if hi >= target > lo:
            if lo <= 0:
                return float(snr_db[i + 1])
            frac = (np.log(hi) - np.log(target)) / (np.log(hi) - np.log(lo))
            return float(snr_db[i] + frac * (snr_db[i + 1] - snr_db[i]))
    return float("nan")
