"""Cramér-Rao bounds and closed-form performance predictions.

The deterministic bound treats the remote symbol phases as unknowns; the
unknown vector is ``[Re a, Im a, |b|, phi_b1, ..., phi_bN]``.  The noise
variance is excluded because its information decouples from the rest.
"""

from dataclasses import dataclass
from itertools import product
from math import comb
from typing import NamedTuple

import numpy as np

from .specfun import laguerre_half

__all__ = [
    "FimBlocks",
    "CrbResult",
    "Mcrb",
    "fim_blocks",
    "full_fim",
    "crb",
    "schur_complement",
    "crb_full_inverse",
    "mcrb",
    "envelope_second_moment",
    "envelope_mean_theory",
    "envelope_variance_theory",
    "gml_mse_theory",
    "gml_error_floor",
    "p_degenerate_closed_form",
    "p_degenerate_exact",
    "p_unique",
    "phase_differences",
    "is_degenerate_draw",
    "is_degenerate_symbols",
    "average_crb",
]

SINGULAR_RTOL = 1e-10


@dataclass(frozen=True)
class FimBlocks:
    """Partitioned Fisher information: ``[[H1, H2], [H2^T, H3]]``.

    ``H3`` is diagonal with a common entry, stored as the scalar ``h3``.
    """

    H1: np.ndarray
    H2: np.ndarray
    h3: float

    @property
    def H3(self):
        return self.h3 * np.eye(self.H2.shape[1])


@dataclass(frozen=True)
class CrbResult:
    """Bounds on ``a`` (sum over real and imaginary parts) and ``|b|``.

    Both are ``None`` when the Schur complement is singular.
    """

    crb_a: float | None
    crb_b_mag: float | None
    schur_condition: float

    @property
    def singular(self):
        return self.crb_a is None


class Mcrb(NamedTuple):
    mcrb_a: float
    mcrb_b_mag: float


def fim_blocks(t1, t2, b, A, P1, P2, sigma_o2):
    """Assemble the FIM blocks for one realisation of ``t1`` and ``t2``."""
    t1 = np.asarray(t1, dtype=complex)
    t2 = np.asarray(t2, dtype=complex)
    if t1.ndim != 1 or t1.shape != t2.shape or t1.size < 1:
        raise ValueError("t1 and t2 must be non-empty 1-D vectors of equal length")
    if not sigma_o2 > 0:
        raise ValueError("sigma_o2 must be positive")
    N = t1.size
    c = 2.0 * A * A / sigma_o2
    cross = np.exp(1j * np.angle(b)) * np.vdot(t1, t2)
    H1 = c * np.array([
        [N * P1, 0.0, cross.real],
        [0.0, N * P1, cross.imag],
        [cross.real, cross.imag, N * P2],
    ])
    w = np.conj(b) * t1 * np.conj(t2)
    H2 = c * np.vstack([w.imag, w.real, np.zeros(N)])
    return FimBlocks(H1=H1, H2=H2, h3=c * abs(b) ** 2 * P2)


def full_fim(blocks):
    """The full ``(N+3) x (N+3)`` information matrix."""
    top = np.hstack([blocks.H1, blocks.H2])
    bottom = np.hstack([blocks.H2.T, blocks.H3])
    return np.vstack([top, bottom])


def schur_complement(blocks):
    if not blocks.h3 > 0:
        raise ValueError("H3 is not invertible (b = 0)")
    return blocks.H1 - blocks.H2 @ blocks.H2.T / blocks.h3


def crb(blocks):
    """Deterministic CRBs via the Schur complement ``H1 - H2 H3^{-1} H2^T``.

    Flagged singular when its smallest eigenvalue is below ``1e-10`` times
    its trace.
    """
    H = schur_complement(blocks)
    H = 0.5 * (H + H.T)
    eig_min = float(np.linalg.eigvalsh(H)[0])
    if eig_min < SINGULAR_RTOL * np.trace(H):
        return CrbResult(None, None, eig_min)
    inv = np.linalg.inv(H)
    return CrbResult(float(inv[0, 0] + inv[1, 1]), float(inv[2, 2]), eig_min)


def crb_full_inverse(blocks):
    """Same bounds from the inverse of the full FIM (reference path)."""
    inv = np.linalg.inv(full_fim(blocks))
    return float(inv[0, 0] + inv[1, 1]), float(inv[2, 2])


def mcrb(A, N, P1, P2, sigma_o2):
    """Modified CRBs ``sigma_o2/(A^2 N P1)`` and ``sigma_o2/(2 A^2 N P2)``."""
    for name, value in (("A", A), ("N", N), ("P1", P1), ("P2", P2), ("sigma_o2", sigma_o2)):
        if not value > 0:
            raise ValueError(f"{name} must be positive")
    return Mcrb(sigma_o2 / (A * A * N * P1), sigma_o2 / (2.0 * A * A * N * P2))


def average_crb(results):
    """Mean ``crb_a`` over non-singular results and the number skipped."""
    vals = [r.crb_a for r in results if not r.singular]
    skipped = len(results) - len(vals)
    return (float(np.mean(vals)) if vals else None), skipped


def envelope_second_moment(v, b, A, P1, P2, sigma_o2):
    """``E|y(v)|^2 = A^2|v|^2 P1 + A^2|b|^2 P2 + sigma_o2``."""
    v = np.asarray(v, dtype=complex)
    return A * A * (np.abs(v) ** 2 * P1 + abs(b) ** 2 * P2) + sigma_o2


def _lambdas(v, b, A, P1, P2, sigma_o2, M):
    v = np.asarray(v, dtype=complex)
    k = np.arange(M).reshape((M,) + (1,) * v.ndim)
    theta = np.angle(v) - np.angle(b) + 2 * np.pi * k / M
    mod_v = np.abs(v)
    cross = 2 * A * A * mod_v * abs(b) * np.sqrt(P1 * P2) * np.cos(theta)
    lam = (A * A * (mod_v ** 2 * P1 + abs(b) ** 2 * P2) + cross) / sigma_o2
    # rounding can push a zero noncentrality slightly negative
    return np.maximum(lam, 0.0)


def envelope_mean_theory(v, b, A, P1, P2, sigma_o2, M):
    """``E|y(v)|``: equal-weight mixture of ``M`` noncentral chi means."""
    lam = _lambdas(v, b, A, P1, P2, sigma_o2, M)
    return np.sqrt(np.pi * sigma_o2 / (4.0 * M * M)) * laguerre_half(-lam).sum(axis=0)


def envelope_variance_theory(v, b, A, P1, P2, sigma_o2, M):
    """Variance of ``|y(v)|``, the large-sample limit of the DML cost at ``u = a - v``.

    ``y(v) = A v t1 + A b t2 + noise`` with independent uniform M-PSK symbols
    and ``CN(0, sigma_o2)`` noise.
    """
    if not sigma_o2 > 0:
        raise ValueError("sigma_o2 must be positive")
    if M < 2:
        raise ValueError("M must be at least 2")
    mean = envelope_mean_theory(v, b, A, P1, P2, sigma_o2, M)
    return envelope_second_moment(v, b, A, P1, P2, sigma_o2) - mean ** 2


def gml_mse_theory(b, h2, A, N, alpha, P2, sigma2):
    """GML mean squared error for equal relay/terminal noise ``sigma2``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return (abs(b) ** 2 / (N * alpha)
            + abs(h2) ** 2 * sigma2 / (N * alpha * P2)
            + sigma2 / (N * A * A * alpha * P2))


def gml_error_floor(b, N, alpha):
    return abs(b) ** 2 / (N * alpha)


def p_degenerate_closed_form(M, N):
    """Closed-form probability ``(2/M)^(N-1) (M-1)`` of a degenerate draw.

    This is a union bound: draws with a single distinct phase difference are
    counted once per pair containing it, so it exceeds the exact value for
    small ``N`` (see :func:`p_degenerate_exact`).
    """
    if M < 2 or N < 1:
        raise ValueError("need M >= 2 and N >= 1")
    return (2.0 / M) ** (N - 1) * (M - 1)


def p_degenerate_exact(M, N):
    """Exact probability that ``N`` uniform phase differences take at most two values."""
    if M < 2 or N < 1:
        raise ValueError("need M >= 2 and N >= 1")
    if M == 2:
        return 1.0
    # one value, or exactly two values (2^N - 2 sequences per pair)
    return (M + comb(M, 2) * (2 ** N - 2)) / M ** N


def p_unique(M, N, raw=False):
    """Probability ``1 - (2/M)^(N-1) (M-1)`` that the noiseless DML cost has a unique minimum.

    Clamped at zero unless ``raw`` is set.
    """
    value = 1.0 - p_degenerate_closed_form(M, N)
    return value if raw else max(0.0, value)


def phase_differences(phi1, phi2, M):
    """``phi1 - phi2`` as integer multiples of ``2*pi/M`` in ``0..M-1``."""
    d = (np.asarray(phi1, dtype=float) - np.asarray(phi2, dtype=float)) * M / (2 * np.pi)
    return np.mod(np.round(d), M).astype(int)


def is_degenerate_draw(phi1, phi2, M):
    """True when the phase differences ``phi1 - phi2`` take at most two distinct values."""
    return np.unique(phase_differences(phi1, phi2, M)).size <= 2


def is_degenerate_symbols(t1, t2, M):
    return is_degenerate_draw(np.angle(t1), np.angle(t2), M)


def enumerate_degenerate_fraction(M, N):
    """Exhaustive fraction of degenerate phase-difference sequences (small ``N`` only)."""
    total = degenerate = 0
    for psi in product(range(M), repeat=N):
        total += 1
        degenerate += len(set(psi)) <= 2
    return degenerate / total
