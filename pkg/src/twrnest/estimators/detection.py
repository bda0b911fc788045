"""Phase recovery of ``b`` and coherent detection of the remote symbols."""

import numpy as np

from ..validation import check_pilots, check_samples

__all__ = [
    "vv_phase_estimate",
    "ambiguity_candidates",
    "resolve_ambiguity",
    "detect_symbols",
]

TWO_PI = 2 * np.pi


def vv_phase_estimate(residuals, M):
    """Viterbi-Viterbi estimate of ``phi_b`` modulo ``2*pi/M``.

    ``(1/M) * angle(sum |r|^2 exp(j*(M*angle(r) + pi)))``; the ``+ pi``
    cancels the odd-multiple-of-``pi/M`` offset of the PSK phases.
    """
    r = check_samples(residuals)
    power = np.abs(r) ** 2
    if not np.any(power > 0):
        raise ValueError("all residuals are zero; phase is undefined")
    acc = np.sum(power * np.exp(1j * (M * np.angle(r) + np.pi)))
    return float(np.mod(np.angle(acc) / M, TWO_PI / M))


def ambiguity_candidates(phi_hat, M):
    """The ``M`` phases ``phi_hat + 2*pi*k/M`` in ``[0, 2*pi)``."""
    return np.mod(phi_hat + TWO_PI * np.arange(M) / M, TWO_PI)


def resolve_ambiguity(phi_candidates, s, x1, x2, a_hat, b_mag_hat, A):
    """Unique-word choice among phase candidates.

    Picks the candidate minimising ``sum|s - A*a_hat*x1 - A*|b|*exp(j*phi)*x2|^2``
    over the pilots; the lowest index wins a tie.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if s.size == 0:
        raise ValueError("ambiguity resolution needs at least one pilot")
    phi = np.asarray(phi_candidates, dtype=float)
    resid = s - A * a_hat * np.asarray(x1)
    pred = A * b_mag_hat * np.exp(1j * phi)[:, None] * np.asarray(x2)[None, :]
    cost = (np.abs(resid[None, :] - pred) ** 2).sum(axis=1)
    return float(np.mod(phi[int(np.argmin(cost))], TWO_PI))


def resolve_from_block(phi_hat, M, z, t1, pilot_indices, x2_pilots, a_hat, b_mag_hat, A):
    """Convenience wrapper taking pilots by position in the block."""
    z, t1 = check_samples(z, t1)
    idx, x2 = check_pilots(pilot_indices, x2_pilots, z.size)
    return resolve_ambiguity(ambiguity_candidates(phi_hat, M), z[idx], t1[idx], x2, a_hat, b_mag_hat, A)


def detect_symbols(z, t1, a_hat, phi_b_hat, A, alphabet):
    """Nearest-phase decisions on ``angle(z - A*a_hat*t1) - phi_b_hat``.

    Returns the detected constellation points; the magnitude of ``b`` plays
    no role for constant-modulus alphabets.
    """
    z, t1 = check_samples(z, t1)
    theta = np.angle(z - A * a_hat * t1) - phi_b_hat
    return alphabet.points[alphabet.nearest_index(theta)]
