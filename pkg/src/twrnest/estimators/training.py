"""Pilot-based least squares and the default pilot patterns."""

import numpy as np

from ..model import PilotSpec, PskAlphabet
from ..validation import check_positive

__all__ = ["ls_estimate", "orthogonal_pilots", "mcml_pilots", "ambiguity_pilots"]


def ls_estimate(s, x1, x2, A):
    """Least-squares fit of ``s ~ A*a*x1 + A*b*x2``.

    Returns
    -------
    (a_hat, b_hat) : complex, complex

    Raises
    ------
    ValueError
        If fewer than two pilots are given or ``[x1 | x2]`` is rank deficient.
    """
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    x1 = np.atleast_1d(np.asarray(x1, dtype=complex))
    x2 = np.atleast_1d(np.asarray(x2, dtype=complex))
    A = check_positive("A", A)
    if not s.shape == x1.shape == x2.shape:
        raise ValueError("s, x1 and x2 must have equal length")
    if s.size < 2:
        raise ValueError("LS estimation needs at least two pilots")
    X = A * np.column_stack([x1, x2])
    if np.linalg.matrix_rank(X) < 2:
        raise ValueError("pilot matrix [x1 | x2] is rank deficient")
    coef, *_ = np.linalg.lstsq(X, s, rcond=None)
    return complex(coef[0]), complex(coef[1])


def orthogonal_pilots(J, M, P1=1.0, P2=1.0):
    """Terminal 1 repeats the first constellation point; terminal 2 alternates its sign.

    For even ``J`` the two pilot vectors are orthogonal.
    """
    c1 = PskAlphabet(M, P1).points[0]
    c2 = PskAlphabet(M, P2).points[0]
    signs = np.where(np.arange(J) % 2 == 0, 1.0, -1.0)
    return PilotSpec(x1=np.full(J, c1), x2=c2 * signs)


def mcml_pilots(J, P1=1.0, P2=1.0):
    """BPSK pilots whose products ``x1 * conj(x2)`` are not all equal (for ``J >= 2``)."""
    return orthogonal_pilots(J, 2, P1, P2)


def ambiguity_pilots(J, M, P1=1.0, P2=1.0):
    """Unique-word pilots used only to resolve the M-fold phase ambiguity."""
    return orthogonal_pilots(J, M, P1, P2)
