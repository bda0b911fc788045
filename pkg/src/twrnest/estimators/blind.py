"""Blind estimators of the self-interference channel ``a``.

Functions take raw arrays: received samples ``z``, the terminal's own
symbols ``t1`` and the relay gain ``A``.  Candidate channels ``u`` may be a
scalar or a 1-D array; objectives are then evaluated for every candidate.
"""

import numpy as np

from ..validation import check_pilots, check_positive, check_samples
from .grid import EstimationResult, GridSpec, grid_search

__all__ = [
    "cleaned_samples",
    "dml_objective",
    "dml_estimate",
    "estimate_b_mag",
    "envelope_noise_variance",
    "gml_estimate",
    "mcml_objective",
    "mcml_pilot_phase",
    "mcml_b_mag",
    "mcml_estimate",
]


def cleaned_samples(u, z, t1, A):
    """``z - A*u*t1``, one row per candidate ``u`` when ``u`` is an array."""
    u = np.asarray(u, dtype=complex)
    if u.ndim == 0:
        return z - A * u * t1
    return z[None, :] - A * u[:, None] * t1[None, :]


def dml_objective(u, z, t1, A):
    """Sample variance (``ddof=1``) of the cleaned envelope ``|z - A*u*t1|``."""
    z, t1 = check_samples(z, t1, min_samples=2)
    env = np.abs(cleaned_samples(u, z, t1, A))
    return np.var(env, axis=-1, ddof=1)


def estimate_b_mag(a_hat, z, t1, A, P2=1.0):
    """``sum|z - A*a_hat*t1| / (N * A * sqrt(P2))``."""
    z, t1 = check_samples(z, t1)
    return float(np.abs(z - A * a_hat * t1).sum() / (z.size * A * np.sqrt(P2)))


def envelope_noise_variance(a_hat, z, t1, A):
    """ML noise-variance estimate: envelope variance with ``ddof=0``."""
    return float(np.var(np.abs(z - A * a_hat * t1)))


def gml_estimate(z, t1, A):
    """Correlator estimate ``sum(conj(t1) * z) / (A * sum|t1|^2)``."""
    z, t1 = check_samples(z, t1)
    A = check_positive("A", A)
    return complex(np.vdot(t1, z) / (A * np.vdot(t1, t1).real))


def _default_grid(z, t1, A, grid):
    if grid is None:
        return GridSpec.around(gml_estimate(z, t1, A))
    if not np.isfinite(grid.center):
        raise ValueError("grid center must be finite")
    return grid


def dml_estimate(z, t1, A, P2=1.0, grid=None, n_starts=1):
    """Deterministic-ML estimate of ``a`` by minimising :func:`dml_objective`.

    The default grid is centred on the GML estimate.  Also returns the ML
    estimates of ``|b|`` and the overall noise variance at the optimum.
    """
    z, t1 = check_samples(z, t1, min_samples=2)
    A = check_positive("A", A)
    grid = _default_grid(z, t1, A, grid)

    def objective(u):
        return np.var(np.abs(cleaned_samples(u, z, t1, A)), axis=-1, ddof=1)

    a_hat, value = grid_search(objective, grid, n_starts=n_starts)
    return EstimationResult(
        a_hat=a_hat,
        b_mag_hat=estimate_b_mag(a_hat, z, t1, A, P2),
        sigma_o2_hat=envelope_noise_variance(a_hat, z, t1, A),
        objective_value=value,
        grid_resolution=grid.final_step,
    )


# BPSK points lie on the imaginary axis, so r = A*b*t2 points along phi_b + pi/2
_BPSK_AXIS = np.pi / 2


def _is_bpsk(symbols):
    # S_2 = {pi/2, 3pi/2}: purely imaginary
    return bool(np.all(np.abs(symbols.real) <= 1e-9 * np.abs(symbols)))


def mcml_pilot_phase(u, s, x1, x2, A):
    """Pilot estimate of ``phi_b``: ``angle(sum((s - A*u*x1) * conj(x2)))``."""
    u = np.asarray(u, dtype=complex)
    if u.ndim == 0:
        return np.angle(np.sum((s - A * u * x1) * np.conj(x2)))
    acc = (s * np.conj(x2)).sum() - A * u * (x1 * np.conj(x2)).sum()
    return np.angle(acc)


def mcml_objective(u, z, t1, pilot_indices, x2_pilots, A):
    """MCML cost with the pilot phase plugged in.

    ``sum|r|^2 - (1/N) (sum|Re{r exp(-j psi)}|)^2`` with ``r = z - A*u*t1``
    and ``psi = phi + pi/2`` the symbol axis of ``b * t2``.
    """
    z, t1 = check_samples(z, t1)
    idx, x2 = check_pilots(pilot_indices, x2_pilots, z.size)
    return _mcml_objective(u, z, t1, z[idx], t1[idx], x2, A)


def _mcml_objective(u, z, t1, s, x1, x2, A):
    r = cleaned_samples(u, z, t1, A)
    phase = np.asarray(mcml_pilot_phase(u, s, x1, x2, A)) + _BPSK_AXIS
    rot = np.exp(-1j * phase)[..., None]
    proj = np.abs((r * rot).real).sum(axis=-1)
    return (np.abs(r) ** 2).sum(axis=-1) - proj ** 2 / z.size


def mcml_b_mag(a_hat, phi_b, z, t1, A, P2=1.0):
    """Constrained-ML ``|b|``: ``sum|Re{r exp(-j psi)}| / (N A sqrt(P2))``, ``psi = phi_b + pi/2``."""
    r = z - A * a_hat * t1
    return float(np.abs((r * np.exp(-1j * (phi_b + _BPSK_AXIS))).real).sum() / (z.size * A * np.sqrt(P2)))


def mcml_estimate(z, t1, pilot_indices, x2_pilots, A, P2=1.0, grid=None, n_starts=1):
    """Modified constrained-ML estimate of ``a`` for BPSK with ``J >= 1`` pilots.

    The pilots fix the phase of ``b`` for each candidate, which removes the
    line of spurious minima that the DML cost has for BPSK.
    """
    z, t1 = check_samples(z, t1)
    idx, x2 = check_pilots(pilot_indices, x2_pilots, z.size)
    A = check_positive("A", A)
    if not (_is_bpsk(t1) and _is_bpsk(x2)):
        raise ValueError("MCML requires a BPSK alphabet")
    grid = _default_grid(z, t1, A, grid)
    s, x1 = z[idx], t1[idx]

    def objective(u):
        return _mcml_objective(u, z, t1, s, x1, x2, A)

    a_hat, value = grid_search(objective, grid, n_starts=n_starts)
    phi_b = float(np.mod(mcml_pilot_phase(a_hat, s, x1, x2, A), 2 * np.pi))
    return EstimationResult(
        a_hat=a_hat,
        b_mag_hat=mcml_b_mag(a_hat, phi_b, z, t1, A, P2),
        phi_b_hat=phi_b,
        objective_value=value,
        grid_resolution=grid.final_step,
    )
