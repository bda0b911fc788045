"""Input checks shared by the estimators.

scikit-learn's ``check_array`` rejects complex input, so received samples are
validated here instead.
"""

import math

import numpy as np


def check_samples(z, t1=None, min_samples=1):
    """Return ``z`` (and ``t1``) as finite 1-D complex arrays of equal length."""
    z = np.asarray(z, dtype=complex)
    if z.ndim != 1:
        raise ValueError(f"expected a 1-D sample vector, got shape {z.shape}")
    if z.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise ValueError("samples contain NaN or infinity")
    if t1 is None:
        return z
    t1 = np.asarray(t1, dtype=complex)
    if t1.shape != z.shape:
        raise ValueError(f"t1 has shape {t1.shape}, expected {z.shape}")
    if not np.all(np.isfinite(t1)):
        raise ValueError("t1 contains NaN or infinity")
    return z, t1


def check_pilots(pilot_indices, x2_pilots, n_samples, min_pilots=1):
    """Validate pilot bookkeeping and return ``(indices, x2)`` arrays."""
    if pilot_indices is None or x2_pilots is None:
        raise ValueError("pilot_indices and x2_pilots are required")
    idx = np.atleast_1d(np.asarray(pilot_indices, dtype=int))
    x2 = np.atleast_1d(np.asarray(x2_pilots, dtype=complex))
    if idx.size < min_pilots:
        raise ValueError(f"need at least {min_pilots} pilots, got {idx.size}")
    if idx.size != x2.size:
        raise ValueError("pilot_indices and x2_pilots differ in length")
    if np.unique(idx).size != idx.size or idx.min() < 0 or idx.max() >= n_samples:
        raise ValueError("pilot indices must be distinct and inside the block")
    return idx, x2


def check_positive(name, value):
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return value
