"""Special functions behind the closed-form envelope statistics.

Only what the theory needs: modified Bessel functions of the first kind of
orders 0 and 1 (plain and exponentially scaled), the Laguerre function
L_{1/2}, and the mean of a noncentral chi (Rician) envelope.

All functions accept scalars or numpy arrays and return the same shape.
"""

import numpy as np

__all__ = [
    "bessel_i",
    "bessel_i_scaled",
    "laguerre_half",
    "noncentral_chi_mean",
    "q_function",
]

# Below this |x| the power series is used, above it the asymptotic expansion.
SERIES_LIMIT = 15.0
OVERFLOW_LIMIT = 700.0

_SERIES_TERMS = 48
_ASYMPTOTIC_TERMS = 30


def _check_order(order):
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")


def _as_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _series(order, x):
    # sum_k (x/2)^(2k+order) / (k! (k+order)!)
    half = 0.5 * x
    q = half * half
    term = np.ones_like(x) if order == 0 else half.copy()
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + order))
        total += term
    return total


def _asymptotic_scaled(order, ax):
    # e^{-x} I_order(x) for large positive x
    mu = 4.0 * order * order
    term = np.ones_like(ax)
    total = term.copy()
    for k in range(1, _ASYMPTOTIC_TERMS):
        term = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * ax)
        total += term
    return total / np.sqrt(2.0 * np.pi * ax)


def bessel_i_scaled(order, x):
    """Exponentially scaled modified Bessel function ``exp(-|x|) * I_order(x)``.

    Never overflows, so it is safe for arguments far beyond the range of
    :func:`bessel_i`.
    """
    _check_order(order)
    x = _as_finite(x)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < SERIES_LIMIT
    if np.any(small):
        xs = ax[small]
        out[small] = _series(order, xs) * np.exp(-xs)
    if np.any(~small):
        out[~small] = _asymptotic_scaled(order, ax[~small])
    if order == 1:
        out = np.where(x < 0, -out, out)
    return out[()] if out.ndim == 0 else out


def bessel_i(order, x):
    """Modified Bessel function of the first kind, ``I_0`` or ``I_1``.

    Parameters
    ----------
    order : {0, 1}
    x : float or array_like
        Finite arguments with ``|x| <= 700``.

    Raises
    ------
    ValueError
        For non-finite input or arguments past the overflow guard.
    """
    x = _as_finite(x)
    if np.any(np.abs(x) > OVERFLOW_LIMIT):
        raise ValueError(f"|x| must not exceed {OVERFLOW_LIMIT}")
    scaled = bessel_i_scaled(order, x)
    return scaled * np.exp(np.abs(x))


def laguerre_half(x):
    """Laguerre function with parameter 1/2.

    ``L_{1/2}(x) = exp(x/2) * [(1 - x) I_0(x/2) + x I_1(x/2)]``.

    For ``x <= 0`` the exponential is absorbed into scaled Bessel values, so
    the result stays finite for ``-x`` up to 1e8 and beyond.
    """
    x = _as_finite(x)
    h = 0.5 * x
    i0 = bessel_i_scaled(0, h)
    i1 = bessel_i_scaled(1, h)
    # exp(x/2) * I(x/2) = exp(x/2 + |x|/2) * scaled, which is 1 for x <= 0
    factor = np.exp(h + np.abs(h))
    return factor * ((1.0 - x) * i0 + x * i1)


def noncentral_chi_mean(lam, sigma2):
    """Mean of ``|mu + n|`` with ``n ~ CN(0, sigma2)`` and ``|mu|^2 = lam * sigma2``.

    Each of the real and imaginary parts of the noise has variance
    ``sigma2 / 2``.
    """
    lam = _as_finite(lam, "lam")
    if np.any(lam < 0):
        raise ValueError("lam must be non-negative")
    sigma2 = _as_finite(sigma2, "sigma2")
    if np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be positive")
    return np.sqrt(np.pi * sigma2 / 4.0) * laguerre_half(-lam)


def q_function(rho):
    """``(pi/4) e^{-rho} [(1+rho) I0(rho/2) + rho I1(rho/2)] [I0(rho/2) + I1(rho/2)]``.

    Strictly increasing on ``rho > 0`` with limit 1; this is what makes the
    envelope variance uniquely minimised at perfect interference cancellation.
    """
    rho = _as_finite(rho, "rho")
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    h = 0.5 * rho
    i0 = bessel_i_scaled(0, h)
    i1 = bessel_i_scaled(1, h)
    # e^{-rho} I(rho/2) I(rho/2) == scaled * scaled for rho >= 0
    return 0.25 * np.pi * ((1.0 + rho) * i0 + rho * i1) * (i0 + i1)
