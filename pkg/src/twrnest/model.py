"""Signal model for a two-phase amplify-and-forward two-way relay link.

Terminal 1 receives, per sample,

    z = A*a*t1 + A*b*t2 + A*h2*n + eta,    a = h1*h2,  b = g1*h2,

where ``t1`` is its own (known) symbol, ``t2`` the remote symbol, ``n`` the
relay noise and ``eta`` the terminal noise.  Only ``a`` and ``b`` are
identifiable; estimators never see ``h1``, ``h2`` or ``g1``.

Complex Gaussian convention: ``CN(0, s2)`` has total variance ``s2`` split
evenly between the real and imaginary parts.
"""

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "PskAlphabet",
    "SystemParams",
    "ChannelSet",
    "DerivedChannels",
    "PilotSpec",
    "ReceivedBlock",
    "amplification_factor",
    "complex_normal",
    "generate_channels",
    "draw_symbols",
    "synthesize_block",
    "derive_channels",
]


@dataclass(frozen=True)
class PskAlphabet:
    """M-PSK constellation ``sqrt(P) * exp(j*(2l-1)*pi/M)``, ``l = 1..M``."""

    order: int
    power: float = 1.0

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"PSK order must be an integer >= 2, got {self.order!r}")
        if not self.power > 0:
            raise ValueError(f"PSK power must be positive, got {self.power!r}")

    @property
    def phases(self):
        ell = np.arange(1, self.order + 1)
        return (2 * ell - 1) * np.pi / self.order

    @property
    def points(self):
        return math.sqrt(self.power) * np.exp(1j * self.phases)

    def nearest_index(self, phase):
        """Index of the constellation point closest in phase to ``phase``."""
        step = 2 * np.pi / self.order
        return np.mod(np.round((np.asarray(phase) - np.pi / self.order) / step), self.order).astype(int)

    def index_of(self, symbols):
        """Indices of (noisy or exact) symbols by nearest phase."""
        return self.nearest_index(np.angle(symbols))

    def contains(self, symbols, rtol=1e-9):
        symbols = np.atleast_1d(np.asarray(symbols, dtype=complex))
        nearest = self.points[self.index_of(symbols)]
        return bool(np.all(np.abs(symbols - nearest) <= rtol * math.sqrt(self.power)))


def amplification_factor(P1, P2, Pr, sigma_r2):
    """Relay gain ``sqrt(Pr / (P1 + P2 + sigma_r2))`` keeping average relay power ``Pr``.

    A zero relay noise variance is accepted (the noiseless limit); powers must
    be strictly positive.
    """
    for name, value in (("P1", P1), ("P2", P2), ("Pr", Pr)):
        if not (math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    if not (math.isfinite(sigma_r2) and sigma_r2 >= 0):
        raise ValueError(f"sigma_r2 must be non-negative, got {sigma_r2!r}")
    return math.sqrt(Pr / (P1 + P2 + sigma_r2))


@dataclass(frozen=True)
class SystemParams:
    """Powers, noise variances and the derived relay gain.

    Build it with :meth:`from_powers` or :meth:`from_snr`; ``A``, ``alpha``
    and ``beta`` are derived, never set independently.
    """

    P1: float
    P2: float
    Pr: float
    sigma_r2: float
    sigma_t2: float
    A: float = field(init=False)
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.sigma_t2 >= 0:
            raise ValueError(f"sigma_t2 must be non-negative, got {self.sigma_t2!r}")
        object.__setattr__(self, "A", amplification_factor(self.P1, self.P2, self.Pr, self.sigma_r2))
        object.__setattr__(self, "alpha", self.P1 / self.P2)
        object.__setattr__(self, "beta", self.Pr / (self.P1 + self.P2))

    @classmethod
    def from_powers(cls, P1, P2, Pr, sigma_r2, sigma_t2):
        return cls(P1=P1, P2=P2, Pr=Pr, sigma_r2=sigma_r2, sigma_t2=sigma_t2)

    @classmethod
    def from_snr(cls, snr_db, P2=1.0, alpha=1.0, beta=1.0):
        """Equal noise at relay and terminal, ``sigma^2 = P2 * 10**(-snr_db/10)``."""
        sigma2 = P2 * 10.0 ** (-snr_db / 10.0)
        P1 = alpha * P2
        return cls(P1=P1, P2=P2, Pr=beta * (P1 + P2), sigma_r2=sigma2, sigma_t2=sigma2)


@dataclass(frozen=True)
class ChannelSet:
    h1: complex
    h2: complex
    g1: complex
    g2: complex
    rho: float = 0.0

    def __post_init__(self):
        for name in ("h1", "h2", "g1", "g2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"channel coefficient {name} must be finite")


@dataclass(frozen=True)
class DerivedChannels:
    a: complex
    b: complex
    phi_b: float
    sigma_o2: float


@dataclass(frozen=True)
class PilotSpec:
    """Known pilot symbols of both terminals, placed at the start of a block."""

    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self):
        x1 = np.atleast_1d(np.asarray(self.x1, dtype=complex))
        x2 = np.atleast_1d(np.asarray(self.x2, dtype=complex))
        if x1.shape != x2.shape or x1.ndim != 1:
            raise ValueError("pilot vectors x1 and x2 must be 1-D and of equal length")
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def J(self):
        return self.x1.size


@dataclass(frozen=True)
class ReceivedBlock:
    """Samples at terminal 1 plus the symbol bookkeeping of one block.

    ``t2_true`` is ground truth for scoring; estimators only use it through
    ``x2_pilots``.
    """

    z: np.ndarray
    t1: np.ndarray
    t2_true: np.ndarray
    pilot_indices: np.ndarray
    x2_pilots: np.ndarray

    def __post_init__(self):
        n = len(self.z)
        if n < 1 or len(self.t1) != n or len(self.t2_true) != n:
            raise ValueError("z, t1 and t2_true must be non-empty and of equal length")
        idx = np.asarray(self.pilot_indices, dtype=int)
        if len(np.unique(idx)) != idx.size or (idx.size and (idx.min() < 0 or idx.max() >= n)):
            raise ValueError("pilot_indices must be distinct indices into the block")
        if idx.size != len(self.x2_pilots):
            raise ValueError("x2_pilots must have one entry per pilot index")

    @property
    def N(self):
        return len(self.z)

    @property
    def J(self):
        return len(self.pilot_indices)

    @property
    def pilot_samples(self):
        return self.z[self.pilot_indices]

    @property
    def x1_pilots(self):
        return self.t1[self.pilot_indices]

    @property
    def data_mask(self):
        mask = np.ones(self.N, dtype=bool)
        mask[self.pilot_indices] = False
        return mask


def complex_normal(rng, size, variance=1.0):
    """Draw ``CN(0, variance)`` samples."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def generate_channels(rng, rho=0.3):
    """Draw ``(h1, h2)`` and ``(g1, g2)`` as independent correlated CN(0,1) pairs.

    Each pair satisfies ``E{x1 x2^*} = rho``.
    """
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [-1, 1], got {rho!r}")
    w = complex_normal(rng, 4)
    c = math.sqrt(1.0 - rho * rho)
    h1, g1 = w[0], w[2]
    h2 = rho * h1 + c * w[1]
    g2 = rho * g1 + c * w[3]
    return ChannelSet(h1=complex(h1), h2=complex(h2), g1=complex(g1), g2=complex(g2), rho=rho)


def draw_symbols(rng, alphabet, N):
    """``N`` i.i.d. symbols drawn uniformly from ``alphabet``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return alphabet.points[rng.integers(alphabet.order, size=N)]


def synthesize_block(rng, channels, params, M, N, pilots=None, noise_rng=None):
    """Generate one received block.

    Symbols are drawn from ``rng`` and noise from ``noise_rng`` (defaults to
    ``rng``).  The first ``J`` positions carry the pilots, when given.
    Drawing order is fixed (t1, t2, relay noise, terminal noise), so unit
    noise realisations are shared between blocks that differ only in SNR.
    """
    noise_rng = rng if noise_rng is None else noise_rng
    alpha1 = PskAlphabet(M, params.P1)
    alpha2 = PskAlphabet(M, params.P2)
    t1 = draw_symbols(rng, alpha1, N)
    t2 = draw_symbols(rng, alpha2, N)
    n_unit = complex_normal(noise_rng, N)
    eta_unit = complex_normal(noise_rng, N)
    J = 0 if pilots is None else pilots.J
    if J > N:
        raise ValueError(f"cannot place {J} pilots in a block of {N} samples")
    if J:
        if not (alpha1.contains(pilots.x1) and alpha2.contains(pilots.x2)):
            raise ValueError("pilot symbols must lie on the PSK constellations")
        t1[:J] = pilots.x1
        t2[:J] = pilots.x2
    return _assemble(channels, params, t1, t2, n_unit, eta_unit, J)


def _assemble(channels, params, t1, t2, n_unit, eta_unit, J):
    A = params.A
    a = channels.h1 * channels.h2
    b = channels.g1 * channels.h2
    n = math.sqrt(params.sigma_r2) * n_unit
    eta = math.sqrt(params.sigma_t2) * eta_unit
    z = A * a * t1 + A * b * t2 + A * channels.h2 * n + eta
    idx = np.arange(J)
    return ReceivedBlock(z=z, t1=t1, t2_true=t2, pilot_indices=idx, x2_pilots=t2[:J].copy())


def derive_channels(channels, params):
    """Identifiable composites ``a``, ``b``, ``phi_b`` and the overall noise variance."""
    a = channels.h1 * channels.h2
    b = channels.g1 * channels.h2
    sigma_o2 = params.A ** 2 * abs(channels.h2) ** 2 * params.sigma_r2 + params.sigma_t2
    return DerivedChannels(a=a, b=b, phi_b=float(np.mod(np.angle(b), 2 * np.pi)), sigma_o2=sigma_o2)
