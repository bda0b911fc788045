"""Coarse-to-fine search over a square of the complex plane."""

from dataclasses import dataclass
import math

import numpy as np

__all__ = ["GridSpec", "EstimationResult", "grid_search"]


@dataclass(frozen=True)
class GridSpec:
    """Square grid ``center + [-half_width, half_width]^2`` refined down to ``final_step``."""

    center: complex
    half_width: float
    coarse_step: float
    final_step: float = 1e-3
    refinement_factor: int = 10

    def __post_init__(self):
        if not np.isfinite(self.center):
            raise ValueError("grid center must be finite")
        for name in ("half_width", "coarse_step", "final_step"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if self.final_step > self.coarse_step:
            raise ValueError("final_step must not exceed coarse_step")
        if self.half_width < self.coarse_step:
            raise ValueError("half_width must be at least coarse_step")
        if int(self.refinement_factor) != self.refinement_factor or self.refinement_factor < 2:
            raise ValueError("refinement_factor must be an integer >= 2")

    @classmethod
    def around(cls, center, scale=3.0, divisions=50, final_step=1e-3, refinement_factor=10):
        """Search square of half-width ``scale * (|center| + 1)`` with ``divisions`` coarse steps per half-width."""
        half_width = scale * (abs(center) + 1.0)
        coarse = max(half_width / divisions, final_step)
        return cls(complex(center), half_width, coarse, final_step, refinement_factor)

    def steps(self):
        """Step sizes of the successive stages, ending exactly at ``final_step``."""
        out = [self.coarse_step]
        while out[-1] > self.final_step:
            out.append(max(out[-1] / self.refinement_factor, self.final_step))
        return out


@dataclass
class EstimationResult:
    a_hat: complex
    b_mag_hat: float | None = None
    sigma_o2_hat: float | None = None
    phi_b_hat: float | None = None
    objective_value: float | None = None
    grid_resolution: float | None = None


def _square(center, half_width, step):
    k = int(math.ceil(half_width / step - 1e-9))
    offsets = step * np.arange(-k, k + 1)
    # real part is the slow axis: flat order is lexicographic in (re, im)
    re, im = np.meshgrid(center.real + offsets, center.imag + offsets, indexing="ij")
    return (re + 1j * im).ravel()


def _argmin_lex(points, values):
    best = values.min()
    ties = np.flatnonzero(values == best)
    if ties.size > 1:
        cand = points[ties]
        ties = ties[np.lexsort((cand.imag, cand.real))]
    return ties[0]


def grid_search(objective, grid, n_starts=1):
    """Minimise a vectorised objective over ``grid``.

    ``objective`` maps a 1-D complex array of candidates to their values.
    Each stage scans a square of half-width equal to the previous step around
    the incumbent, at the next finer step.  With ``n_starts > 1`` the best
    ``n_starts`` coarse points are each refined and the lowest end point wins.
    Ties go to the smallest ``(real, imag)`` point.

    Returns
    -------
    (u, value) : complex, float
    """
    steps = grid.steps()
    points = _square(grid.center, grid.half_width, steps[0])
    values = np.asarray(objective(points), dtype=float)
    if n_starts <= 1:
        seeds = [points[_argmin_lex(points, values)]]
    else:
        order = np.lexsort((points.imag, points.real, values))
        seeds = list(points[order[:n_starts]])

    finals = []
    for u in seeds:
        value = None
        for prev, step in zip(steps[:-1], steps[1:]):
            cand = _square(u, prev, step)
            vals = np.asarray(objective(cand), dtype=float)
            i = _argmin_lex(cand, vals)
            u, value = cand[i], vals[i]
        if value is None:
            value = float(objective(np.array([u]))[0])
        finals.append((float(value), u.real, u.imag, u))
    finals.sort(key=lambda t: t[:3])
    value, _, _, u = finals[0]
    return complex(u), value
