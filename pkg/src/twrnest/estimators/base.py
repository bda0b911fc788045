"""scikit-learn style channel estimators.

Every estimator follows the same protocol::

    est = DMLEstimator(amplification=A, order=4).fit(z, t1, pilot_indices, x2_pilots)
    est.a_            # self-interference channel estimate
    est.transform(z, t1)   # samples with self-interference removed
    est.predict(z, t1)     # detected remote symbols

``get_params``/``set_params``/``clone`` come from :class:`sklearn.base.BaseEstimator`.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from ..model import PskAlphabet
from ..validation import check_pilots, check_positive, check_samples
from .blind import dml_estimate, estimate_b_mag, gml_estimate, mcml_estimate
from .detection import detect_symbols, resolve_from_block, vv_phase_estimate
from .grid import GridSpec
from .training import ls_estimate

__all__ = ["DMLEstimator", "GMLEstimator", "MCMLEstimator", "LSEstimator"]


class _ChannelEstimator(BaseEstimator):
    def transform(self, z, t1):
        """Remove the estimated self-interference ``A * a_ * t1`` from ``z``."""
        check_is_fitted(self, "a_")
        z, t1 = check_samples(z, t1)
        return z - self.amplification * self.a_ * t1

    def predict(self, z, t1):
        """Detect the remote symbols using ``a_`` and ``phi_b_``."""
        check_is_fitted(self, "a_")
        if getattr(self, "phi_b_", None) is None:
            raise NotFittedError(f"{type(self).__name__} has no phase estimate of b")
        alphabet = PskAlphabet(self.order, self.power)
        return detect_symbols(z, t1, self.a_, self.phi_b_, self.amplification, alphabet)

    def _blind_phase(self, z, t1, pilot_indices, x2_pilots):
        # Viterbi-Viterbi leaves an M-fold ambiguity; pilots resolve it when present
        phi = vv_phase_estimate(z - self.amplification * self.a_ * t1, self.order)
        if pilot_indices is None or len(np.atleast_1d(pilot_indices)) == 0:
            return phi
        return resolve_from_block(
            phi, self.order, z, t1, pilot_indices, x2_pilots, self.a_, self.b_mag_, self.amplification
        )


class DMLEstimator(_ChannelEstimator):
    """Blind deterministic-ML estimator: minimise the envelope variance of the cleaned samples.

    Parameters
    ----------
    amplification : float
        Relay gain ``A``.
    order : int
        PSK order, used for phase recovery and detection.
    power : float
        Remote transmit power ``P2``.
    final_step : float
        Resolution of the last grid stage.
    refinement_factor : int
        Step reduction between grid stages.
    grid_divisions : int
        Coarse steps per half-width of the first stage.
    grid_scale : float
        First-stage half-width is ``grid_scale * (|a_gml| + 1)``.
    n_starts : int
        Number of coarse candidates refined independently.
    """

    def __init__(self, amplification=1.0, order=4, power=1.0, final_step=1e-3, refinement_factor=10,
                 grid_divisions=50, grid_scale=3.0, n_starts=1):
        self.amplification = amplification
        self.order = order
        self.power = power
        self.final_step = final_step
        self.refinement_factor = refinement_factor
        self.grid_divisions = grid_divisions
        self.grid_scale = grid_scale
        self.n_starts = n_starts

    def _grid(self, z, t1):
        return GridSpec.around(
            gml_estimate(z, t1, self.amplification),
            scale=self.grid_scale,
            divisions=self.grid_divisions,
            final_step=self.final_step,
            refinement_factor=self.refinement_factor,
        )

    def fit(self, z, t1, pilot_indices=None, x2_pilots=None):
        z, t1 = check_samples(z, t1, min_samples=2)
        check_positive("amplification", self.amplification)
        res = dml_estimate(z, t1, self.amplification, self.power, self._grid(z, t1), self.n_starts)
        self.a_ = res.a_hat
        self.b_mag_ = res.b_mag_hat
        self.sigma_o2_ = res.sigma_o2_hat
        self.objective_ = res.objective_value
        self.n_samples_ = z.size
        self.phi_b_ = self._blind_phase(z, t1, pilot_indices, x2_pilots)
        return self


class MCMLEstimator(DMLEstimator):
    """Pilot-assisted constrained-ML estimator for BPSK.

    ``fit`` requires at least one pilot; ``phi_b_`` is the pilot phase
    estimate at the fitted channel.
    """

    def __init__(self, amplification=1.0, power=1.0, final_step=1e-3, refinement_factor=10,
                 grid_divisions=50, grid_scale=3.0, n_starts=1):
        super().__init__(amplification=amplification, order=2, power=power, final_step=final_step,
                         refinement_factor=refinement_factor, grid_divisions=grid_divisions,
                         grid_scale=grid_scale, n_starts=n_starts)

    def fit(self, z, t1, pilot_indices=None, x2_pilots=None):
        z, t1 = check_samples(z, t1)
        idx, x2 = check_pilots(pilot_indices, x2_pilots, z.size)
        check_positive("amplification", self.amplification)
        res = mcml_estimate(z, t1, idx, x2, self.amplification, self.power, self._grid(z, t1), self.n_starts)
        self.a_ = res.a_hat
        self.b_mag_ = res.b_mag_hat
        self.phi_b_ = res.phi_b_hat
        self.objective_ = res.objective_value
        self.n_samples_ = z.size
        return self


class GMLEstimator(_ChannelEstimator):
    """Gaussian-ML correlator estimate of ``a``; supports online updates via ``partial_fit``."""

    def __init__(self, amplification=1.0, order=4, power=1.0):
        self.amplification = amplification
        self.order = order
        self.power = power

    def fit(self, z, t1, pilot_indices=None, x2_pilots=None):
        z, t1 = check_samples(z, t1)
        check_positive("amplification", self.amplification)
        self.correlation_ = complex(np.vdot(t1, z))
        self.energy_ = float(np.vdot(t1, t1).real)
        self.a_ = gml_estimate(z, t1, self.amplification)
        self.b_mag_ = estimate_b_mag(self.a_, z, t1, self.amplification, self.power)
        self.n_samples_ = z.size
        self.phi_b_ = self._blind_phase(z, t1, pilot_indices, x2_pilots)
        return self

    def partial_fit(self, z, t1):
        """Fold new samples into the running correlator; only ``a_`` is updated."""
        z, t1 = check_samples(z, t1)
        check_positive("amplification", self.amplification)
        if not hasattr(self, "correlation_"):
            self.correlation_, self.energy_, self.n_samples_ = 0j, 0.0, 0
        self.correlation_ += complex(np.vdot(t1, z))
        self.energy_ += float(np.vdot(t1, t1).real)
        self.n_samples_ += z.size
        self.a_ = self.correlation_ / (self.amplification * self.energy_)
        return self


class LSEstimator(_ChannelEstimator):
    """Training-based least squares on the pilot positions only."""

    def __init__(self, amplification=1.0, order=4, power=1.0):
        self.amplification = amplification
        self.order = order
        self.power = power

    def fit(self, z, t1, pilot_indices=None, x2_pilots=None):
        z, t1 = check_samples(z, t1)
        idx, x2 = check_pilots(pilot_indices, x2_pilots, z.size, min_pilots=2)
        self.a_, self.b_ = ls_estimate(z[idx], t1[idx], x2, self.amplification)
        self.b_mag_ = abs(self.b_)
        self.phi_b_ = float(np.mod(np.angle(self.b_), 2 * np.pi))
        self.n_samples_ = z.size
        return self
