import itertools
import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import make_block, noiseless_block
from twrnest.estimators import (
    DMLEstimator,
    GMLEstimator,
    GridSpec,
    LSEstimator,
    MCMLEstimator,
    ambiguity_candidates,
    detect_symbols,
    dml_estimate,
    dml_objective,
    estimate_b_mag,
    gml_estimate,
    grid_search,
    ls_estimate,
    mcml_estimate,
    mcml_objective,
    mcml_pilots,
    orthogonal_pilots,
    resolve_ambiguity,
    vv_phase_estimate,
)
from twrnest.model import PskAlphabet, SystemParams, generate_channels, synthesize_block


# ---------------------------------------------------------------- grid search

def test_grid_steps_end_at_final():
    grid = GridSpec(0j, 3.0, 0.06, final_step=1e-3)
    steps = grid.steps()
    assert steps[0] == 0.06 and steps[-1] == 1e-3
    assert all(s1 > s2 for s1, s2 in zip(steps, steps[1:]))


def test_grid_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(complex(np.nan), 1.0, 0.1)
    with pytest.raises(ValueError):
        GridSpec(0j, 1.0, 0.1, final_step=0.5)
    with pytest.raises(ValueError):
        GridSpec(0j, 1.0, 0.1, refinement_factor=1)


def test_grid_search_quadratic():
    target = 0.4321 - 1.2345j
    u, value = grid_search(lambda u: np.abs(u - target) ** 2, GridSpec.around(0j))
    assert abs(u - target) <= 1e-3
    assert value == pytest.approx(abs(u - target) ** 2)


def test_grid_search_tie_breaks_lexicographically():
    u, _ = grid_search(lambda u: np.zeros(u.shape), GridSpec(0j, 1.0, 0.5, final_step=0.5))
    assert u == -1 - 1j


# ---------------------------------------------------------------- DML / GML

def _naive_dml(u, z, t1, A):
    return statistics.variance([abs(zi - A * u * ti) for zi, ti in zip(z, t1)])


def test_dml_objective_matches_naive(rng):
    block, params, _ = make_block(rng, N=12)
    for u in (0j, 0.3 - 0.7j, 2.0 + 1.0j):
        assert dml_objective(u, block.z, block.t1, params.A) == pytest.approx(
            _naive_dml(u, block.z, block.t1, params.A), rel=1e-12)
    us = np.array([0.1j, -0.5 + 0.2j])
    np.testing.assert_allclose(dml_objective(us, block.z, block.t1, params.A),
                               [_naive_dml(u, block.z, block.t1, params.A) for u in us], rtol=1e-12)


def test_dml_brute_force_small_block(rng):
    block, params, _ = make_block(rng, N=3, snr_db=10)
    res = dml_estimate(block.z, block.t1, params.A)
    # dense brute force over a box holding the grid search's region
    g = gml_estimate(block.z, block.t1, params.A)
    hw = 3 * (abs(g) + 1)
    ax = np.arange(-hw, hw + 1e-9, hw / 400)
    cand = (g + ax[:, None] + 1j * ax[None, :]).ravel()
    brute = dml_objective(cand, block.z, block.t1, params.A).min()
    assert res.objective_value <= brute + 1e-12


def test_dml_noiseless_recovers_a(rng):
    hits = 0
    for _ in range(10):
        z, t1, t2, params, d = noiseless_block(rng, 4, 30)
        res = dml_estimate(z, t1, params.A)
        hits += abs(res.a_hat - d.a) <= 2e-3
        assert res.objective_value == pytest.approx(0.0, abs=1e-4)
    assert hits == 10


def test_dml_fills_b_mag_and_noise(rng):
    block, params, d = make_block(rng, N=200, snr_db=30)
    res = dml_estimate(block.z, block.t1, params.A, params.P2)
    assert res.b_mag_hat == pytest.approx(abs(d.b), rel=0.05)
    assert res.sigma_o2_hat >= 0
    assert res.grid_resolution == 1e-3
    assert res.phi_b_hat is None


def test_dml_scale_covariance(rng):
    block, params, _ = make_block(rng, N=40, snr_db=20)
    c = np.exp(1j * 0.7)
    u = 0.3 - 0.4j
    assert dml_objective(c * u, c * block.z, block.t1, params.A) == pytest.approx(
        dml_objective(u, block.z, block.t1, params.A), rel=1e-10)
    a0 = dml_estimate(block.z, block.t1, params.A).a_hat
    a1 = dml_estimate(c * block.z, block.t1, params.A).a_hat
    assert abs(a1 - c * a0) <= 3e-3


def test_gml_matches_formula(rng):
    block, params, _ = make_block(rng, N=10)
    ref = sum(np.conj(t) * z for t, z in zip(block.t1, block.z)) / (params.A * sum(abs(t) ** 2 for t in block.t1))
    assert gml_estimate(block.z, block.t1, params.A) == pytest.approx(ref)


def test_gml_unbiased_and_one_over_n():
    rng = np.random.default_rng(11)
    ch = generate_channels(rng)
    params = SystemParams.from_snr(10.0)
    a = ch.h1 * ch.h2
    mse = {}
    for N in (20, 80):
        errs = np.array([gml_estimate(*(lambda b: (b.z, b.t1))(synthesize_block(rng, ch, params, 4, N)),
                                      params.A) - a for _ in range(4000)])
        assert abs(errs.mean()) < 4 * np.abs(errs).std() / math.sqrt(errs.size)
        mse[N] = np.mean(np.abs(errs) ** 2)
    assert mse[20] / mse[80] == pytest.approx(4.0, rel=0.12)


def test_b_mag_noiseless_exact(rng):
    z, t1, _, params, d = noiseless_block(rng, 4, 10)
    assert estimate_b_mag(d.a, z, t1, params.A) == pytest.approx(abs(d.b))


# ---------------------------------------------------------------- LS

def test_ls_matches_normal_equations(rng):
    s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    x1 = PskAlphabet(4).points[rng.integers(4, size=6)]
    x2 = PskAlphabet(4).points[rng.integers(4, size=6)]
    A = 0.8
    X = A * np.column_stack([x1, x2])
    coef = np.linalg.solve(X.conj().T @ X, X.conj().T @ s)
    a, b = ls_estimate(s, x1, x2, A)
    assert a == pytest.approx(coef[0]) and b == pytest.approx(coef[1])


def test_ls_noiseless_exact():
    pilots = orthogonal_pilots(4, 4)
    a, b, A = 0.3 - 0.2j, -1.1 + 0.5j, 0.9
    s = A * (a * pilots.x1 + b * pilots.x2)
    a_hat, b_hat = ls_estimate(s, pilots.x1, pilots.x2, A)
    assert a_hat == pytest.approx(a) and b_hat == pytest.approx(b)


def test_ls_errors():
    x = PskAlphabet(4).points[:1]
    with pytest.raises(ValueError):
        ls_estimate([1.0], x, x, 1.0)
    p = PskAlphabet(4).points[0]
    with pytest.raises(ValueError):
        ls_estimate([1.0, 2.0], [p, p], [p, p], 1.0)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_orthogonal_pilots(M):
    pilots = orthogonal_pilots(4, M)
    assert abs(np.vdot(pilots.x1, pilots.x2)) < 1e-12
    assert PskAlphabet(M).contains(pilots.x1) and PskAlphabet(M).contains(pilots.x2)


# ---------------------------------------------------------------- phase recovery

@pytest.mark.parametrize("M", [2, 4, 8])
def test_vv_recovers_phase_modulo(M):
    rng = np.random.default_rng(M)
    phi_b = 1.234
    t2 = PskAlphabet(M).points[rng.integers(M, size=50)]
    est = vv_phase_estimate(0.7 * np.exp(1j * phi_b) * t2, M)
    step = 2 * np.pi / M
    diff = np.mod(est - phi_b + step / 2, step) - step / 2
    assert abs(diff) < 1e-12


def test_vv_rejects_zero_residuals():
    with pytest.raises(ValueError):
        vv_phase_estimate(np.zeros(4), 4)


def test_ambiguity_candidates():
    c = ambiguity_candidates(0.1, 4)
    np.testing.assert_allclose(np.diff(c), np.pi / 2)


@pytest.mark.parametrize("M", [2, 4])
def test_unique_word_resolution(M):
    pilots = orthogonal_pilots(2, M)
    a, b, A = 0.2 + 0.1j, 0.8 * np.exp(1j * 2.5), 1.0
    s = A * (a * pilots.x1 + b * pilots.x2)
    cand = ambiguity_candidates(np.mod(2.5, 2 * np.pi / M), M)
    assert resolve_ambiguity(cand, s, pilots.x1, pilots.x2, a, abs(b), A) == pytest.approx(2.5)


@pytest.mark.parametrize("M", [2, 4, 8])
def test_detection_undoes_rotation(M):
    rng = np.random.default_rng(30 + M)
    z, t1, t2, params, d = noiseless_block(rng, M, 40)
    detected = detect_symbols(z, t1, d.a, d.phi_b, params.A, PskAlphabet(M))
    np.testing.assert_allclose(detected, t2, atol=1e-12)


# ---------------------------------------------------------------- MCML

def _exhaustive_cml(u, z, t1, phi_b, A):
    # min over BPSK t2 in {+-j} and |b| >= 0 of sum|r - A|b| e^{j phi_b} t2|^2
    r = z - A * u * t1
    best = np.inf
    for signs in itertools.product((1.0, -1.0), repeat=z.size):
        t2 = 1j * np.array(signs)
        direction = A * np.exp(1j * phi_b) * t2
        c = max(0.0, np.sum((r * np.conj(direction)).real) / np.sum(np.abs(direction) ** 2))
        best = min(best, np.sum(np.abs(r - c * direction) ** 2))
    return best


@pytest.mark.parametrize("N", [3, 5, 8])
def test_mcml_objective_matches_exhaustive(N):
    rng = np.random.default_rng(N)
    block, params, _ = make_block(rng, M=2, N=N, snr_db=10, pilots=mcml_pilots(2))
    idx, x2 = block.pilot_indices, block.x2_pilots
    for u in (0j, 0.4 - 0.3j, -1.0 + 0.8j):
        r_pilot = block.z[idx] - params.A * u * block.t1[idx]
        phi = np.angle(np.sum(r_pilot * np.conj(x2)))
        got = mcml_objective(u, block.z, block.t1, idx, x2, params.A)
        assert got == pytest.approx(_exhaustive_cml(u, block.z, block.t1, phi, params.A), rel=1e-10, abs=1e-12)


def test_mcml_noiseless_zero_at_truth(rng):
    pilots = mcml_pilots(2)
    z, t1, t2, params, d = noiseless_block(rng, 2, 20)
    t1[:2], t2[:2] = pilots.x1, pilots.x2
    z = params.A * (d.a * t1 + d.b * t2)
    val = mcml_objective(d.a, z, t1, [0, 1], pilots.x2, params.A)
    assert abs(val) <= 1e-12 * np.sum(np.abs(z) ** 2)
    res = mcml_estimate(z, t1, [0, 1], pilots.x2, params.A)
    assert abs(res.a_hat - d.a) <= 2e-3
    assert res.b_mag_hat == pytest.approx(abs(d.b), abs=5e-3)
    assert np.angle(np.exp(1j * (res.phi_b_hat - d.phi_b))) == pytest.approx(0.0, abs=5e-3)


def test_mcml_rejects_non_bpsk(rng):
    block, params, _ = make_block(rng, M=4, N=20, pilots=orthogonal_pilots(2, 4))
    with pytest.raises(ValueError):
        mcml_estimate(block.z, block.t1, block.pilot_indices, block.x2_pilots, params.A)


# ---------------------------------------------------------------- estimator objects

def test_sklearn_protocol(rng):
    est = DMLEstimator(amplification=0.9, order=4, final_step=1e-2)
    params = est.get_params()
    assert params["amplification"] == 0.9 and params["final_step"] == 1e-2
    twin = clone(est).set_params(order=8)
    assert twin.order == 8 and est.order == 4
    assert "order" not in MCMLEstimator().get_params()
    with pytest.raises(NotFittedError):
        est.transform([1.0], [1.0])


def test_dml_estimator_end_to_end(rng):
    pilots = orthogonal_pilots(2, 4)
    block, params, d = make_block(rng, M=4, N=60, snr_db=35, pilots=pilots)
    est = DMLEstimator(amplification=params.A, order=4).fit(block.z, block.t1, block.pilot_indices,
                                                               block.x2_pilots)
    assert abs(est.a_ - d.a) < 0.05
    cleaned = est.transform(block.z, block.t1)
    np.testing.assert_allclose(cleaned, block.z - params.A * est.a_ * block.t1)
    detected = est.predict(block.z, block.t1)
    assert np.mean(detected == block.t2_true) > 0.95


def test_dml_estimator_without_pilots_has_ambiguous_phase(rng):
    block, params, d = make_block(rng, M=4, N=60, snr_db=35)
    est = DMLEstimator(amplification=params.A).fit(block.z, block.t1)
    assert 0 <= est.phi_b_ < np.pi / 2


def test_gml_partial_fit_equals_fit(rng):
    block, params, _ = make_block(rng, N=40)
    full = GMLEstimator(amplification=params.A).fit(block.z, block.t1)
    online = GMLEstimator(amplification=params.A)
    for lo in range(0, 40, 10):
        online.partial_fit(block.z[lo:lo + 10], block.t1[lo:lo + 10])
    assert online.a_ == pytest.approx(full.a_)
    assert online.n_samples_ == 40


def test_ls_estimator(rng):
    block, params, d = make_block(rng, M=4, N=20, snr_db=60, pilots=orthogonal_pilots(4, 4))
    est = LSEstimator(amplification=params.A).fit(block.z, block.t1, block.pilot_indices, block.x2_pilots)
    assert est.a_ == pytest.approx(d.a, abs=1e-2) and est.b_ == pytest.approx(d.b, abs=1e-2)
    np.testing.assert_allclose(est.predict(block.z, block.t1), block.t2_true)


def test_mcml_estimator_requires_pilots(rng):
    block, params, _ = make_block(rng, M=2, N=20)
    with pytest.raises(ValueError):
        MCMLEstimator(amplification=params.A).fit(block.z, block.t1)


@pytest.mark.parametrize("bad", [dict(z=[1.0, np.nan], t1=[1.0, 1.0]), dict(z=[1.0, 2.0], t1=[1.0]),
                                 dict(z=[[1.0]], t1=[[1.0]])])
def test_input_validation(bad):
    with pytest.raises(ValueError):
        GMLEstimator().fit(bad["z"], bad["t1"])


def test_non_positive_amplification():
    with pytest.raises(ValueError):
        GMLEstimator(amplification=0.0).fit([1.0, 2.0], [1.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=-np.pi, max_value=np.pi), st.integers(min_value=0, max_value=2 ** 31))
def test_objective_rotation_invariance(theta, seed):
    rng = np.random.default_rng(seed)
    block, params, _ = make_block(rng, N=15, snr_db=15)
    c = np.exp(1j * theta)
    u = complex(rng.standard_normal(), rng.standard_normal())
    assert dml_objective(c * u, c * block.z, block.t1, params.A) == pytest.approx(
        dml_objective(u, block.z, block.t1, params.A), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("N", [4, 8])
def test_mcml_noiseless_recovery_exhaustive(N):
    # every BPSK data sequence of the remote terminal, with distinct-product pilots
    rng = np.random.default_rng(40 + N)
    pilots = mcml_pilots(2)
    alphabet = PskAlphabet(2)
    for trial, data in enumerate(itertools.product(range(2), repeat=N - 2)):
        t1 = alphabet.points[rng.integers(2, size=N)]
        t2 = alphabet.points[[0, 0, *data]]
        t1[:2], t2[:2] = pilots.x1, pilots.x2
        _, _, _, params, d = noiseless_block(rng, 2, N)
        z = params.A * (d.a * t1 + d.b * t2)
        res = mcml_estimate(z, t1, [0, 1], pilots.x2, params.A)
        assert abs(res.a_hat - d.a) <= 2e-3, (trial, data)
