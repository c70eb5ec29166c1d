import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.stats import norm

from reinbo.errors import ContractViolation, InputError
from reinbo.surrogate import (
    Design,
    GpSurrogate,
    HyperPolicy,
    argmax_ei,
    ei_from_moments,
    expected_improvement,
    fit,
    initial_design,
    posterior,
    propose_point,
    refit,
)

FIXED = HyperPolicy(optimize=False, lengthscale=0.2, signal_var=1.0)


def ei_monte_carlo(mu, sigma, y_best, n, rng):
    draws = np.maximum(rng.normal(mu, sigma, n) - y_best, 0.0)
    return draws.mean(), draws.std(ddof=1) / np.sqrt(n)


# --- design validation ----------------------------------------------------------

def test_design_checks():
    with pytest.raises(ContractViolation):
        Design(np.zeros((3, 1)), np.zeros(2))
    with pytest.raises(ContractViolation):
        Design(np.full((1, 1), 1.5), np.zeros(1))
    with pytest.raises(InputError):
        Design(np.zeros((1, 1)), np.array([np.nan]))


# --- fit / posterior ----------------------------------------------------------------

def test_single_point_interpolates():
    m = fit(Design([[0.4]], [0.7]), HyperPolicy(noise_var=1e-6))
    mu, var = posterior(m, [0.4])
    assert mu == pytest.approx(0.7, abs=1e-6)


def test_sine_interpolation():
    X = np.linspace(0.1, 0.9, 5)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    m = fit(Design(X, y), HyperPolicy(noise_var=1e-6))
    mu, _ = m.predict(X)
    assert np.max(np.abs(mu - y)) < 1e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.integers(0, 10**6))
def test_variance_at_training_points(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = rng.normal(size=n)
    m = fit(Design(X, y))
    mu, var = m.predict(X)
    assert np.all(var <= m.noise_var + 1e-6 + m.jitter)
    # interpolation within 10 * sigma_n, scaled by the signal amplitude
    assert np.max(np.abs(mu - y)) <= 10 * np.sqrt(m.noise_var) * max(1.0, np.sqrt(m.signal_var) * np.sqrt(n))


def test_prior_reversion():
    m = fit(Design([[0.1], [0.2]], [1.0, 3.0]), HyperPolicy(optimize=False, lengthscale=0.01, signal_var=2.0))
    mu, var = posterior(m, [0.9])
    assert mu == pytest.approx(2.0)  # prior mean = mean(y)
    assert var == pytest.approx(2.0)


def test_mirror_symmetry():
    X = np.array([[0.1], [0.3], [0.7], [0.9]])
    y = np.array([0.2, 0.5, 0.5, 0.2])
    m = fit(Design(X, y), FIXED)
    q = np.linspace(0, 1, 21)[:, None]
    mu, var = m.predict(q)
    mu_r, var_r = m.predict(1 - q)
    assert np.allclose(mu, mu_r, atol=1e-10) and np.allclose(var, var_r, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(1, 3), st.integers(0, 10**6))
def test_adding_point_never_increases_variance(n, d, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n + 1, d))
    y = rng.normal(size=n + 1)
    small = GpSurrogate(Design(X[:n], y[:n]), np.full(d, 0.3), 1.0, 1e-4)
    big = GpSurrogate(Design(X, y), np.full(d, 0.3), 1.0, 1e-4)
    Q = rng.random((50, d))
    assert np.all(big.predict(Q)[1] <= small.predict(Q)[1] + 1e-8)


def test_fit_deterministic(rng):
    X = rng.random((8, 2))
    y = rng.random(8)
    a = fit(Design(X, y))
    b = fit(Design(X, y))
    assert np.array_equal(a.lengthscales, b.lengthscales) and a.signal_var == b.signal_var
    q = rng.random((5, 2))
    assert np.array_equal(a.predict(q)[0], b.predict(q)[0])


def test_fallback_below_four_points():
    m = fit(Design([[0.1], [0.5], [0.9]], [1.0, 2.0, 4.0]))
    assert np.all(m.lengthscales == 0.3)
    assert m.signal_var == pytest.approx(np.var([1.0, 2.0, 4.0]))


def test_marginal_likelihood_picks_sensible_lengthscale():
    X = np.linspace(0, 1, 15)[:, None]
    smooth = fit(Design(X, np.sin(np.pi * X[:, 0])))
    wiggly = fit(Design(X, np.sin(12 * np.pi * X[:, 0])))
    assert smooth.lengthscales[0] > wiggly.lengthscales[0]


def test_refit_keeps_hyperparameters(rng):
    X = rng.random((6, 2))
    m = fit(Design(X, rng.random(6)))
    m2 = refit(m, Design(np.vstack([X, [[0.5, 0.5]]]), np.append(m.design.y, 0.3)))
    assert np.array_equal(m.lengthscales, m2.lengthscales) and m2.design.n == 7


def test_duplicate_points_need_jitter_but_fit():
    X = np.array([[0.5]] * 6)
    m = GpSurrogate(Design(X, np.ones(6)), np.array([0.3]), 1.0, 0.0)
    assert m.jitter > 0


def test_query_dimension_checked():
    m = fit(Design([[0.1, 0.2]], [1.0]))
    with pytest.raises(ContractViolation):
        posterior(m, [0.1])


# --- expected improvement --------------------------------------------------------

def test_ei_closed_form_at_zero_gap():
    assert float(ei_from_moments(0.0, 1.0, 0.0)) == pytest.approx(norm.pdf(0), abs=1e-12)
    assert float(ei_from_moments(0.0, 1.0, 0.0)) == pytest.approx(0.3989, abs=1e-4)


def test_ei_zero_sigma():
    assert float(ei_from_moments(0.3, 0.0, 0.5)) == 0.0
    assert float(ei_from_moments(0.7, 0.0, 0.5)) == pytest.approx(0.2)


def test_ei_matches_monte_carlo():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        mu, sigma, y_best = rng.normal(), rng.uniform(0.05, 2.0), rng.normal()
        est, se = ei_monte_carlo(mu, sigma, y_best, 1_000_000, rng)
        assert abs(float(ei_from_moments(mu, sigma, y_best)) - est) <= 3 * se + 1e-12


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(-5, 5))
def test_ei_nonnegative(mu, sigma, y_best):
    assert float(ei_from_moments(mu, sigma, y_best)) >= 0.0


def test_ei_zero_at_incumbent_training_point():
    X = np.array([[0.2], [0.6]])
    m = GpSurrogate(Design(X, [0.4, 0.9]), np.array([0.2]), 1.0, 1e-10)
    assert expected_improvement(m, np.array([0.6]), 0.9) < 1e-4


def test_proposal_is_candidate_argmax(rng):
    m = fit(Design([[0.1], [0.9]], [0.2, 0.8]), FIXED)
    cands = rng.random((500, 1))
    x = argmax_ei(m, cands, 0.8)
    ei = expected_improvement(m, cands, 0.8)
    assert expected_improvement(m, x, 0.8) >= ei.max() - 1e-15
    # duplicated candidates do not change the pick
    assert np.array_equal(argmax_ei(m, np.vstack([cands, cands]), 0.8), x)


def test_bo_finds_quadratic_maximum():
    f = lambda x: 1.0 - (x - 0.37) ** 2  # noqa: E731
    rng = np.random.default_rng(0)
    X = initial_design(1, 4, rng)
    y = f(X[:, 0])
    m = None
    for _ in range(20):
        m = fit(Design(X, y), warm_start=None if m is None else (m.lengthscales, m.signal_var))
        x = propose_point(m, y.max(), rng)
        X = np.vstack([X, x])
        y = np.append(y, f(x[0]))
    assert 1.0 - y.max() < 1e-2


# --- initial design --------------------------------------------------------------

def test_lhs_one_per_quarter(rng):
    x = initial_design(1, 4, rng)[:, 0]
    assert sorted(np.floor(x * 4).astype(int)) == [0, 1, 2, 3]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 30), st.integers(0, 10**6))
def test_lhs_stratified(d, n, seed):
    X = initial_design(d, n, np.random.default_rng(seed))
    assert X.shape == (n, d)
    assert np.all((X >= 0) & (X < 1))
    for j in range(d):
        assert sorted(np.floor(X[:, j] * n).astype(int)) == list(range(n))


def test_lhs_single_point(rng):
    X = initial_design(2, 1, rng)
    assert X.shape == (1, 2) and np.all((X >= 0) & (X <= 1))


@given(arrays(float, 3, elements=st.floats(-3, 3)), arrays(float, 3, elements=st.floats(0, 3)))
def test_ei_vectorised_matches_scalar(mu, sigma):
    vec = ei_from_moments(mu, sigma, 0.1)
    assert np.allclose(vec, [float(ei_from_moments(a, b, 0.1)) for a, b in zip(mu, sigma)])
