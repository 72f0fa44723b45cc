import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from elastobayes.prior import CircleGuess, MaternParams, PriorHyper, build_prior, matern_cov_distance, matern_matrix
from elastobayes.shapes import PIECEWISE, SMOOTH


def test_smooth_prior_mean_and_variances():
    p = build_prior([CircleGuess(5.0, -3.0, 0.5)], SMOOTH, 5)
    assert p.n == 14 and p.L == 1
    assert p.mean[:3].tolist() == [5.0, -3.0, 0.5]
    assert p.mean[-1] == pytest.approx(1.69)
    v = np.diag(p.cov)
    assert v[:3].tolist() == [0.1, 0.1, 0.1]
    assert v[3] == v[4] == pytest.approx(0.1 / 8)
    assert v[11] == v[12] == pytest.approx(0.1 / 26**3)
    assert v[-1] == 400.0


def test_multiple_circles_block_diagonal():
    p = build_prior([CircleGuess(2, -2, 0.5), CircleGuess(7, -3, 0.4)], SMOOTH, 2)
    assert p.n == 16
    assert np.all(p.cov[:8, 8:] == 0)


def test_piecewise_prior_coordinates():
    p = build_prior([CircleGuess(5.0, -3.0, 0.5)], PIECEWISE, 8)
    assert p.n == 11
    assert np.allclose(p.mean[2:10], np.log(0.5))
    assert p.mean[-1] == pytest.approx(np.log(1.69))
    nu = p.nu0
    assert np.allclose(nu.blocks[0, 2:10], 0.5)
    assert np.allclose(p.to_sampling(nu), p.mean)


def test_matern_three_halves_closed_form():
    p = MaternParams(1.5, 0.5, 0.2)
    d = np.array([0.0, 0.3, 1.2])
    x = np.sqrt(3) * d / 0.5
    assert np.allclose(matern_cov_distance(d, p), 0.04 * (1 + x) * np.exp(-x))
    # the general Bessel branch agrees at nu = 1.5 + tiny
    q = MaternParams(1.5 + 1e-7, 0.5, 0.2)
    assert np.allclose(matern_cov_distance(d, q), matern_cov_distance(d, p), rtol=1e-5)


@settings(max_examples=15, deadline=None)
@given(Z=st.integers(3, 60), nu=st.sampled_from([0.5, 1.5, 2.5]), rho=st.floats(0.1, 2.0))
def test_matern_matrix_is_covariance(Z, nu, rho):
    C = matern_matrix(Z, MaternParams(nu, rho, 0.3))
    assert np.allclose(C, C.T)
    assert np.allclose(np.diag(C), 0.09)
    assert np.linalg.eigvalsh(C).min() > -1e-10


def test_logpdf_matches_scipy():
    p = build_prior([CircleGuess(5.0, -3.0, 0.5)], PIECEWISE, 5)
    x = p.mean + 0.1
    assert p.logpdf_sampling(x) == pytest.approx(multivariate_normal(p.mean, p.cov).logpdf(x), rel=1e-10)


def test_sample_moments():
    p = build_prior([CircleGuess(5.0, -3.0, 0.5)], SMOOTH, 2, PriorHyper(var_mu=1.0))
    X = p.sample(np.random.default_rng(0), 20000)
    sd = np.sqrt(np.diag(p.cov))
    tol = 5.0 / np.sqrt(X.shape[0])  # about five standard errors
    assert np.all(np.abs(X.mean(0) - p.mean) / sd < tol)
    assert np.all(np.abs(np.cov(X.T) / np.outer(sd, sd) - np.eye(p.n)) < tol * np.sqrt(2))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        CircleGuess(0, 0, 0.0)
    with pytest.raises(ValueError):
        build_prior([])
    with pytest.raises(ValueError):
        MaternParams(rho_length=-1)
