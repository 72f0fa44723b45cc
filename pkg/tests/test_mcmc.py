import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from elastobayes import mcmc
from elastobayes.errors import ConfigurationError, InitializationError
from elastobayes.mcmc import AIES, SAIES, SamplerConfig
from elastobayes.prior import CircleGuess, build_prior
from elastobayes.shapes import SMOOTH

COV = np.array([[1.0, 0.6], [0.6, 0.5]])
PREC = np.linalg.inv(COV)
MEAN = np.array([1.0, -2.0])


def gauss(X):
    R = np.atleast_2d(X) - MEAN
    return -0.5 * np.einsum("ij,jk,ik->i", R, PREC, R)


def std_normal(X):
    X = np.atleast_2d(X)
    return -0.5 * np.sum(X * X, axis=1)


def start(W, d=2, seed=5):
    return np.random.default_rng(seed).standard_normal((W, d))


def test_stretch_density():
    z = mcmc.draw_stretch(2.0, np.random.default_rng(0), 20000)
    assert z.min() >= 0.5 and z.max() <= 2.0
    s = np.sqrt(2.0)
    cdf = lambda v: (np.sqrt(v) - 1 / s) / (s - 1 / s)  # noqa: E731
    assert stats.kstest(z, cdf).pvalue > 1e-3
    assert mcmc.draw_stretch(2.0, u=np.array([0.0, 1.0])).tolist() == pytest.approx([0.5, 2.0])
    with pytest.raises(ValueError):
        mcmc.draw_stretch(1.0, u=0.5)


@pytest.mark.parametrize("kind,mode", [(SAIES, "sequential"), (SAIES, "halves"), (AIES, "sequential"), (AIES, "halves")])
def test_samples_correlated_gaussian(kind, mode):
    cfg = SamplerConfig(kind=kind, W=16, S=24000, mode=mode, rng_seed=3)
    ch = mcmc.run(cfg, gauss, init=start(16))
    P = ch.post_burn()
    assert np.allclose(P.mean(0), MEAN, atol=0.1)
    assert np.allclose(np.cov(P.T), COV, atol=0.1)
    assert 0.2 < ch.acceptance_rate.mean() < 0.95


def test_reflected_proposal_is_available():
    cfg = SamplerConfig(W=8, S=6, proposal="reflected")
    ch = mcmc.run(cfg, gauss, init=start(8))
    assert ch.samples.shape == (8, 2, 2)
    xw, xq = np.array([1.0, 0.0]), np.array([0.0, 0.0])
    assert mcmc._stretch_proposal(xw, xq, 2.0, "reflected").tolist() == [3.0, 0.0]
    assert mcmc._stretch_proposal(xw, xq, 2.0, "standard").tolist() == [2.0, 0.0]


@pytest.mark.parametrize("kind", [SAIES, AIES])
@pytest.mark.parametrize("mode", ["sequential", "halves"])
def test_same_seed_same_chain(kind, mode):
    cfg = SamplerConfig(kind=kind, W=8, S=30, mode=mode, rng_seed=11)
    a = mcmc.run(cfg, gauss, init=start(8))
    b = mcmc.run(cfg, gauss, init=start(8))
    c = mcmc.run(SamplerConfig(kind=kind, W=8, S=30, mode=mode, rng_seed=12), gauss, init=start(8))
    assert np.array_equal(a.samples, b.samples) and np.array_equal(a.log_post, b.log_post)
    assert not np.array_equal(a.samples, c.samples)


@pytest.mark.parametrize("kind", [SAIES, AIES])
@pytest.mark.parametrize("mode", ["sequential", "halves"])
def test_affine_equivariance_exact_for_power_of_two_scaling(kind, mode):
    D = np.array([4.0, 0.25, 0.5])

    def scaled(Y):
        return std_normal(np.atleast_2d(Y) / D)

    cfg = SamplerConfig(kind=kind, W=10, S=60, mode=mode, rng_seed=2)
    X0 = start(10, 3)
    a = mcmc.run(cfg, std_normal, init=X0)
    b = mcmc.run(cfg, scaled, init=X0 * D)
    assert np.array_equal(b.samples, a.samples * D)
    assert np.array_equal(a.accepted, b.accepted)


@pytest.mark.parametrize("kind", [SAIES, AIES])
def test_affine_equivariance_general_map(kind):
    A = np.array([[2.0, 0.3], [-0.7, 1.1]])
    b0 = np.array([3.0, -1.0])
    Ainv = np.linalg.inv(A)

    def moved(Y):
        return gauss((np.atleast_2d(Y) - b0) @ Ainv.T)

    cfg = SamplerConfig(kind=kind, W=8, S=40, rng_seed=4)
    X0 = start(8)
    a = mcmc.run(cfg, gauss, init=X0)
    b = mcmc.run(cfg, moved, init=X0 @ A.T + b0)
    assert np.array_equal(a.accepted, b.accepted)
    assert np.allclose(b.samples, a.samples @ A.T + b0, atol=1e-9)


def test_support_is_respected():
    def half_plane(X):
        X = np.atleast_2d(X)
        return np.where(X[:, 0] > 0, std_normal(X), -np.inf)

    ch = mcmc.run(SamplerConfig(W=12, S=300, rng_seed=0), half_plane, init=np.abs(start(12)) + 0.01)
    assert np.all(ch.samples[..., 0] > 0)
    assert np.all(np.isfinite(ch.log_post))


def test_thinning_and_burn_in():
    cfg = SamplerConfig(W=6, S=31, thin=3, burn_fraction=0.2)
    assert (cfg.kept, cfg.burn_in) == (10, 2)
    ch = mcmc.run(cfg, gauss, init=start(6))
    assert ch.samples.shape == (6, 10, 2) and ch.raw_steps == 30
    assert ch.post_burn().shape == (48, 2)
    assert np.allclose(ch.log_post, gauss(ch.samples.reshape(-1, 2)).reshape(6, 10))


@settings(max_examples=20, deadline=None)
@given(W=st.integers(2, 8), S=st.integers(0, 5), thin=st.integers(1, 4))
def test_config_validation(W, S, thin):
    ok = S >= thin
    if ok:
        SamplerConfig(W=W, S=S, thin=thin)
    else:
        with pytest.raises(ConfigurationError):
            SamplerConfig(W=W, S=S, thin=thin)


@pytest.mark.parametrize("kw", [dict(kind="HMC"), dict(W=1), dict(kind=AIES, W=2), dict(a=1.0), dict(lam=-1),
                                dict(burn_fraction=1.0), dict(mode="parallel"), dict(proposal="walk"),
                                dict(W=5, mode="halves", kind=AIES)])
def test_config_rejects(kw):
    with pytest.raises(ConfigurationError):
        SamplerConfig(**kw)


def test_saies_needs_more_walkers_than_dimension():
    with pytest.raises(ConfigurationError):
        mcmc.run(SamplerConfig(W=3, S=3), std_normal, init=start(3, 2))


def test_bad_start_is_reported():
    X0 = start(4)
    X0[2] = np.nan
    with pytest.raises(InitializationError, match=r"\[2\]"):
        mcmc.run(SamplerConfig(W=4, S=3), lambda X: np.where(np.isnan(X).any(1), -np.inf, 0.0), init=X0)


def test_init_from_prior_is_admissible_or_explains():
    prior = build_prior([CircleGuess(2.0, -1.5, 0.5)], SMOOTH, 2, domain=(0, 4, -3, 0))
    X = mcmc.init_ensemble(prior, 6, np.random.default_rng(0))
    assert X.shape == (6, 8)
    tight = build_prior([CircleGuess(2.0, -1.5, 0.5)], SMOOTH, 2, domain=(1.9, 2.1, -1.6, -1.4))
    with pytest.raises(InitializationError, match="domain"):
        mcmc.init_ensemble(tight, 2, np.random.default_rng(0), max_tries=20)


def test_chain_csv_round_trip(tmp_path):
    ch = mcmc.run(SamplerConfig(W=6, S=15, thin=3), gauss, init=start(6))
    mcmc.write_chain_csv(tmp_path / "c.csv", ch)
    back = mcmc.read_chain_csv(tmp_path / "c.csv")
    assert np.allclose(back.samples, ch.samples, rtol=1e-11)
    assert np.array_equal(back.accepted, ch.accepted)
    assert back.burn_in == 1
    mcmc.write_diagnostics(tmp_path / "d.json", ch)
    diag = json.loads((tmp_path / "d.json").read_text())
    assert diag["W"] == 6 and len(diag["acceptance_rate"]) == 6


def test_empty_chain_file(tmp_path):
    (tmp_path / "c.csv").write_text("walker,step,log_post,accepted,p_0\n")
    with pytest.raises(ValueError):
        mcmc.read_chain_csv(tmp_path / "c.csv")
