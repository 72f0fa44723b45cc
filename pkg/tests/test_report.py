import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastobayes import mcmc, report
from elastobayes.errors import ShapeMismatchError
from elastobayes.prior import CircleGuess, build_prior
from elastobayes.shapes import PIECEWISE, SMOOTH, AdmissibilityRule, circle, from_blocks, smooth_block


def fake_chain(W=4, K=10, d=3, burn=2, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((W, K, d))
    lp = rng.standard_normal((W, K))
    acc = np.ones((W, K), bool)
    return mcmc.Chain(X, lp, acc, np.full(W, K), K, burn)


def test_map_from_chain_ignores_burn_in():
    ch = fake_chain()
    ch.log_post[0, 0] = 100.0  # in burn-in
    ch.log_post[2, 5] = 50.0
    x, lp = report.map_from_chain(ch)
    assert lp == 50.0 and np.array_equal(x, ch.samples[2, 5])


def test_map_ties_prefer_earliest():
    ch = fake_chain()
    ch.log_post[:] = 1.0
    x, _ = report.map_from_chain(ch)
    assert np.array_equal(x, ch.samples[0, ch.burn_in])


def test_mean_shape():
    ch = fake_chain()
    assert np.allclose(report.mean_shape(ch), ch.samples[:, 2:].reshape(-1, 3).mean(0))
    empty = fake_chain(K=2, burn=2)
    with pytest.raises(ValueError):
        report.mean_shape(empty)
    with pytest.raises(ValueError):
        report.map_from_chain(empty)


@settings(max_examples=30, deadline=None)
@given(cx=st.floats(-5, 5), cy=st.floats(-5, 5), r=st.floats(0.1, 3))
def test_circle_statistics(cx, cy, r):
    s = report.block_stats(circle(cx, cy, r), SMOOTH, samples=1024)
    assert s["area"] == pytest.approx(np.pi * r * r, rel=1e-4)
    assert (s["cx"], s["cy"]) == pytest.approx((cx, cy), abs=1e-9 * (1 + abs(cx) + abs(cy)) + 1e-9)
    assert s["diam_max"] == pytest.approx(2 * r, rel=1e-4) and s["diam_min"] == pytest.approx(2 * r, rel=1e-4)
    assert abs(s["circularity_dev"]) < 1e-4
    assert s["r_min"] == pytest.approx(r) and s["r_max"] == pytest.approx(r)


def test_polygon_moments_of_rectangle():
    P = np.array([[0, 0], [4, 0], [4, 2], [0, 2]], float)
    A, c, perim, C = report.polygon_stats(P)
    assert A == 8 and c.tolist() == [2, 1] and perim == 12
    assert np.allclose(C, [[16 / 12, 0], [0, 4 / 12]])
    A2, *_ = report.polygon_stats(P[::-1])
    assert A2 == 8
    with pytest.raises(ValueError):
        report.polygon_stats(np.zeros((4, 2)))


@pytest.mark.parametrize("phi", [0.0, 0.4, 1.2, 2.9])
def test_orientation_of_tilted_shape(phi):
    # r = a0 + 2 a2 cos(2(t - phi)) elongates along phi
    a2, b2 = 0.1 * np.cos(2 * phi), 0.1 * np.sin(2 * phi)
    blk = smooth_block(0, 0, 1.0, a=[0.0, a2], b=[0.0, b2], Q=2)
    s = report.block_stats(blk, SMOOTH)
    assert s["orientation"] == pytest.approx(phi % np.pi, abs=1e-6)
    assert s["diam_max"] > s["diam_min"]
    assert s["circularity_dev"] > 0


def test_shape_stats_skips_inadmissible():
    good = from_blocks([circle(2, -2, 0.5), circle(6, -2, 0.4)])
    bad = from_blocks([circle(2, -2, -0.5), circle(6, -2, 0.4)])
    table, skipped = report.shape_stats([good, bad, good], AdmissibilityRule())
    assert skipped == 1
    assert table["sample"].tolist() == [0, 0, 2, 2] and table["block"].tolist() == [0, 1, 0, 1]


def test_membership_field():
    x = np.linspace(0, 4, 41)
    y = np.linspace(-3, 0, 31)
    a = from_blocks([circle(1, -1.5, 0.5)])
    b = from_blocks([circle(3, -1.5, 0.5)])
    mf = report.membership_field([a, a, b, from_blocks([circle(1, -1.5, -1)])], x, y, AdmissibilityRule())
    assert mf.n_samples == 3
    assert mf.values[15, 10] == pytest.approx(2 / 3) and mf.values[15, 30] == pytest.approx(1 / 3)
    assert mf.values[0, 0] == 0
    with pytest.raises(ValueError):
        report.membership_field([from_blocks([circle(1, -1.5, -1)])], x, y, AdmissibilityRule())


def test_jaccard():
    a = np.array([1, 1, 0, 0], bool)
    b = np.array([1, 0, 1, 0], bool)
    assert report.jaccard(a, b) == pytest.approx(1 / 3)
    assert report.jaccard(a & False, b & False) == 1.0
    with pytest.raises(ShapeMismatchError):
        report.jaccard(a, b[:3])


def test_grid_spec():
    x, y = report.grid_spec((0, 10, -6, 0), 0.05)
    assert x.size == 201 and y.size == 121 and x[-1] == 10


def test_writers(tmp_path):
    table, _ = report.shape_stats([from_blocks([circle(2, -2, 0.5)])])
    report.write_stats_csv(tmp_path / "s.csv", table)
    head = (tmp_path / "s.csv").read_text().splitlines()[0].split(",")
    assert tuple(head) == report.STAT_COLUMNS
    X = np.random.default_rng(0).standard_normal((5, 3))
    ok = np.array([1, 0, 1, 1, 0], bool)
    report.write_samples_csv(tmp_path / "x.csv", X, ok)
    X2, ok2 = report.read_samples_csv(tmp_path / "x.csv")
    assert np.allclose(X2, X, rtol=1e-11) and np.array_equal(ok, ok2)


def test_piecewise_vectors():
    prior = build_prior([CircleGuess(5, -3, 0.5)], PIECEWISE, 8)
    vs = report.to_vectors(np.tile(prior.mean, (2, 1)), prior)
    assert len(vs) == 2 and np.allclose(vs[0].blocks[0, 2:10], 0.5)
    s = report.block_stats(vs[0].blocks[0], PIECEWISE)
    # equal nodal radii interpolate to a constant radius
    assert s["area"] == pytest.approx(np.pi * 0.25, rel=1e-4)
