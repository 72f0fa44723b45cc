import numpy as np
import pytest

from elastobayes import fem, synthetic
from elastobayes.dataset import DataSet
from elastobayes.errors import InverseCrimeError, ShapeMismatchError
from elastobayes.shapes import circle, from_blocks

from conftest import tiny_config


def toy(M=7, K=3):
    return DataSet(np.arange(K * M, dtype=float).reshape(K, M) - 5.0,
                   np.column_stack([np.arange(K), np.zeros(K)]), 0.1 * np.arange(1, M + 1))


def test_noise_level_is_percent_of_peak():
    d = toy()
    assert synthetic.noise_level(d, 10) == pytest.approx(1.5)


def test_noise_statistics_and_determinism():
    d = DataSet(np.ones((20, 5000)), np.column_stack([np.arange(20), np.zeros(20)]), np.arange(1, 5001) * 0.01)
    a = synthetic.add_noise(d, 10, rng_seed=7)
    b = synthetic.add_noise(d, 10, rng_seed=7)
    assert np.array_equal(a.values, b.values)
    assert a.noise_sigma == pytest.approx(0.1)
    e = (a.values - 1.0).ravel()
    assert abs(e.mean()) < 5 * 0.1 / np.sqrt(e.size)
    assert e.std() == pytest.approx(0.1, rel=0.01)


def test_zero_alpha_keeps_data():
    d = toy()
    n = synthetic.add_noise(d, 0, 1)
    assert np.array_equal(n.values, d.values) and n.noise_sigma == 0.0
    with pytest.raises(ValueError):
        synthetic.add_noise(d, -1)


def test_split_partitions_times():
    d = toy(M=7)
    s = synthetic.split(d)
    assert s.d_odd.times.tolist() == pytest.approx([0.1, 0.3, 0.5, 0.7])
    assert s.d_even.times.tolist() == pytest.approx([0.2, 0.4, 0.6])
    merged = np.empty_like(d.values)
    merged[:, 0::2], merged[:, 1::2] = s.d_odd.values, s.d_even.values
    assert np.array_equal(merged, d.values)
    with pytest.raises(ShapeMismatchError):
        synthetic.split(toy(M=1))


def test_inverse_crime_guard(tiny):
    with pytest.raises(InverseCrimeError):
        synthetic.check_inverse_crime(tiny, tiny)
    synthetic.check_inverse_crime(tiny, tiny, allow=True)
    synthetic.check_inverse_crime(tiny, synthetic.inversion_config(tiny))
    assert synthetic.inversion_config(tiny).dx == pytest.approx(0.4)


def test_truth_data_differs_from_background(tiny):
    truth = from_blocks([circle(2.0, -1.5, 0.6, 16.0)])
    d = synthetic.generate_truth(truth, tiny)
    mesh = fem.build_mesh(tiny)
    bg = fem.record(fem.solve_forward(fem.assemble(mesh, np.full(mesh.n_elements, 1.69), tiny), tiny),
                    tiny.receivers, tiny.times)
    assert d.values.shape == (len(tiny.receivers), tiny.times.size)
    assert np.abs(d.values - bg.values).max() > 0.05 * np.abs(bg.values).max()
