"""Synthetic observations: truth solves, additive noise and the even/odd split."""

from __future__ import annotations

import numpy as np

from . import fem
from .dataset import DataSet, SplitData
from .errors import InverseCrimeError, ShapeMismatchError
from .shapes import AdmissibilityRule, ParameterVector, rasterize


def generate_truth(truth: ParameterVector, config, ops=None, mesh=None, supersample=1) -> DataSet:
    """Clean data for the true anomalies, solved on the data-generation mesh."""
    mesh = mesh if mesh is not None else (ops.mesh if ops is not None else fem.build_mesh(config))
    speed = rasterize(truth, mesh, config.c_background, AdmissibilityRule(), supersample=supersample)
    system = fem.assemble(mesh, speed, config, ops)
    sol = fem.solve_forward(system, config)
    return fem.record(sol, config.receivers, config.times)


def noise_level(data: DataSet, alpha):
    """``alpha`` percent of the largest clean amplitude."""
    return alpha * float(np.abs(data.values).max()) / 100.0


def add_noise(data: DataSet, alpha, rng_seed=None) -> DataSet:
    """Add iid Gaussian noise of standard deviation ``alpha * max|d| / 100``."""
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    sigma = noise_level(data, alpha)
    if sigma == 0.0:
        return data.with_values(data.values.copy(), noise_sigma=0.0)
    rng = np.random.default_rng(rng_seed)
    return data.with_values(data.values + sigma * rng.standard_normal(data.values.shape), noise_sigma=sigma)


def split(data: DataSet) -> SplitData:
    """Even times (t_2, t_4, ...) and odd times (t_1, t_3, ...), 1-based."""
    if data.M < 2:
        raise ShapeMismatchError("need at least two recording times to split")
    odd = slice(0, None, 2)
    even = slice(1, None, 2)
    mk = lambda s, tag: DataSet(  # noqa: E731
        data.values[:, s], data.receivers, data.times[s], data.noise_sigma, tag
    )
    return SplitData(d_even=mk(even, "even"), d_odd=mk(odd, "odd"))


def inversion_config(data_config, factor=2):
    """Discretization used for inversion: steps ``factor`` times the data steps."""
    return data_config.coarsened(factor)


def check_inverse_crime(data_config, inv_config, allow=False):
    """Refuse inversion on the data-generation discretization unless ``allow``."""
    if not allow and data_config.same_discretization(inv_config):
        raise InverseCrimeError(
            "inversion mesh equals the data-generation mesh; coarsen it or pass the override flag"
        )
