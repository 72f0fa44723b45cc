"""Unnormalized log-posterior: Gaussian likelihood on the odd-time data plus the prior."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import fem
from .dataset import DataSet
from .errors import ShapeMismatchError
from .prior import PriorSpec
from .shapes import PIECEWISE, AdmissibilityRule, ParameterVector, rasterize, violations


@dataclass(frozen=True)
class NoiseCov:
    """Isotropic noise covariance ``sigma^2 I``."""

    sigma_noise: float

    def __post_init__(self):
        if not self.sigma_noise > 0:
            raise ValueError("sigma_noise must be positive")


class ForwardModel:
    """Measurement operator on one discretization: shape parameters to receiver data.

    Predictions are flattened time-major (all receivers at the first time,
    then the next time, ...).  ``n_solves`` counts PDE solves.  The default
    ``supersample = 4`` averages the coefficient over sub-elements so that
    small parameter perturbations change the prediction smoothly.
    """

    def __init__(self, config, times=None, ops=None, rule=None, supersample=4):
        self.config = config
        self.ops = ops if ops is not None else fem.MeshOperators(fem.build_mesh(config), config)
        self.mesh = self.ops.mesh
        self.times = config.times if times is None else np.asarray(times, dtype=float)
        self.receivers = np.asarray(config.receivers, dtype=float)
        self.rule = rule if rule is not None else AdmissibilityRule()
        self.supersample = int(supersample)
        self.n_solves = 0

    @property
    def N(self):
        return self.receivers.shape[0] * self.times.size

    def speed(self, nu: ParameterVector, check=True):
        return rasterize(nu, self.mesh, self.config.c_background, self.rule, check=check,
                         supersample=self.supersample)

    def system(self, nu, check=True):
        return fem.assemble(self.mesh, self.speed(nu, check), self.config, self.ops)

    def _predict(self, sol):
        return fem.record(sol, self.receivers, self.times).flat()

    def __call__(self, nu: ParameterVector, check=True):
        sol = fem.solve_forward(self.system(nu, check), self.config)
        self.n_solves += 1
        return self._predict(sol)

    measure = __call__

    def measure_many(self, nus, batch=16, check=True):
        """Predictions for several parameter vectors, solved in batches."""
        nus = list(nus)
        out = np.empty((len(nus), self.N))
        for s in range(0, len(nus), batch):
            chunk = nus[s : s + batch]
            systems = [self.system(nu, check) for nu in chunk]
            sols = fem.solve_forward_batch(systems, self.config)
            self.n_solves += len(chunk)
            for i, sol in enumerate(sols):
                out[s + i] = self._predict(sol)
        return out


def measure(nu, config, forward: ForwardModel | None = None):
    """Flattened prediction at the model's times (a fresh model on ``config`` by default)."""
    forward = forward if forward is not None else ForwardModel(config)
    return forward(nu)


def log_likelihood(pred, d, noise: NoiseCov):
    """``-(N/2) log 2 pi - N log sigma - |pred - d|^2 / (2 sigma^2)``."""
    pred = np.asarray(pred, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if pred.shape != d.shape:
        raise ShapeMismatchError(f"prediction length {pred.size} vs data length {d.size}")
    N = d.size
    s = noise.sigma_noise
    r = pred - d
    return -0.5 * N * np.log(2.0 * np.pi) - N * np.log(s) - float(r @ r) / (2.0 * s * s)


def log_prior(nu: ParameterVector, prior: PriorSpec):
    """Prior log-density over physical parameters; ``-inf`` outside the support.

    Piecewise radii are log-Gaussian, so the density over ``r_j`` carries
    the ``-sum log r_j`` Jacobian; ``gamma = log mu`` is Gaussian.
    """
    if violations(nu, prior.rule, prior.domain):
        return -np.inf
    x = prior.to_sampling(nu)
    lp = prior.logpdf_sampling(x)
    if prior.variant == PIECEWISE:
        lp -= x[prior.radius_slots()].sum()
    return lp


@dataclass(frozen=True)
class PosteriorEval:
    log_likelihood: float
    log_prior: float
    admissible: bool
    solves: int

    @property
    def log_posterior(self):
        if not self.admissible:
            return -np.inf
        return self.log_likelihood + self.log_prior


def log_posterior(nu, prior: PriorSpec, d_odd: DataSet, noise: NoiseCov, forward: ForwardModel) -> PosteriorEval:
    """Gate on admissibility first; solve the PDE only for admissible ``nu``."""
    lp = log_prior(nu, prior)
    if not np.isfinite(lp):
        return PosteriorEval(-np.inf, -np.inf, False, 0)
    pred = forward(nu, check=False)
    return PosteriorEval(log_likelihood(pred, d_odd.flat(), noise), lp, True, 1)


class Posterior:
    """Log-posterior in sampling coordinates, vectorized over proposals.

    Inadmissible points get ``-inf`` without a PDE solve.  Evaluations can
    be appended to a CSV trace ``eval_id,log_prior,log_lik,admissible,solves``.
    """

    def __init__(self, prior: PriorSpec, d_odd: DataSet, noise: NoiseCov, forward: ForwardModel,
                 batch=16, trace_path=None):
        self.prior = prior
        self.d = d_odd.flat()
        self.noise = noise
        self.forward = forward
        self.batch = batch
        self.n_evals = 0
        self._trace = None
        if trace_path is not None:
            self._trace = open(trace_path, "w", newline="")
            self._writer = csv.writer(self._trace)
            self._writer.writerow(["eval_id", "log_prior", "log_lik", "admissible", "solves"])

    def close(self):
        if self._trace is not None:
            self._trace.close()
            self._trace = None

    def _log_prior_sampling(self, x):
        nu = self.prior.to_params(x)
        if violations(nu, self.prior.rule, self.prior.domain):
            return -np.inf, nu
        return self.prior.logpdf_sampling(x), nu

    def __call__(self, X):
        """Log-density of each row of ``X`` (sampling coordinates)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], -np.inf)
        lps, nus, idx = [], [], []
        for i, x in enumerate(X):
            lp, nu = self._log_prior_sampling(x)
            if np.isfinite(lp):
                lps.append(lp)
                nus.append(nu)
                idx.append(i)
        lls = []
        if nus:
            preds = self.forward.measure_many(nus, batch=self.batch, check=False)
            lls = [log_likelihood(p, self.d, self.noise) for p in preds]
            out[idx] = np.array(lps) + np.array(lls)
        if self._trace is not None:
            ll_by = dict(zip(idx, lls))
            lp_by = dict(zip(idx, lps))
            for i in range(X.shape[0]):
                ok = i in lp_by
                self._writer.writerow([self.n_evals + i, lp_by.get(i, -np.inf), ll_by.get(i, -np.inf),
                                       int(ok), int(ok)])
        self.n_evals += X.shape[0]
        return out
