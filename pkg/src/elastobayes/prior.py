"""Prior distributions built from circle guesses.

Smooth shapes get a diagonal Gaussian per block.  Piecewise shapes are
sampled in ``(cx, cy, log r_0, ..., log r_{Z-1}, gamma)`` with
``mu = exp(gamma)``; the log-radii carry a Matern covariance over the
boundary angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag, cho_factor, cho_solve
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .config import MU_BACKGROUND
from .errors import NumericalError
from .shapes import PIECEWISE, SMOOTH, AdmissibilityRule, ParameterVector, block_length


@dataclass(frozen=True)
class CircleGuess:
    cx: float
    cy: float
    rho0: float
    fraction_id: int = -1
    peak: float = 0.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class MaternParams:
    nu_smoothness: float = 1.5
    rho_length: float = 0.5
    sigma_amp: float = 0.2

    def __post_init__(self):
        if min(self.nu_smoothness, self.rho_length, self.sigma_amp) <= 0:
            raise ValueError("Matern parameters must be positive")


@dataclass(frozen=True)
class PriorHyper:
    """Variances of the Gaussian blocks (defaults follow the smooth-shape experiments)."""

    var_center: float = 0.1
    var_a0: float = 0.1
    var_fourier: float = 0.1
    decay_s: float = 3.0
    var_mu: float = 20.0**2
    mu_background: float = MU_BACKGROUND
    matern: MaternParams = MaternParams()


def matern_cov_distance(d, p: MaternParams = MaternParams()):
    """Matern covariance as a function of distance."""
    d = np.asarray(d, dtype=float)
    nu, rho, s2 = p.nu_smoothness, p.rho_length, p.sigma_amp**2
    if np.isclose(nu, 1.5):
        x = np.sqrt(3.0) * d / rho
        return s2 * (1.0 + x) * np.exp(-x)
    if np.isclose(nu, 0.5):
        return s2 * np.exp(-d / rho)
    x = np.sqrt(2.0 * nu) * d / rho
    with np.errstate(invalid="ignore"):
        out = s2 * 2.0 ** (1.0 - nu) / gamma_fn(nu) * x**nu * kv(nu, x)
    return np.where(d == 0, s2, out)


def matern_cov(theta_i, theta_j, p: MaternParams = MaternParams()):
    """Covariance between unit-circle points at angles ``2 pi theta_i`` and ``2 pi theta_j``."""
    ti = 2.0 * np.pi * np.asarray(theta_i, dtype=float)
    tj = 2.0 * np.pi * np.asarray(theta_j, dtype=float)
    d = np.hypot(np.cos(ti) - np.cos(tj), np.sin(ti) - np.sin(tj))
    return matern_cov_distance(d, p)


def matern_matrix(Z, p: MaternParams = MaternParams()):
    theta = np.arange(Z) / Z
    return matern_cov(theta[:, None], theta[None, :], p)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Gaussian prior in sampling coordinates plus its admissibility support.

    ``mean`` and ``cov`` live in sampling coordinates (identical to the
    physical ones for smooth shapes).  ``nu0`` is the physical mean shape.
    """

    variant: str
    order: int
    mean: np.ndarray
    cov: np.ndarray
    rule: AdmissibilityRule = AdmissibilityRule()
    domain: tuple | None = None
    _chol: tuple = field(init=False, repr=False)
    _logdet: float = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance does not match mean dimension")
        if mean.size % block_length(self.variant, self.order):
            raise ValueError("mean dimension inconsistent with variant/order")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError:
            cov = cov + 1e-10 * np.eye(mean.size)
            try:
                chol = cho_factor(cov, lower=True)
            except np.linalg.LinAlgError as exc:
                raise NumericalError("prior covariance is not positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_logdet", 2.0 * np.log(np.diag(chol[0])).sum())

    @property
    def n(self):
        return self.mean.size

    @property
    def L(self):
        return self.n // block_length(self.variant, self.order)

    @property
    def logdet(self):
        return self._logdet

    @property
    def chol_lower(self):
        return np.tril(self._chol[0])

    @property
    def precision(self):
        return cho_solve(self._chol, np.eye(self.n))

    @property
    def nu0(self) -> ParameterVector:
        return self.to_params(self.mean)

    def _log_slots(self):
        """Mask of coordinates sampled in log space (piecewise radii and gamma)."""
        blen = block_length(self.variant, self.order)
        mask = np.zeros(blen, bool)
        if self.variant == PIECEWISE:
            mask[2:] = True
        return np.tile(mask, self.L)

    def radius_slots(self):
        blen = block_length(self.variant, self.order)
        mask = np.zeros(blen, bool)
        if self.variant == PIECEWISE:
            mask[2:-1] = True
        return np.tile(mask, self.L)

    def to_params(self, x) -> ParameterVector:
        x = np.asarray(x, dtype=float)
        if self.variant == PIECEWISE:
            x = x.copy()
            m = self._log_slots()
            x[m] = np.exp(x[m])
        return ParameterVector(x, self.variant, self.order)

    def to_sampling(self, nu: ParameterVector):
        x = np.array(nu.values, dtype=float)
        if self.variant == PIECEWISE:
            m = self._log_slots()
            with np.errstate(divide="ignore", invalid="ignore"):
                x[m] = np.log(x[m])
        return x

    def solve(self, v):
        """``cov^{-1} v``."""
        return cho_solve(self._chol, v)

    def quad(self, x):
        r = np.asarray(x, dtype=float) - self.mean
        return float(r @ cho_solve(self._chol, r))

    def logpdf_sampling(self, x):
        """Gaussian log-density in sampling coordinates (no admissibility gate)."""
        return -0.5 * (self.n * np.log(2.0 * np.pi) + self._logdet + self.quad(x))

    def sample(self, rng, size=None):
        z = rng.standard_normal((1 if size is None else size, self.n))
        x = self.mean + z @ self.chol_lower.T
        return x[0] if size is None else x


def build_prior(circles, variant=SMOOTH, order=5, hyper: PriorHyper = PriorHyper(), rule=None, domain=None):
    """Prior centred on circle guesses.

    Smooth: mean ``(cx, cy, rho0, 0, ..., 0, mu_bg)`` per block and diagonal
    variances ``(0.1, 0.1, 0.1, 0.1/(1+q^2)^s ..., 400)``.
    Piecewise: Gaussian centres, log-radii with mean ``log rho0`` and Matern
    covariance, ``gamma = log mu`` with mean ``log mu_bg`` and variance 400.
    """
    circles = list(circles)
    if not circles:
        raise ValueError("need at least one circle")
    means, covs = [], []
    for c in circles:
        if variant == SMOOTH:
            m = np.zeros(2 * order + 4)
            m[:3] = c.cx, c.cy, c.rho0
            m[-1] = hyper.mu_background
            v = np.empty_like(m)
            v[:3] = hyper.var_center, hyper.var_center, hyper.var_a0
            for q in range(1, order + 1):
                v[2 * q + 1] = v[2 * q + 2] = hyper.var_fourier / (1.0 + q * q) ** hyper.decay_s
            v[-1] = hyper.var_mu
            means.append(m)
            covs.append(np.diag(v))
        elif variant == PIECEWISE:
            m = np.concatenate([[c.cx, c.cy], np.full(order, np.log(c.rho0)), [np.log(hyper.mu_background)]])
            C = block_diag(
                np.diag([hyper.var_center, hyper.var_center]),
                matern_matrix(order, hyper.matern),
                [[hyper.var_mu]],
            )
            means.append(m)
            covs.append(C)
        else:
            raise ValueError(f"unknown variant {variant!r}")
    if rule is None:
        rule = AdmissibilityRule(theta_samples=256 if variant == SMOOTH else max(64, order))
    return PriorSpec(variant, order, np.concatenate(means), block_diag(*covs), rule, domain)
