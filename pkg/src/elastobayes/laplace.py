"""MAP estimation by damped Gauss-Newton and the Laplace approximation around it.

The optimizer works in the prior's sampling coordinates (the physical
parameters for smooth shapes; log radii and ``log mu`` for piecewise
shapes).  ``forward`` is any callable mapping a :class:`ParameterVector` to
the flattened prediction; if it has ``measure_many`` the Jacobian solves
are batched.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .config import MU_BACKGROUND
from .dataset import DataSet
from .errors import JacobianError, NumericalError, StallError
from .posterior import NoiseCov
from .prior import PriorSpec
from .shapes import SMOOTH, ParameterVector, block_length, violations

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FDSteps:
    """Forward-difference steps per block coordinate."""

    center: float = 0.05
    a0: float = 0.1
    fourier: float = 0.05
    mu: float = 0.15

    def __post_init__(self):
        if min(self.center, self.a0, self.fourier, self.mu) <= 0:
            raise ValueError("finite-difference steps must be positive")

    def vector(self, variant, order, L):
        blen = block_length(variant, order)
        eta = np.full(blen, self.fourier)
        eta[:2] = self.center
        if variant == SMOOTH:
            eta[2] = self.a0
            eta[-1] = self.mu
        else:
            # log-radius and log-mu steps: relative perturbations
            eta[-1] = self.mu / 16.0
        return np.tile(eta, L)


@dataclass(frozen=True)
class OptimizerConfig:
    omega0: float = 5e-5
    lambda0: float | None = None  # None -> 0.1 / sigma^2
    lambda_decay: float = 5.0
    lambda_floor: float = 1.0
    omega_up: float = 2.0
    omega_down: float = 2.0
    tol: float = 5e-7
    mu_refine_threshold: float = 0.02
    mu_lower_factor: float = 0.5
    mu_background: float = MU_BACKGROUND
    max_outer: int = 50
    max_mu_iter: int = 20
    max_rejections: int = 30
    eta: FDSteps = FDSteps()

    def __post_init__(self):
        vals = [self.omega0, self.lambda_decay, self.lambda_floor, self.omega_up, self.omega_down,
                self.tol, self.mu_refine_threshold, self.mu_background]
        if min(vals) <= 0 or (self.lambda0 is not None and self.lambda0 <= 0):
            raise ValueError("optimizer settings must be positive")
        if not self.tol < 1:
            raise ValueError("tol must be < 1")

    def initial_lambda(self, sigma):
        return 0.1 / sigma**2 if self.lambda0 is None else self.lambda0


@dataclass
class MAPResult:
    nu_map: ParameterVector
    cost_history: list
    omega_history: list
    lambda_history: list
    phase_history: list
    F: np.ndarray = field(repr=False)
    Gamma_pt: np.ndarray = field(repr=False)
    Gamma_pt_sqrt: np.ndarray = field(repr=False)
    converged: bool
    gradient_norm: float = np.nan
    gradient_norm0: float = np.nan
    n_solves: int = 0


def _data_vector(d):
    return d.flat() if isinstance(d, DataSet) else np.asarray(d, dtype=float).ravel()


def _measure_many(forward, nus):
    if hasattr(forward, "measure_many"):
        return forward.measure_many(nus, check=False)
    return np.array([forward(nu) for nu in nus])


def _measure(forward, nu):
    return forward(nu, check=False) if hasattr(forward, "measure_many") else forward(nu)


def _misfit(pred, d, sigma):
    r = pred - d
    return 0.5 * float(r @ r) / sigma**2


def cost(nu, lam, prior: PriorSpec, d_odd, noise: NoiseCov, forward, pred=None):
    """``|F(nu) - d|^2 / (2 sigma^2) + (lam/2) |nu - nu0|^2_{Gamma_pr}``; ``inf`` if inadmissible."""
    if violations(nu, prior.rule, prior.domain):
        return np.inf
    pred = _measure(forward, nu) if pred is None else pred
    return _misfit(pred, _data_vector(d_odd), noise.sigma_noise) + 0.5 * lam * prior.quad(prior.to_sampling(nu))


def fd_jacobian(nu, eta, forward, prior: PriorSpec, base=None, coords=None, rule=None, shrink=4):
    """Forward-difference Jacobian of the prediction in sampling coordinates.

    Parameters
    ----------
    eta : FDSteps or array
        Step per sampling coordinate.
    base : array, optional
        Prediction at ``nu``; computed (one extra solve) when missing.
    coords : array of int, optional
        Restrict to these coordinates (columns of the returned matrix).
    rule : AdmissibilityRule, optional
        Perturbed vectors must satisfy it; a failing step is halved up to
        ``shrink`` times before :class:`JacobianError` is raised.

    Returns
    -------
    F : (N, len(coords)) array
    base : (N,) array
    """
    x = prior.to_sampling(nu)
    n = x.size
    if isinstance(eta, FDSteps):
        eta = eta.vector(prior.variant, prior.order, prior.L)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,))
    coords = np.arange(n) if coords is None else np.asarray(coords, dtype=int)
    rule = prior.rule if rule is None else rule
    steps, perturbed = [], []
    for i in coords:
        h = eta[i]
        for _ in range(shrink + 1):
            xp = x.copy()
            xp[i] += h
            nup = prior.to_params(xp)
            if not violations(nup, rule, prior.domain):
                break
            h *= 0.5
        else:
            raise JacobianError(f"perturbation of coordinate {i} inadmissible after {shrink} halvings")
        steps.append(h)
        perturbed.append(nup)
    todo = perturbed if base is not None else [nu] + perturbed
    preds = _measure_many(forward, todo)
    if base is None:
        base, preds = preds[0], preds[1:]
    F = (preds - base[None, :]).T / np.asarray(steps)[None, :]
    return F, base


def calibrate_steps(nu, forward, prior: PriorSpec, trial: FDSteps = FDSteps(), factor=0.1, clip=10.0):
    """Step sizes from first to second divided-difference quotients at ``nu``.

    For each sampling coordinate, ``q_i = |D_i| / |D2_i|`` with central
    differences at the trial step; the suggested step of a coordinate kind
    (centers, ``a0``, Fourier modes or radii, ``mu``) is ``factor`` times the
    mean quotient of that kind, clipped to ``[trial / clip, trial * clip]``.
    Costs two solves per coordinate plus one at ``nu``.
    """
    x = prior.to_sampling(nu)
    h = trial.vector(prior.variant, prior.order, prior.L)
    plus, minus = [], []
    for i in range(x.size):
        for sign, bucket in ((1.0, plus), (-1.0, minus)):
            xp = x.copy()
            xp[i] += sign * h[i]
            nup = prior.to_params(xp)
            if violations(nup, prior.rule, prior.domain):
                raise JacobianError(f"calibration step of coordinate {i} leaves the prior support")
            bucket.append(nup)
    preds = _measure_many(forward, [nu] + plus + minus)
    f0, fp, fm = preds[0], preds[1 : 1 + x.size], preds[1 + x.size :]
    d1 = np.linalg.norm(fp - fm, axis=1) / (2.0 * h)
    d2 = np.linalg.norm(fp - 2.0 * f0 + fm, axis=1) / h**2
    q = np.where(d2 > 0, d1 / np.maximum(d2, 1e-300), np.inf)
    blen = block_length(prior.variant, prior.order)
    slot = np.tile(np.arange(blen), prior.L)
    kinds = {"center": slot < 2, "mu": slot == blen - 1}
    if prior.variant == SMOOTH:
        kinds["a0"] = slot == 2
        kinds["fourier"] = (slot > 2) & (slot < blen - 1)
    else:
        kinds["fourier"] = (slot >= 2) & (slot < blen - 1)
    out = {}
    for kind, mask in kinds.items():
        base = getattr(trial, kind)
        finite = q[mask][np.isfinite(q[mask])]
        est = factor * finite.mean() if finite.size else base * clip
        if kind == "mu" and prior.variant != SMOOTH:
            est *= 16.0  # FDSteps stores 16 times the log-mu step
        out[kind] = float(np.clip(est, base / clip, base * clip))
    return replace(trial, **out)


def gn_gradient_hessian(F, residual, lam, prior: PriorSpec, x, sigma):
    """Gauss-Newton gradient and Hessian of ``J_lam`` at sampling point ``x``."""
    g = F.T @ residual / sigma**2 + lam * prior.solve(np.asarray(x, dtype=float) - prior.mean)
    H = F.T @ F / sigma**2 + lam * prior.precision
    return g, 0.5 * (H + H.T)


def _damped_step(H, g, omega):
    A = H + omega * np.diag(np.diag(H))
    try:
        return cho_solve(cho_factor(A), -g)
    except np.linalg.LinAlgError:
        return np.linalg.solve(A, -g)


def _mu_coords(prior):
    blen = block_length(prior.variant, prior.order)
    return np.arange(prior.L) * blen + blen - 1


def lm_solve(start, opt: OptimizerConfig, prior: PriorSpec, d_odd, noise: NoiseCov, forward, on_stall="raise"):
    """Levenberg-Marquardt double iteration followed by ``mu``-only refinement.

    A trial step is accepted when the shape stays admissible with every
    ``mu_i > mu_lower_factor * mu_background`` and ``J_lambda`` decreases;
    otherwise ``omega`` doubles and the damped system is re-solved with the
    same Jacobian.  Accepted steps halve ``omega`` and set
    ``lambda <- max(lambda / decay, floor)``.  Once ``lambda`` has reached
    its floor and the relative cost decrease drops below ``tol``, only the
    ``mu`` coordinates are updated until they move less than
    ``mu_refine_threshold``.

    ``on_stall`` selects what happens after ``max_rejections`` consecutive
    rejections: ``"raise"`` raises :class:`StallError`, ``"stop"`` ends the
    current phase and keeps the best iterate.
    """
    d = _data_vector(d_odd)
    sigma = noise.sigma_noise
    rule = replace(prior.rule, mu_min=max(prior.rule.mu_min, opt.mu_lower_factor * opt.mu_background))
    mu_idx = _mu_coords(prior)
    x = prior.to_sampling(start)
    nu = prior.to_params(x)
    if violations(nu, rule, prior.domain):
        raise ValueError(f"start is inadmissible: {violations(nu, rule, prior.domain)}")
    lam = opt.initial_lambda(sigma)
    omega = opt.omega0
    solves0 = getattr(forward, "n_solves", 0)
    pred = _measure(forward, nu)
    misfit = _misfit(pred, d, sigma)
    quad = prior.quad(x)
    costs = [misfit + 0.5 * lam * quad]
    omegas, lams, phases = [omega], [lam], ["start"]
    g0 = None

    def iterate(coords, phase):
        """One Jacobian plus damped solves until a step is accepted; returns the update or None."""
        nonlocal x, nu, pred, misfit, quad, omega, lam, g0
        F, _ = fd_jacobian(nu, opt.eta, forward, prior, base=pred, coords=coords, rule=rule)
        r = pred - d
        g_full_prior = prior.solve(x - prior.mean)
        g = F.T @ r / sigma**2 + lam * g_full_prior[coords]
        H = F.T @ F / sigma**2 + lam * prior.precision[np.ix_(coords, coords)]
        if g0 is None:
            g0 = float(np.linalg.norm(g))
        J_old = misfit + 0.5 * lam * quad
        for _ in range(opt.max_rejections):
            xi = _damped_step(0.5 * (H + H.T), g, omega)
            x_new = x.copy()
            x_new[coords] += xi
            nu_new = prior.to_params(x_new)
            if not violations(nu_new, rule, prior.domain):
                pred_new = _measure(forward, nu_new)
                mis_new = _misfit(pred_new, d, sigma)
                quad_new = prior.quad(x_new)
                J_new = mis_new + 0.5 * lam * quad_new
                if J_new < J_old:
                    x, nu, pred, misfit, quad = x_new, nu_new, pred_new, mis_new, quad_new
                    costs.append(J_new)
                    omega /= opt.omega_down
                    lam_used = lam
                    lam = max(lam / opt.lambda_decay, opt.lambda_floor)
                    omegas.append(omega)
                    lams.append(lam)
                    phases.append(phase)
                    log.info("%s step accepted: J=%.6e omega=%.3g lambda=%.3g", phase, J_new, omega, lam_used)
                    return xi, (J_old - J_new) / abs(J_old), lam_used
            omega *= opt.omega_up
        msg = f"{phase}: {opt.max_rejections} consecutive rejected steps (omega={omega:.3g})"
        if on_stall == "raise":
            raise StallError(msg, best=nu)
        log.warning(msg)
        return None

    all_coords = np.arange(x.size)
    converged = False
    for _ in range(opt.max_outer):
        step = iterate(all_coords, "joint")
        if step is None:
            converged = lam <= opt.lambda_floor
            break
        _, rel, lam_used = step
        if lam_used <= opt.lambda_floor and rel < opt.tol:
            converged = True
            break
    if converged:
        for _ in range(opt.max_mu_iter):
            step = iterate(mu_idx, "mu")
            if step is None:
                break
            xi, _, _ = step
            change = np.abs(xi) if prior.variant == SMOOTH else np.abs(np.expm1(xi)) * np.exp(x[mu_idx])
            if change.max() < opt.mu_refine_threshold:
                break
    else:
        log.warning("LM did not reach tol=%g within %d iterations", opt.tol, opt.max_outer)
    F, _ = fd_jacobian(nu, opt.eta, forward, prior, base=pred, rule=rule)
    g, _ = gn_gradient_hessian(F, pred - d, 1.0, prior, x, sigma)
    Gamma, root = laplace_cov(F, noise, prior)
    return MAPResult(
        nu_map=nu,
        cost_history=costs,
        omega_history=omegas,
        lambda_history=lams,
        phase_history=phases,
        F=F,
        Gamma_pt=Gamma,
        Gamma_pt_sqrt=root,
        converged=converged,
        gradient_norm=float(np.linalg.norm(g)),
        gradient_norm0=g0 if g0 is not None else np.nan,
        n_solves=getattr(forward, "n_solves", 0) - solves0,
    )


def laplace_cov(F, noise: NoiseCov, prior):
    """``(F^T F / sigma^2 + Gamma_pr^{-1})^{-1}`` and its symmetric square root.

    ``prior`` is a :class:`PriorSpec` or a prior covariance matrix.
    """
    F = np.asarray(F, dtype=float)
    if isinstance(prior, PriorSpec):
        P = prior.precision
    else:
        P = np.linalg.inv(np.asarray(prior, dtype=float))
    H = F.T @ F / noise.sigma_noise**2 + P
    H = 0.5 * (H + H.T)
    try:
        w, V = eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gauss-Newton Hessian factorization failed") from exc
    if w.min() <= 0:
        raise NumericalError("Gauss-Newton Hessian is not positive definite")
    Gamma = (V / w) @ V.T
    root = (V / np.sqrt(w)) @ V.T
    return 0.5 * (Gamma + Gamma.T), 0.5 * (root + root.T)


def sym_sqrt(G):
    """Symmetric positive square root of a covariance matrix."""
    w, V = eigh(0.5 * (G + G.T))
    if w.min() < -1e-12 * max(w.max(), 1.0):
        raise NumericalError("covariance is not positive semidefinite")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def sample_laplace(x_map, Gamma_sqrt, count, rng, prior: PriorSpec | None = None):
    """Draws ``x_map + Gamma^{1/2} n`` with flags marking admissible draws.

    ``x_map`` is a vector in sampling coordinates or a ParameterVector (then
    ``prior`` converts it).  Inadmissible draws are kept and flagged.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(x_map, ParameterVector):
        x_map = prior.to_sampling(x_map) if prior is not None else x_map.values
    x_map = np.asarray(x_map, dtype=float)
    z = rng.standard_normal((count, x_map.size))
    X = x_map + z @ np.asarray(Gamma_sqrt).T
    if prior is None:
        return X, np.ones(count, bool)
    ok = np.array([not violations(prior.to_params(x), prior.rule, prior.domain) for x in X])
    return X, ok


def write_matrix_csv(path, A):
    np.savetxt(path, np.atleast_2d(A), fmt="%.12e", delimiter=",")


def read_matrix_csv(path):
    return np.atleast_2d(np.loadtxt(path, delimiter=","))


def write_cost_history(path, result: MAPResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "cost", "omega", "lambda"])
        for k, c in enumerate(result.cost_history):
            w.writerow([k, f"{c:.12e}", f"{result.omega_history[k]:.6e}", f"{result.lambda_history[k]:.6e}"])
