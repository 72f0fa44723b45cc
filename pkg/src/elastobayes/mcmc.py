"""Affine-invariant ensemble samplers (stretch move and Gaussian-combination move).

``logpost`` is any callable mapping an ``(m, d)`` array of states to the
``(m,)`` log-densities (``-inf`` outside the support).  States live in the
prior's sampling coordinates.

Randomness is drawn from per-walker streams spawned from the master seed,
in blocks of fixed length, so results depend only on the seed, the
configuration and the target.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InitializationError, ShapeMismatchError
from .shapes import violations

log = logging.getLogger(__name__)

SAIES = "SAIES"
AIES = "AIES"
_BLOCK = 256  # steps of random numbers drawn per refill


@dataclass(frozen=True)
class SamplerConfig:
    """Ensemble sampler settings.

    ``S`` raw steps are run; every ``thin``-th state is kept, so each
    walker retains ``S // thin`` states, the first ``burn_fraction`` of
    which are burn-in.  ``mode`` is ``"sequential"`` (walkers updated in
    order, later walkers see earlier updates) or ``"halves"`` (each half
    moves against the other, proposals evaluated as one batch).
    ``proposal`` selects the stretch form: ``"standard"`` uses
    ``x_q + z (x_w - x_q)``, ``"reflected"`` uses ``x_w + z (x_w - x_q)``.
    """

    kind: str = SAIES
    W: int = 32
    S: int = 1500
    thin: int = 3
    burn_fraction: float = 0.2
    a: float = 2.0
    lam: float = 0.2
    rng_seed: int | None = 0
    mode: str = "sequential"
    proposal: str = "standard"

    def __post_init__(self):
        if self.kind not in (SAIES, AIES):
            raise ConfigurationError(f"unknown sampler kind {self.kind!r}")
        if self.W < 2:
            raise ConfigurationError("need at least two walkers")
        if self.kind == AIES and self.W < 3:
            raise ConfigurationError("AIES needs at least three walkers")
        if not self.a > 1:
            raise ConfigurationError("stretch parameter a must exceed 1")
        if self.lam < 0:
            raise ConfigurationError("AIES scale must be non-negative")
        if self.thin < 1 or self.S < self.thin:
            raise ConfigurationError("need S >= thin >= 1")
        if not 0 <= self.burn_fraction < 1:
            raise ConfigurationError("burn_fraction must lie in [0, 1)")
        if self.mode not in ("sequential", "halves"):
            raise ConfigurationError(f"unknown mode {self.mode!r}")
        if self.proposal not in ("standard", "reflected"):
            raise ConfigurationError(f"unknown proposal {self.proposal!r}")
        if self.mode == "halves" and self.W < (6 if self.kind == AIES else 4):
            raise ConfigurationError("halves mode needs at least two walkers per half")

    @property
    def kept(self):
        return self.S // self.thin

    @property
    def burn_in(self):
        return int(self.kept * self.burn_fraction)


@dataclass
class Chain:
    """Kept states ``samples[w, k]`` with their log-posteriors and acceptance flags."""

    samples: np.ndarray
    log_post: np.ndarray
    accepted: np.ndarray = field(repr=False)  # (W, kept) bool: last move before the kept state
    accept_counts: np.ndarray = field(repr=False)  # (W,) over all raw steps
    raw_steps: int = 0
    burn_in: int = 0

    @property
    def W(self):
        return self.samples.shape[0]

    @property
    def kept(self):
        return self.samples.shape[1]

    @property
    def dim(self):
        return self.samples.shape[2]

    @property
    def acceptance_rate(self):
        return self.accept_counts / max(self.raw_steps, 1)

    def post_burn(self):
        """Pooled post-burn-in states, ordered walker-major; shape ``(W * (kept - burn), d)``."""
        return self.samples[:, self.burn_in :].reshape(-1, self.dim)

    def post_burn_log_post(self):
        return self.log_post[:, self.burn_in :].ravel()

    def diagnostics(self):
        return {
            "W": int(self.W),
            "S_kept": int(self.kept),
            "raw_steps": int(self.raw_steps),
            "burn_in": int(self.burn_in),
            "acceptance_rate": [float(r) for r in self.acceptance_rate],
            "mean_acceptance": float(self.acceptance_rate.mean()),
        }


def draw_stretch(a, rng=None, size=None, u=None):
    """Stretch factor with density proportional to ``1/sqrt(z)`` on ``[1/a, a]``.

    Inverse-CDF sampling ``z = (u (sqrt a - 1/sqrt a) + 1/sqrt a)^2``;
    pass ``u`` to evaluate the map directly.
    """
    if not a > 1:
        raise ValueError("a must exceed 1")
    if u is None:
        u = rng.random(size)
    s = np.sqrt(a)
    return (np.asarray(u) * (s - 1.0 / s) + 1.0 / s) ** 2


def _streams(seed, W):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(W)]


class _WalkerRandom:
    """Block-buffered random numbers per walker."""

    def __init__(self, rng, W, kind):
        self.rng, self.W, self.kind = rng, W, kind
        self.pos = _BLOCK

    def _refill(self):
        r = self.rng
        self.partner = r.random(_BLOCK)
        self.u_z = r.random(_BLOCK)
        self.u_acc = r.random(_BLOCK)
        if self.kind == AIES:
            self.normals = r.standard_normal((_BLOCK, self.W))
        self.pos = 0

    def next(self):
        if self.pos == _BLOCK:
            self._refill()
        k = self.pos
        self.pos += 1
        nrm = self.normals[k] if self.kind == AIES else None
        return self.partner[k], self.u_z[k], np.log(self.u_acc[k]) if self.u_acc[k] > 0 else -np.inf, nrm


def _stretch_proposal(xw, xq, z, proposal):
    """Stretch of ``x_w`` about partner ``x_q`` (``standard``) or of the pair difference (``reflected``)."""
    if proposal == "standard":
        return xq + z * (xw - xq)
    return xw + z * (xw - xq)


def saies_step(X, lp, logpost, a, rngs, proposal="standard", mode="sequential"):
    """One stretch-move sweep; returns ``(X, lp, accepted)`` (arrays are updated copies)."""
    return _sweep(X, lp, logpost, rngs, SAIES, mode, a=a, proposal=proposal)


def aies_step(X, lp, logpost, lam, rngs, mode="sequential"):
    """One Gaussian-combination sweep; returns ``(X, lp, accepted)``."""
    return _sweep(X, lp, logpost, rngs, AIES, mode, lam=lam)


_POOLS: dict = {}


def _complements(W):
    if W not in _POOLS:
        idx = np.arange(W)
        _POOLS[W] = [np.delete(idx, w) for w in range(W)]
    return _POOLS[W]


def _sequential(X, lp, logpost, rngs, kind, sa, lam, proposal, accepted):
    """Walker-by-walker update in place; later walkers see earlier moves."""
    W, d = X.shape
    comp = _complements(W)
    n = W - 1
    scale = lam / np.sqrt(n)
    for w in range(W):
        u_p, u_z, lu, nrm = rngs[w].next()
        if kind == SAIES:
            q = comp[w][min(int(u_p * n), n - 1)]
            z = (u_z * (sa - 1.0 / sa) + 1.0 / sa) ** 2
            prop = _stretch_proposal(X[w], X[q], z, proposal)
            logz = (d - 1) * np.log(z)
        else:
            z = nrm[:n]
            Y = X[comp[w]]
            prop = X[w] + scale * (z @ Y - z.sum() * Y.mean(axis=0))
            logz = 0.0
        lp_new = float(np.asarray(logpost(prop[None, :])).reshape(-1)[0])
        if lp_new > -np.inf and lu < logz + lp_new - lp[w]:
            X[w] = prop
            lp[w] = lp_new
            accepted[w] = True


def _sweep(X, lp, logpost, rngs, kind, mode, a=2.0, lam=0.2, proposal="standard"):
    X = np.array(X, dtype=float)
    lp = np.array(lp, dtype=float)
    W, d = X.shape
    if isinstance(rngs, np.random.Generator):
        rngs = [_WalkerRandom(r, W, kind) for r in _streams(rngs.integers(2**63), W)]
    accepted = np.zeros(W, bool)
    h = W // 2
    first, second = np.arange(h), np.arange(h, W)
    groups = [(first, second), (second, first)]
    sa = np.sqrt(a)
    if mode == "sequential":
        _sequential(X, lp, logpost, rngs, kind, sa, lam, proposal, accepted)
        return X, lp, accepted
    for movers, pool in groups:
        draws = [rngs[w].next() for w in movers]
        u_p = np.array([dr[0] for dr in draws])
        logu = np.array([dr[2] for dr in draws])
        n = len(pool)
        Xm = X[list(movers)]
        if kind == SAIES:
            q = np.asarray(pool)[np.minimum((u_p * n).astype(int), n - 1)]
            z = (np.array([dr[1] for dr in draws]) * (sa - 1.0 / sa) + 1.0 / sa) ** 2
            P = _stretch_proposal(Xm, X[q], z[:, None], proposal)
            logz = (d - 1) * np.log(z)
        else:
            Y = X[pool]
            Z = np.array([dr[3][:n] for dr in draws])
            P = Xm + lam / np.sqrt(n) * (Z @ Y - Z.sum(axis=1)[:, None] * Y.mean(axis=0))
            logz = np.zeros(len(movers))
        lp_new = np.asarray(logpost(P), dtype=float).reshape(-1)
        for i, w in enumerate(movers):
            if lp_new[i] > -np.inf and logu[i] < logz[i] + lp_new[i] - lp[w]:
                X[w] = P[i]
                lp[w] = lp_new[i]
                accepted[w] = True
    return X, lp, accepted


def init_ensemble(prior, W, rng, max_tries=1000):
    """``W`` prior draws in sampling coordinates, each redrawn until admissible."""
    if W < 2:
        raise ValueError("need at least two walkers")
    out = np.empty((W, prior.n))
    reasons = Counter()
    for w in range(W):
        for _ in range(max_tries):
            x = prior.sample(rng)
            bad = violations(prior.to_params(x), prior.rule, prior.domain)
            if not bad:
                out[w] = x
                break
            reasons.update(bad)
        else:
            worst = reasons.most_common(1)[0][0] if reasons else "unknown"
            raise InitializationError(
                f"walker {w}: no admissible prior draw in {max_tries} tries; most frequent violation: {worst}"
            )
    return out


def run(sampler: SamplerConfig, logpost, prior=None, init=None, progress=None) -> Chain:
    """Run the ensemble for ``sampler.S`` sweeps keeping every ``thin``-th state.

    The initial ensemble is ``init`` or, if missing, admissible draws from
    ``prior``.  ``progress(step, chain_so_far)`` is called after each kept
    state when given.
    """
    master = np.random.SeedSequence(sampler.rng_seed)
    init_seq, walk_seq = master.spawn(2)
    if init is None:
        if prior is None:
            raise ValueError("need a prior or an initial ensemble")
        init = init_ensemble(prior, sampler.W, np.random.default_rng(init_seq))
    X = np.array(init, dtype=float)
    if X.ndim != 2 or X.shape[0] != sampler.W:
        raise ShapeMismatchError(f"initial ensemble has shape {X.shape}, expected ({sampler.W}, d)")
    d = X.shape[1]
    if sampler.kind == SAIES and sampler.W <= d + 1:
        raise ConfigurationError(f"SAIES needs more than d+1={d + 1} walkers")
    if sampler.W <= 2 * d:
        log.warning("W=%d walkers for dimension %d; at least 2d is recommended", sampler.W, d)
    lp = np.asarray(logpost(X), dtype=float).reshape(-1)
    if not np.all(np.isfinite(lp)):
        raise InitializationError(f"initial walkers {np.flatnonzero(~np.isfinite(lp)).tolist()} have zero posterior")
    rngs = [_WalkerRandom(np.random.default_rng(s), sampler.W, sampler.kind) for s in walk_seq.spawn(sampler.W)]
    K = sampler.kept
    samples = np.empty((sampler.W, K, d))
    lps = np.empty((sampler.W, K))
    acc_flags = np.zeros((sampler.W, K), bool)
    counts = np.zeros(sampler.W, int)
    k = 0
    for step in range(1, K * sampler.thin + 1):
        if sampler.kind == SAIES:
            X, lp, acc = saies_step(X, lp, logpost, sampler.a, rngs, sampler.proposal, sampler.mode)
        else:
            X, lp, acc = aies_step(X, lp, logpost, sampler.lam, rngs, sampler.mode)
        counts += acc
        if step % sampler.thin == 0:
            samples[:, k] = X
            lps[:, k] = lp
            acc_flags[:, k] = acc
            k += 1
            if progress is not None:
                progress(step, k)
    return Chain(samples, lps, acc_flags, counts, K * sampler.thin, sampler.burn_in)


def write_chain_csv(path, chain: Chain):
    """Rows ``walker,step,log_post,accepted,p_0..p_{d-1}`` (``%.12e`` values)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["walker", "step", "log_post", "accepted"] + [f"p_{i}" for i in range(chain.dim)])
        for walker in range(chain.W):
            for k in range(chain.kept):
                w.writerow(
                    [walker, k, f"{chain.log_post[walker, k]:.12e}", int(chain.accepted[walker, k])]
                    + [f"{v:.12e}" for v in chain.samples[walker, k]]
                )


def read_chain_csv(path, burn_in=None, raw_steps=None) -> Chain:
    """Inverse of :func:`write_chain_csv`; burn-in defaults to a fifth of the kept steps."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"chain file {path} holds no samples")
    body = np.array(rows[1:], dtype=float)
    W = int(body[:, 0].max()) + 1
    K = int(body[:, 1].max()) + 1
    if body.shape[0] != W * K:
        raise ShapeMismatchError("chain file is not a complete walker x step table")
    order = np.lexsort((body[:, 1], body[:, 0]))
    body = body[order]
    d = body.shape[1] - 4
    burn = K // 5 if burn_in is None else burn_in
    acc = body[:, 3].reshape(W, K).astype(bool)
    return Chain(
        body[:, 4:].reshape(W, K, d),
        body[:, 2].reshape(W, K),
        acc,
        acc.sum(axis=1),
        raw_steps if raw_steps is not None else K,
        burn,
    )


def write_diagnostics(path, chain: Chain):
    with open(path, "w") as fh:
        json.dump(chain.diagnostics(), fh, indent=2)
