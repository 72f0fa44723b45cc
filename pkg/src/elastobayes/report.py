"""Summaries of posterior samples: MAP and mean shapes, membership fields, shape statistics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError
from .mcmc import Chain
from .shapes import _radius, boundary, contains, violations

log = logging.getLogger(__name__)

STAT_COLUMNS = (
    "sample", "block", "cx", "cy", "area", "diam_max", "diam_min", "orientation",
    "circularity_dev", "r_min", "r_max", "mu",
)


def map_from_chain(chain: Chain):
    """Post-burn-in state with the largest log-posterior (earliest walker, then step, on ties)."""
    lp = chain.post_burn_log_post()
    if lp.size == 0:
        raise ValueError("chain has no post-burn-in samples")
    i = int(np.argmax(lp))
    return chain.post_burn()[i], float(lp[i])


def mean_shape(chain: Chain, prior=None):
    """Coordinate-wise mean of the post-burn-in states.

    The mean is taken in the chain's (sampling) coordinates; ``prior``
    maps it back to a :class:`ParameterVector`, otherwise the raw vector is
    returned.  The result may be inadmissible.
    """
    X = chain.post_burn()
    if X.shape[0] == 0:
        raise ValueError("chain has no post-burn-in samples")
    m = X.mean(axis=0)
    return prior.to_params(m) if prior is not None else m


@dataclass(frozen=True, eq=False)
class MembershipField:
    """Fraction of samples containing each grid node; ``values[j, i]`` at ``(x[i], y[j])``."""

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    n_samples: int = 0

    def __post_init__(self):
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("membership values must lie in [0, 1]")

    def level_set(self, level=0.5):
        return self.values >= level


def grid_spec(domain, h):
    x0, x1, y0, y1 = domain
    nx = int(round((x1 - x0) / h))
    ny = int(round((y1 - y0) / h))
    return np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)


def membership_field(samples, x, y, rule=None, domain=None):
    """Empirical probability that a grid node lies inside any anomaly.

    Inadmissible samples are skipped (when ``rule`` is given).
    """
    X, Y = np.meshgrid(x, y)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    count = np.zeros(pts.shape[0], int)
    used = 0
    for nu in samples:
        if rule is not None and violations(nu, rule, domain):
            continue
        used += 1
        hit = np.zeros(pts.shape[0], bool)
        for blk in nu.blocks:
            reach = np.abs(_radius(blk, nu.variant, np.arange(256) / 256)).max() * 1.05 + 1e-9
            near = np.flatnonzero((np.abs(pts[:, 0] - blk[0]) <= reach) & (np.abs(pts[:, 1] - blk[1]) <= reach))
            hit[near[contains(blk, pts[near], nu.variant)]] = True
        count += hit
    if used == 0:
        raise ValueError("no admissible sample for the membership field")
    return MembershipField(np.asarray(x), np.asarray(y), (count / used).reshape(X.shape), used)


def jaccard(a, b):
    """Intersection over union of two boolean masks (1 when both are empty)."""
    a, b = np.asarray(a, bool), np.asarray(b, bool)
    if a.shape != b.shape:
        raise ShapeMismatchError("masks differ in shape")
    union = np.logical_or(a, b).sum()
    return 1.0 if union == 0 else float(np.logical_and(a, b).sum() / union)


def polygon_stats(P):
    """Area, centroid, perimeter and central second moments of a closed polygon.

    Returns ``(area, centroid, perimeter, C)`` with ``C`` the 2x2 matrix of
    second moments divided by the area.  Vertex order may be either sense.
    """
    P = np.asarray(P, dtype=float)
    x, y = P[:, 0], P[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    A = 0.5 * cross.sum()
    if abs(A) < 1e-12:
        raise ValueError("degenerate polygon")
    cx = ((x + xn) * cross).sum() / (6.0 * A)
    cy = ((y + yn) * cross).sum() / (6.0 * A)
    ixx = ((x * x + x * xn + xn * xn) * cross).sum() / 12.0
    iyy = ((y * y + y * yn + yn * yn) * cross).sum() / 12.0
    ixy = ((x * yn + 2 * x * y + 2 * xn * yn + xn * y) * cross).sum() / 24.0
    C = np.array([[ixx / A - cx * cx, ixy / A - cx * cy], [ixy / A - cx * cy, iyy / A - cy * cy]])
    perim = np.hypot(xn - x, yn - y).sum()
    return abs(A), np.array([cx, cy]), perim, C


def block_stats(block, variant, samples=512):
    """Statistics of one anomaly from its ``samples``-point boundary polygon.

    Diameters are those of the ellipse with the same second moments
    (``4 sqrt(eigenvalue)``); the orientation is the angle of its major axis
    in ``[0, pi)``; the circularity deviation is ``1 - 4 pi A / P^2``.
    """
    P = boundary(block, samples, variant)
    A, c, perim, C = polygon_stats(P)
    w, V = np.linalg.eigh(C)
    w = np.clip(w, 0.0, None)
    major = V[:, 1]
    ang = float(np.mod(np.arctan2(major[1], major[0]), np.pi))
    if ang >= np.pi:
        ang = 0.0
    r = _radius(block, variant, np.arange(samples) / samples)
    return {
        "cx": c[0], "cy": c[1], "area": A,
        "diam_max": 4.0 * np.sqrt(w[1]), "diam_min": 4.0 * np.sqrt(w[0]),
        "orientation": ang, "circularity_dev": 1.0 - 4.0 * np.pi * A / perim**2,
        "r_min": float(r.min()), "r_max": float(r.max()), "mu": float(block[-1]),
    }


def shape_stats(samples, rule=None, domain=None, boundary_samples=512):
    """Per-sample, per-block statistics table (dict of column arrays).

    Inadmissible samples and degenerate polygons are skipped; the number of
    skipped samples is returned as the second value.
    """
    rows = []
    skipped = 0
    for s, nu in enumerate(samples):
        if rule is not None and violations(nu, rule, domain):
            skipped += 1
            continue
        try:
            stats = [block_stats(blk, nu.variant, boundary_samples) for blk in nu.blocks]
        except ValueError:
            log.warning("sample %d has a degenerate boundary; skipped", s)
            skipped += 1
            continue
        for l, st in enumerate(stats):
            rows.append({"sample": s, "block": l, **st})
    table = {k: np.array([r[k] for r in rows]) for k in STAT_COLUMNS}
    return table, skipped


def write_stats_csv(path, table):
    n = len(table["sample"])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STAT_COLUMNS)
        for i in range(n):
            w.writerow([int(table["sample"][i]), int(table["block"][i])]
                       + [f"{table[k][i]:.12e}" for k in STAT_COLUMNS[2:]])


def write_membership_csv(path, mf: MembershipField):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "probability"])
        for j, yy in enumerate(mf.y):
            for i, xx in enumerate(mf.x):
                w.writerow([f"{xx:.6e}", f"{yy:.6e}", f"{mf.values[j, i]:.12e}"])


def write_samples_csv(path, X, admissible=None):
    """Sample matrix with an admissibility flag column."""
    X = np.atleast_2d(X)
    ok = np.ones(X.shape[0], bool) if admissible is None else np.asarray(admissible, bool)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "admissible"] + [f"p_{i}" for i in range(X.shape[1])])
        for i, x in enumerate(X):
            w.writerow([i, int(ok[i])] + [f"{v:.12e}" for v in x])


def read_samples_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"samples file {path} holds no samples")
    body = np.array(rows[1:], dtype=float)
    return body[:, 2:], body[:, 1].astype(bool)


def to_vectors(X, prior):
    """Rows in sampling coordinates to ParameterVectors."""
    return [prior.to_params(x) for x in np.atleast_2d(X)]

