"""Star-shaped anomaly parametrizations, admissibility and rasterization.

Two radius models share one block layout ``(cx, cy, <radius params>, mu)``:

* smooth: ``(cx, cy, a0, b1, a1, ..., bQ, aQ, mu)`` with
  ``r(t) = a0 + 2 sum_q a_q cos(2 pi q t) + 2 sum_q b_q sin(2 pi q t)``;
* piecewise: ``(cx, cy, r_0, ..., r_{Z-1}, mu)`` with linear interpolation
  between the nodes ``t_j = j / Z`` and ``r_Z = r_0``.

``mu`` is stored as the dimensionless squared speed of the anomaly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ShapeMismatchError

SMOOTH = "smooth"
PIECEWISE = "piecewise"
VARIANTS = (SMOOTH, PIECEWISE)


def block_length(variant, order):
    if variant == SMOOTH:
        return 2 * order + 4
    if variant == PIECEWISE:
        return order + 3
    raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Flattened parameters of ``L`` anomalies of one variant.

    ``order`` is the number of Fourier modes ``Q`` (smooth) or of radius
    nodes ``Z`` (piecewise).
    """

    values: np.ndarray
    variant: str = SMOOTH
    order: int = 5

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        blen = block_length(self.variant, self.order)
        if v.size % blen:
            raise ShapeMismatchError(f"length {v.size} is not a multiple of block length {blen}")
        object.__setattr__(self, "values", v)

    @property
    def block_len(self):
        return block_length(self.variant, self.order)

    @property
    def L(self):
        return self.values.size // self.block_len

    @property
    def n(self):
        return self.values.size

    @property
    def blocks(self):
        return self.values.reshape(self.L, self.block_len)

    def center(self, l):
        return self.blocks[l, :2]

    def mu(self, l):
        return self.blocks[l, -1]

    @property
    def mu_indices(self):
        return np.arange(self.L) * self.block_len + self.block_len - 1

    def with_values(self, values):
        return ParameterVector(values, self.variant, self.order)

    def radius(self, l, theta):
        blk = self.blocks[l]
        if self.variant == SMOOTH:
            return radius_smooth(blk, theta)
        return radius_piecewise(blk, theta)

    def __repr__(self):
        return f"ParameterVector({self.variant}, order={self.order}, L={self.L})"


def smooth_block(cx, cy, a0, a=(), b=(), mu=16.0, Q=5):
    """Build a smooth block from coefficient lists (zero padded to ``Q``)."""
    blk = np.zeros(2 * Q + 4)
    blk[:3] = cx, cy, a0
    for q, v in enumerate(b, start=1):
        blk[2 * q + 1] = v
    for q, v in enumerate(a, start=1):
        blk[2 * q + 2] = v
    blk[-1] = mu
    return blk


def piecewise_block(cx, cy, radii, mu=16.0):
    return np.concatenate([[cx, cy], np.asarray(radii, dtype=float), [mu]])


def circle(cx, cy, radius, mu=16.0, variant=SMOOTH, order=5):
    """Block for a circle in either variant."""
    if variant == SMOOTH:
        return smooth_block(cx, cy, radius, mu=mu, Q=order)
    return piecewise_block(cx, cy, np.full(order, radius), mu)


def from_blocks(blocks, variant=SMOOTH, order=5):
    blocks = [np.asarray(b, dtype=float) for b in blocks]
    values = np.concatenate(blocks) if blocks else np.zeros(0)
    return ParameterVector(values, variant, order)


def radius_smooth(block, theta):
    """Trigonometric radius; may be negative."""
    block = np.asarray(block, dtype=float)
    Q = (block.size - 4) // 2
    theta = np.asarray(theta, dtype=float)
    r = np.full(theta.shape, block[2])
    for q in range(1, Q + 1):
        arg = 2.0 * np.pi * q * theta
        r = r + 2.0 * block[2 * q + 2] * np.cos(arg) + 2.0 * block[2 * q + 1] * np.sin(arg)
    return r


def radius_piecewise(block, theta):
    """Periodic linear interpolation of the nodal radii."""
    block = np.asarray(block, dtype=float)
    radii = block[2:-1]
    Z = radii.size
    s = np.mod(np.asarray(theta, dtype=float), 1.0) * Z
    j = np.floor(s).astype(int) % Z
    w = s - np.floor(s)
    return (1.0 - w) * radii[j] + w * radii[(j + 1) % Z]


def _radius(block, variant, theta):
    return radius_smooth(block, theta) if variant == SMOOTH else radius_piecewise(block, theta)


def boundary(block, samples, variant=SMOOTH):
    """Closed polyline ``q(t_i)`` at ``t_i = i / samples`` (last point joins the first)."""
    if samples < 4:
        raise ValueError("need at least 4 boundary samples")
    block = np.asarray(block, dtype=float)
    theta = np.arange(samples) / samples
    r = _radius(block, variant, theta)
    ang = 2.0 * np.pi * theta
    return block[:2] + r[:, None] * np.column_stack([np.cos(ang), np.sin(ang)])


def polar_angle(points, center):
    d = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(center, dtype=float)
    theta = np.arctan2(d[:, 1], d[:, 0]) / (2.0 * np.pi)
    return np.mod(theta, 1.0), np.hypot(d[:, 0], d[:, 1])


def contains(block, points, variant=SMOOTH):
    """Strict star-shaped membership ``|p - c| < r(angle(p - c))``.

    Returns a boolean array (a scalar bool for a single point).
    """
    pts = np.asarray(points, dtype=float)
    theta, dist = polar_angle(pts, np.asarray(block)[:2])
    inside = dist < _radius(block, variant, theta)
    return bool(inside[0]) if pts.ndim == 1 else inside


@dataclass(frozen=True)
class AdmissibilityRule:
    """Constraints defining the support of the prior.

    ``theta_samples`` sets the boundary test grid for smooth shapes (the
    piecewise variant is tested at its own nodes).  ``mu_min`` is a strict
    lower bound on each anomaly's ``mu``.
    """

    theta_samples: int = 256
    mu_min: float = 0.0
    check_domain: bool = True
    check_overlap: bool = True

    def __post_init__(self):
        if self.theta_samples < 64:
            raise ValueError("theta_samples must be >= 64")


def _segments_intersect(P, Q):
    """Whether any segment of closed polyline P crosses any segment of Q."""
    p0, p1 = P, np.roll(P, -1, axis=0)
    q0, q1 = Q, np.roll(Q, -1, axis=0)
    # bounding-box prefilter
    pl, ph = np.minimum(p0, p1), np.maximum(p0, p1)
    ql, qh = np.minimum(q0, q1), np.maximum(q0, q1)
    if np.any(ph.max(0) < ql.min(0)) or np.any(qh.max(0) < pl.min(0)):
        return False
    near = np.all(
        (pl[:, None, :] <= qh[None, :, :]) & (ql[None, :, :] <= ph[:, None, :]), axis=2
    )
    i, j = np.nonzero(near)
    if i.size == 0:
        return False
    a, b, c, d = p0[i], p1[i], q0[j], q1[j]

    def orient(u, v, w):
        return (v[:, 0] - u[:, 0]) * (w[:, 1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (w[:, 0] - u[:, 0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return bool(np.any((o1 * o2 <= 0) & (o3 * o4 <= 0)))


def violations(nu: ParameterVector, rule: AdmissibilityRule = AdmissibilityRule(), domain=None):
    """Names of the admissibility constraints violated by ``nu`` (empty if admissible)."""
    out = []
    polys = []
    samples = rule.theta_samples if nu.variant == SMOOTH else nu.order
    theta = np.arange(samples) / samples
    for l in range(nu.L):
        blk = nu.blocks[l]
        if not np.all(np.isfinite(blk)):
            out.append("non-finite parameter")
            return out
        r = _radius(blk, nu.variant, theta)
        if np.any(r <= 0):
            out.append("radius")
        if blk[-1] <= rule.mu_min:
            out.append("mu")
        ang = 2.0 * np.pi * theta
        polys.append(blk[:2] + r[:, None] * np.column_stack([np.cos(ang), np.sin(ang)]))
    if out:
        return sorted(set(out))
    if rule.check_domain and domain is not None:
        x0, x1, y0, y1 = domain
        for P in polys:
            if P[:, 0].min() < x0 or P[:, 0].max() > x1 or P[:, 1].min() < y0 or P[:, 1].max() > y1:
                out.append("domain")
                break
    if rule.check_overlap:
        for l in range(nu.L):
            for m in range(l + 1, nu.L):
                if _segments_intersect(polys[l], polys[m]):
                    out.append("intersection")
                elif contains(nu.blocks[l], nu.blocks[m][:2], nu.variant) or contains(
                    nu.blocks[m], nu.blocks[l][:2], nu.variant
                ):
                    out.append("nested")
    return sorted(set(out))


def admissible(nu: ParameterVector, rule: AdmissibilityRule = AdmissibilityRule(), domain=None):
    """True iff ``nu`` satisfies every constraint of ``rule`` (and lies in ``domain``)."""
    return not violations(nu, rule, domain)


def subtriangle_barycentric(s):
    """Barycentric centroids of the ``s^2`` equal-area sub-triangles of a triangle."""
    pts = []
    for i in range(s):
        for j in range(s - i):
            pts.append(((i + 1 / 3) / s, (j + 1 / 3) / s))
            if i + j <= s - 2:
                pts.append(((i + 2 / 3) / s, (j + 2 / 3) / s))
    return np.array(pts)


def rasterize(nu: ParameterVector, mesh, c_background, rule=None, check=True, supersample=1):
    """Per-element c^2 from the anomaly membership of each element.

    With ``supersample == 1`` an element takes the ``mu`` of the first block
    containing its centroid.  With ``supersample = s > 1`` the element value
    is the average over ``s^2`` equal-area sub-triangle centroids, so the
    coefficient varies almost continuously with the shape parameters.
    """
    if check:
        rule = AdmissibilityRule() if rule is None else rule
        bad = violations(nu, rule, (mesh.x_min, mesh.x_max, mesh.y_min, mesh.y_max))
        if bad:
            raise ContractViolation(f"inadmissible parameters: {', '.join(bad)}")
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    bg = float(c_background) ** 2
    speed = np.full(mesh.n_elements, bg)
    if nu.L == 0:
        return speed
    cen = mesh.centroids
    if supersample == 1:
        free = np.ones(mesh.n_elements, bool)
        for l in range(nu.L):
            blk = nu.blocks[l]
            reach = _max_radius(blk, nu.variant)
            cand = np.flatnonzero(free & (np.abs(cen[:, 0] - blk[0]) < reach) & (np.abs(cen[:, 1] - blk[1]) < reach))
            if cand.size == 0:
                continue
            hit = cand[contains(blk, cen[cand], nu.variant)]
            speed[hit] = blk[-1]
            free[hit] = False
        return speed
    bary = subtriangle_barycentric(supersample)
    w = np.column_stack([1.0 - bary.sum(axis=1), bary])  # weights of vertices 0, 1, 2
    pad = mesh.h
    claimed = np.zeros((mesh.n_elements, bary.shape[0]), bool)
    for l in range(nu.L):
        blk = nu.blocks[l]
        reach = _max_radius(blk, nu.variant) + pad
        cand = np.flatnonzero((np.abs(cen[:, 0] - blk[0]) < reach) & (np.abs(cen[:, 1] - blk[1]) < reach))
        if cand.size == 0:
            continue
        verts = mesh.nodes[mesh.triangles[cand]]  # (c, 3, 2)
        pts = np.einsum("qv,cvd->cqd", w, verts).reshape(-1, 2)
        inside = contains(blk, pts, nu.variant).reshape(cand.size, -1)
        inside &= ~claimed[cand]
        claimed[cand] |= inside
        frac = inside.mean(axis=1)
        speed[cand] += frac * (blk[-1] - bg)
    return speed


def _max_radius(block, variant):
    if variant == SMOOTH:
        Q = (len(block) - 4) // 2
        return abs(block[2]) + 2.0 * np.abs(block[3 : 3 + 2 * Q]).sum() + 1e-12
    return np.abs(block[2:-1]).max() + 1e-12


# ----------------------------------------------------------------------------
# CSV round trip


def _field_names(variant, order):
    if variant == SMOOTH:
        names = [("cx", 0), ("cy", 0), ("a0", 0)]
        for q in range(1, order + 1):
            names += [("b", q), ("a", q)]
    else:
        names = [("cx", 0), ("cy", 0)] + [("r", j) for j in range(order)]
    return names + [("mu", 0)]


def write_shapes_csv(path, nu: ParameterVector):
    names = _field_names(nu.variant, nu.order)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["block", "variant", "field", "index", "value"])
        for l in range(nu.L):
            for (name, idx), v in zip(names, nu.blocks[l]):
                w.writerow([l, nu.variant, name, idx, f"{v:.12e}"])


def read_shapes_csv(path) -> ParameterVector:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ShapeMismatchError(f"{path}: no parameter rows")
    variant = rows[0]["variant"]
    nblocks = max(int(r["block"]) for r in rows) + 1
    if variant == SMOOTH:
        order = max([int(r["index"]) for r in rows if r["field"] in ("a", "b")], default=0)
    else:
        order = sum(1 for r in rows if r["field"] == "r" and int(r["block"]) == 0)
    names = _field_names(variant, order)
    pos = {nm: i for i, nm in enumerate(names)}
    blen = len(names)
    values = np.zeros(nblocks * blen)
    for r in rows:
        values[int(r["block"]) * blen + pos[(r["field"], int(r["index"]))]] = float(r["value"])
    return ParameterVector(values, variant, order)
