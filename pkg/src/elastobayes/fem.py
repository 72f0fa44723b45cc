"""P1 finite elements and explicit time stepping for the scalar wave equation.

The truncated tissue region is a rectangle.  The top edge (``y = y_max``)
is the physical surface with a homogeneous Neumann condition; the other
three edges carry the first-order absorbing condition
``du/dn = -(1/c) du/dt`` with the background speed ``c``.  Nodal
coefficients follow the centered recurrence

    M a[n+1] = M (2 a[n] - a[n-1]) - dt^2 A a[n]
               - c dt B (a[n] - a[n-1]) + dt^2 f(t_n) G

with ``a[0] = a[1] = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import CFL_LIMIT, SimulationConfig
from .dataset import DataSet
from .errors import (
    CFLViolation,
    ConfigurationError,
    DomainError,
    InstabilityError,
    ShapeMismatchError,
)


# ----------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    """Structured right-triangle mesh; node ``(i, j)`` has index ``j * (nx + 1) + i``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    sigma_edges: np.ndarray = field(repr=False)
    artificial_edges: np.ndarray = field(repr=False)

    @property
    def hx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def hy(self):
        return (self.y_max - self.y_min) / self.ny

    @property
    def h(self):
        return min(self.hx, self.hy)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.triangles.shape[0]

    @property
    def grid_shape(self):
        """Shape ``(ny + 1, nx + 1)`` of nodal arrays reshaped row-major."""
        return (self.ny + 1, self.nx + 1)

    @property
    def element_area(self):
        return 0.5 * self.hx * self.hy

    @property
    def area(self):
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    @property
    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    @property
    def key(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny)

    def interpolation_matrix(self, points):
        """Sparse ``(P, n_nodes)`` matrix evaluating the P1 interpolant at ``points``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        tol = 1e-9 * max(self.hx, self.hy)
        bad = (
            (pts[:, 0] < self.x_min - tol)
            | (pts[:, 0] > self.x_max + tol)
            | (pts[:, 1] < self.y_min - tol)
            | (pts[:, 1] > self.y_max + tol)
        )
        if np.any(bad):
            raise DomainError(f"point {pts[np.argmax(bad)]} outside the mesh")
        u = (pts[:, 0] - self.x_min) / self.hx
        v = (pts[:, 1] - self.y_min) / self.hy
        i = np.clip(np.floor(u).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(v).astype(int), 0, self.ny - 1)
        xi = np.clip(u - i, 0.0, 1.0)
        eta = np.clip(v - j, 0.0, 1.0)
        n00 = j * (self.nx + 1) + i
        n10 = n00 + 1
        n01 = n00 + self.nx + 1
        n11 = n01 + 1
        lower = xi >= eta
        # lower triangle (n00, n10, n11), upper triangle (n00, n11, n01)
        cols = np.stack([n00, np.where(lower, n10, n01), n11], axis=1)
        w = np.stack(
            [
                np.where(lower, 1.0 - xi, 1.0 - eta),
                np.where(lower, xi - eta, eta - xi),
                np.where(lower, eta, xi),
            ],
            axis=1,
        )
        rows = np.repeat(np.arange(pts.shape[0]), 3)
        return sp.csr_matrix((w.ravel(), (rows, cols.ravel())), shape=(pts.shape[0], self.n_nodes))


def _cell_count(length, dx, strict):
    ratio = length / dx
    n = int(round(ratio))
    if abs(ratio - n) <= 1e-9 * max(ratio, 1.0) and n >= 1:
        return n
    if strict or ratio < 1.0 - 1e-9:
        raise ConfigurationError(f"step {dx} does not divide side length {length}")
    return int(np.ceil(ratio - 1e-9))


def build_mesh(config, strict=False) -> Mesh:
    """Structured triangulation of the configuration rectangle.

    When ``dx`` does not divide a side length, the cell count is rounded up
    and the step along that axis shrinks to ``length / count`` unless
    ``strict`` is set, in which case a :class:`ConfigurationError` is raised.
    A step larger than a side is always an error.
    """
    x_min, x_max, y_min, y_max = config.domain
    nx = _cell_count(x_max - x_min, config.dx, strict)
    ny = _cell_count(y_max - y_min, config.dx, strict)
    xs = np.linspace(x_min, x_max, nx + 1)
    ys = np.linspace(y_min, y_max, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (jj * (nx + 1) + ii).ravel()
    n10, n01 = n00 + 1, n00 + nx + 1
    n11 = n01 + 1
    tri = np.concatenate(
        [np.column_stack([n00, n10, n11]), np.column_stack([n00, n11, n01])]
    )

    def line(idx):
        idx = np.asarray(idx)
        return np.column_stack([idx[:-1], idx[1:]])

    top = line(ny * (nx + 1) + np.arange(nx + 1))
    bottom = line(np.arange(nx + 1))
    left = line(np.arange(ny + 1) * (nx + 1))
    right = line(np.arange(ny + 1) * (nx + 1) + nx)
    return Mesh(
        float(x_min), float(x_max), float(y_min), float(y_max), nx, ny,
        nodes, tri, top, np.concatenate([bottom, left, right]),
    )


# ----------------------------------------------------------------------------
# assembly


def _local_geometry(mesh):
    p = mesh.nodes[mesh.triangles]  # (ne, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of barycentric functions: rows of inv([d1 d2])^T
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)  # (ne, 3, 2)
    return area, grads


class _Pattern:
    """Sums element contributions into a fixed CSR sparsity pattern."""

    def __init__(self, rows, cols, n):
        keys = rows.astype(np.int64) * n + cols
        uniq, self.inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.indices = (uniq % n).astype(np.int32)
        r = uniq // n
        self.indptr = np.searchsorted(r, np.arange(n + 1)).astype(np.int32)
        self.nnz = uniq.size

    def matrix(self, values):
        data = np.bincount(self.inverse, weights=values, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


def mass_matrix(mesh):
    area, _ = _local_geometry(mesh)
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    vals = area[:, None, None] * local[None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    return _Pattern(rows, cols, mesh.n_nodes).matrix(vals.ravel())


def boundary_mass(mesh, edges=None):
    """Edge mass ``B_ji = int phi_j phi_i dS`` over the artificial boundary."""
    edges = mesh.artificial_edges if edges is None else edges
    if len(edges) == 0:
        return sp.csr_matrix((mesh.n_nodes, mesh.n_nodes))
    p = mesh.nodes[edges]
    length = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    vals = length[:, None, None] * local[None]
    rows = np.repeat(edges, 2, axis=1).ravel()
    cols = np.tile(edges, (1, 2)).ravel()
    return sp.csr_matrix((vals.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2)


def gaussian_load(mesh, centers, kappa):
    """Load vectors ``int g_k phi_j`` for normalized Gaussians ``exp(-|x-x_k|^2/kappa)/(pi kappa)``.

    Uses the 3-point edge-midpoint rule per triangle.  Returns an
    ``(n_nodes, K)`` array, one column per center.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    t = mesh.triangles
    area = np.full(t.shape[0], mesh.element_area)
    p = mesh.nodes[t]
    out = np.zeros((mesh.n_nodes, centers.shape[0]))
    for a, b in ((0, 1), (1, 2), (2, 0)):
        mid = 0.5 * (p[:, a] + p[:, b])
        d2 = ((mid[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        g = np.exp(-d2 / kappa) / (np.pi * kappa)
        contrib = (area / 3.0)[:, None] * 0.5 * g
        np.add.at(out, t[:, a], contrib)
        np.add.at(out, t[:, b], contrib)
    return out


def ricker(t, fM):
    """Ricker wavelet ``(1 - 2 pi^2 fM^2 t^2) exp(-pi^2 fM^2 t^2)`` with unit amplitude."""
    arg = (np.pi * fM * np.asarray(t, dtype=float)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


class MeshOperators:
    """Speed-independent operators of one mesh, shared by all speed fields.

    The mass matrix factorization is computed once on first use.
    """

    def __init__(self, mesh, config: SimulationConfig):
        self.mesh = mesh
        self.kappa = config.kappa
        self.M = mass_matrix(mesh)
        self.B = boundary_mass(mesh)
        self.G = gaussian_load(mesh, config.emitters, config.kappa).sum(axis=1)
        area, grads = _local_geometry(mesh)
        self._stiff_local = (area[:, None, None] * np.einsum("eik,ejk->eij", grads, grads)).reshape(
            mesh.n_elements, 9
        )
        t = mesh.triangles
        self._pattern = _Pattern(
            np.repeat(t, 3, axis=1).ravel(), np.tile(t, (1, 3)).ravel(), mesh.n_nodes
        )
        self._lu = None
        self._gauss_cache = {}

    @property
    def mass_solver(self):
        if self._lu is None:
            self._lu = spla.splu(self.M.tocsc(), permc_spec="MMD_AT_PLUS_A")  # least fill for this SPD pattern
        return self._lu

    def stiffness(self, c2):
        c2 = np.asarray(c2, dtype=float)
        return self._pattern.matrix((self._stiff_local * c2[:, None]).ravel())

    def point_sources(self, points):
        key = tuple(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2)))
        if key not in self._gauss_cache:
            self._gauss_cache[key] = gaussian_load(self.mesh, key, self.kappa)
        return self._gauss_cache[key]


@dataclass(eq=False)
class FEMSystem:
    """Assembled operators for one speed field (c^2 per element)."""

    mesh: Mesh
    M: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    G: np.ndarray
    speed: np.ndarray
    c_background: float
    ops: MeshOperators = field(repr=False)

    @property
    def c_max(self):
        return float(np.sqrt(self.speed.max()))


def assemble(mesh, speed, config, ops=None, absorbing=True) -> FEMSystem:
    """Assemble mass, stiffness, boundary-mass and source structures.

    ``speed`` holds one c^2 value per element.  ``ops`` lets callers reuse
    the speed-independent operators (and the mass factorization) of a mesh.
    """
    speed = np.asarray(speed, dtype=float)
    if speed.shape != (mesh.n_elements,):
        raise ShapeMismatchError(f"speed has shape {speed.shape}, mesh has {mesh.n_elements} elements")
    if not np.all(speed > 0):
        raise DomainError("speed field must be positive")
    if ops is None:
        ops = MeshOperators(mesh, config)
    elif ops.mesh is not mesh:
        raise ShapeMismatchError("operators built for a different mesh")
    B = ops.B if absorbing else sp.csr_matrix(ops.B.shape)
    return FEMSystem(mesh, ops.M, ops.stiffness(speed), B, ops.G, speed, config.c_background, ops)


# ----------------------------------------------------------------------------
# time stepping


@dataclass(eq=False)
class WaveSolution:
    """Nodal history of a time-stepped field.

    ``values[i]`` is the nodal vector at step ``stored_steps[i]``;
    ``traces[n, p]`` the value at probe ``p`` after step ``n`` (every step).
    """

    mesh: Mesh
    dt: float
    n_steps: int
    stored_steps: np.ndarray
    values: np.ndarray | None
    probe_points: np.ndarray | None = None
    traces: np.ndarray | None = None
    energy: np.ndarray | None = None

    @property
    def stored_times(self):
        return self.stored_steps * self.dt

    @property
    def step_times(self):
        return np.arange(self.n_steps + 1) * self.dt

    def scaled(self, s):
        return WaveSolution(
            self.mesh, self.dt, self.n_steps, self.stored_steps,
            None if self.values is None else s * self.values,
            self.probe_points,
            None if self.traces is None else s * self.traces,
        )


def check_cfl(system, dt):
    ratio = system.c_max * dt / system.mesh.h
    if ratio > CFL_LIMIT:
        raise CFLViolation(f"c_max dt / dx = {ratio:.4g} exceeds {CFL_LIMIT}")


def time_march(
    systems,
    dt,
    n_steps,
    sources=None,
    amplitudes=None,
    a0=None,
    a1=None,
    probes=None,
    store=None,
    energy=False,
):
    """Run the recurrence for one or several systems sharing a mesh.

    Parameters
    ----------
    systems : FEMSystem or list of FEMSystem
        All systems must share the same :class:`MeshOperators`.
    sources : (n_nodes, s) array, optional
        Spatial forcing columns; forcing at step n is ``sources @ amplitudes[n]``.
    amplitudes : (n_steps + 1, s) array, optional
    a0, a1 : (n_nodes,) arrays, optional
        Initial levels; zero by default.
    probes : (P, n_nodes) sparse matrix, optional
        Values ``probes @ a[n]`` are kept for every step.
    store : boolean mask of length ``n_steps + 1``, optional
        Steps whose full nodal vector is retained.
    energy : bool
        Track the staggered discrete energy
        ``0.5 |a[n+1]-a[n]|_M^2 / dt^2 + 0.5 a[n+1]^T A a[n]`` (single system).

    Returns
    -------
    list of dict with ``values``, ``traces`` and ``energy`` entries.
    """
    single = isinstance(systems, FEMSystem)
    systems = [systems] if single else list(systems)
    b = len(systems)
    ops = systems[0].ops
    if any(s.ops is not ops for s in systems):
        raise ShapeMismatchError("batched systems must share mesh operators")
    if energy and b != 1:
        raise ValueError("energy tracking needs a single system")
    for s in systems:
        check_cfl(s, dt)
    n = ops.mesh.n_nodes
    lu = ops.mass_solver
    if b == 1:
        A = systems[0].A
        apply_A = lambda X: A @ X  # noqa: E731
    else:
        A = sp.block_diag([s.A for s in systems], format="csr")
        apply_A = lambda X: (A @ X.T.reshape(-1)).reshape(b, n).T  # noqa: E731
    B = systems[0].B
    bnodes = np.unique(B.nonzero()[0])
    Bsub = B[bnodes][:, bnodes].tocsr() if bnodes.size else None
    cB = systems[0].c_background * dt
    dt2 = dt * dt

    forcing = None
    if sources is not None:
        sources = np.asarray(sources, dtype=float)
        if sources.ndim == 1:
            sources = sources[:, None]
        amplitudes = np.asarray(amplitudes, dtype=float).reshape(n_steps + 1, sources.shape[1])
        forcing = lambda k: sources @ amplitudes[k]  # noqa: E731

    prev = np.zeros((n, b)) if a0 is None else np.tile(np.asarray(a0, float)[:, None], (1, b))
    cur = np.zeros((n, b)) if a1 is None else np.tile(np.asarray(a1, float)[:, None], (1, b))
    store = np.zeros(n_steps + 1, bool) if store is None else np.asarray(store, bool)
    stored = [[] for _ in range(b)]
    for k in (0, 1):
        if k <= n_steps and store[k]:
            for q in range(b):
                stored[q].append((prev if k == 0 else cur)[:, q].copy())
    traces = None
    if probes is not None:
        traces = np.zeros((n_steps + 1, probes.shape[0], b))
        traces[0] = probes @ prev
        if n_steps >= 1:
            traces[1] = probes @ cur
    en = np.zeros(max(n_steps, 0)) if energy else None
    if energy and n_steps >= 1:
        d = cur[:, 0] - prev[:, 0]
        en[0] = 0.5 * d @ (ops.M @ d) / dt2 + 0.5 * cur[:, 0] @ (A @ prev[:, 0])

    for k in range(1, n_steps):
        rhs = -dt2 * apply_A(cur)
        if Bsub is not None:
            rhs[bnodes] -= cB * (Bsub @ (cur[bnodes] - prev[bnodes]))
        if forcing is not None:
            rhs += dt2 * forcing(k)[:, None]
        nxt = 2.0 * cur - prev + lu.solve(rhs)
        if not np.isfinite(nxt.sum()):
            raise InstabilityError(k + 1)
        prev, cur = cur, nxt
        if store[k + 1]:
            for q in range(b):
                stored[q].append(cur[:, q].copy())
        if traces is not None:
            traces[k + 1] = probes @ cur
        if energy:
            d = cur[:, 0] - prev[:, 0]
            en[k] = 0.5 * d @ (ops.M @ d) / dt2 + 0.5 * cur[:, 0] @ (A @ prev[:, 0])

    out = []
    for q in range(b):
        out.append(
            {
                "values": np.array(stored[q]) if stored[q] else None,
                "traces": None if traces is None else traces[:, :, q],
                "energy": en,
            }
        )
    return out[0] if single else out


def stride_mask(n_steps, stride, start_step=0):
    mask = np.zeros(n_steps + 1, bool)
    if stride:
        mask[start_step::stride] = True
    return mask


def solve_forward(
    system,
    config,
    source_scale=1.0,
    probes=None,
    store_stride=None,
    energy=False,
) -> WaveSolution:
    """Forward wave solve with the emitter Ricker source.

    ``probes`` are points whose traces are kept at every step (receivers
    by default); ``store_stride`` keeps the full nodal vector every that many
    steps (``1`` keeps the whole history, ``None`` none).
    """
    return solve_forward_batch([system], config, source_scale, probes, store_stride, energy)[0]


def solve_forward_batch(systems, config, source_scale=1.0, probes=None, store_stride=None, energy=False):
    """:func:`solve_forward` for several speed fields on one mesh, stepped together."""
    systems = list(systems)
    mesh = systems[0].mesh
    n_steps = config.n_steps
    probe_points = np.asarray(config.receivers if probes is None else probes, float).reshape(-1, 2)
    P = mesh.interpolation_matrix(probe_points)
    amps = source_scale * ricker(np.arange(n_steps + 1) * config.dt, config.fM)
    mask = stride_mask(n_steps, store_stride)
    res = time_march(
        systems, config.dt, n_steps, sources=systems[0].G, amplitudes=amps,
        probes=P, store=mask, energy=energy,
    )
    steps = np.flatnonzero(mask)
    return [
        WaveSolution(mesh, config.dt, n_steps, steps, r["values"], probe_points, r["traces"], r["energy"])
        for r in res
    ]


def held_residual(residual: DataSet, t, tau_end, hold=None):
    """Zero-order hold of residual samples: value of the last sample time ``<= t``.

    Zero before the first sample, after ``tau_end`` and later than ``hold``
    past the last sample.
    """
    times = residual.times
    if hold is None:
        hold = float(np.median(np.diff(times))) if times.size > 1 else 0.0
    t = np.asarray(t, dtype=float)
    j = np.searchsorted(times, t + 1e-12, side="right") - 1
    ok = (j >= 0) & (t <= tau_end + 1e-12) & (t < times[-1] + hold - 1e-12)
    out = np.zeros((t.size, residual.K))
    out[ok] = residual.values[:, j[ok]].T
    return out


def solve_adjoint(system, residual: DataSet, config, store_stride=None, hold=None) -> WaveSolution:
    """Time-reversed solve driven by receiver residuals.

    Substitutes ``s = T - t`` (``T = n_steps * dt``), runs the forward
    recurrence in ``s`` with right-hand side ``sum_k res_k(T - s) g_k`` where
    ``g_k`` are Gaussian-regularized Dirac masses at the receivers, and
    returns the field indexed by the original time.
    """
    rec_times = config.times
    for t in residual.times:
        if not np.any(np.isclose(rec_times, t, rtol=0, atol=1e-9)):
            raise ShapeMismatchError(f"residual time {t} not on the recording grid")
    n_steps = config.n_steps
    t_orig = (n_steps - np.arange(n_steps + 1)) * config.dt  # original time of s-step m
    amps = held_residual(residual, t_orig, config.tau_end, hold)
    sources = system.ops.point_sources(residual.receivers)
    mask_orig = stride_mask(n_steps, store_stride)
    mask_s = mask_orig[::-1].copy()
    r = time_march(system, config.dt, n_steps, sources=sources, amplitudes=amps, store=mask_s)
    steps = np.flatnonzero(mask_orig)
    values = None if r["values"] is None else r["values"][::-1].copy()
    return WaveSolution(system.mesh, config.dt, n_steps, steps, values)


def _time_interp(level_times, V, q):
    """Linear interpolation of rows of V (levels x P) at times q."""
    L = level_times.size
    if L == 1:
        return np.repeat(V[:1], q.size, axis=0)
    i = np.clip(np.searchsorted(level_times, q, side="right") - 1, 0, L - 2)
    w = (q - level_times[i]) / (level_times[i + 1] - level_times[i])
    return (1.0 - w)[:, None] * V[i] + w[:, None] * V[i + 1]


def record(solution: WaveSolution, receivers, times) -> DataSet:
    """Sample a solution at receivers (P1 in space) and times (linear in time).

    Returns a ``K x M`` :class:`DataSet`.
    """
    receivers = np.asarray(receivers, dtype=float).reshape(-1, 2)
    times = np.asarray(times, dtype=float)
    tmax = solution.n_steps * solution.dt
    if times.min() < -1e-12 or times.max() > tmax + 1e-9:
        raise DomainError("record times outside the simulated interval")
    P = solution.mesh.interpolation_matrix(receivers)  # raises DomainError
    if (
        solution.traces is not None
        and solution.probe_points is not None
        and solution.probe_points.shape == receivers.shape
        and np.allclose(solution.probe_points, receivers)
    ):
        vals = _time_interp(solution.step_times, solution.traces, times)
    elif solution.values is not None:
        at_rec = (P @ solution.values.T).T  # levels x K
        lt = solution.stored_times
        if times.min() < lt[0] - 1e-12 or times.max() > lt[-1] + 1e-9:
            raise DomainError("record times outside the stored levels")
        vals = _time_interp(lt, at_rec, times)
    else:
        raise ShapeMismatchError("solution holds neither matching probe traces nor nodal history")
    return DataSet(vals.T, receivers, times)


# ----------------------------------------------------------------------------
# field export


def write_field(path, mesh, values):
    """Write nodal values: header ``nx ny x_min x_max y_min y_max`` (node counts), then rows."""
    grid = np.asarray(values, dtype=float).reshape(mesh.grid_shape)
    with open(path, "w") as fh:
        fh.write(f"{mesh.nx + 1} {mesh.ny + 1} {mesh.x_min:.12e} {mesh.x_max:.12e} "
                 f"{mesh.y_min:.12e} {mesh.y_max:.12e}\n")
        np.savetxt(fh, grid, fmt="%.12e")


def read_field(path):
    """Return ``(header, grid)`` from a field file."""
    with open(path) as fh:
        head = fh.readline().split()
        grid = np.loadtxt(fh, ndmin=2)
    nx, ny = int(head[0]), int(head[1])
    if grid.shape != (ny, nx):
        raise ShapeMismatchError(f"{path}: expected {ny}x{nx} values, found {grid.shape}")
    return (nx, ny, *map(float, head[2:])), grid
