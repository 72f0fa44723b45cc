"""Topological energy fields and anomaly detection.

The energy ``E(x) = int |U(x,s)|^2 |P(x,s)|^2 ds`` combines the forward
field of the anomaly-free medium with the adjoint field driven by the
data residual at the receivers.  Its peaks locate scatterers without
knowing their material parameters.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import fem
from .dataset import DataSet
from .errors import ConfigurationError, DetectionError, ShapeMismatchError
from .prior import CircleGuess
from .shapes import SMOOTH, AdmissibilityRule, ParameterVector, circle, from_blocks, rasterize

log = logging.getLogger(__name__)


def default_fractions(K, parts=3):
    """Left, centred and right overlapping windows of the transducer array."""
    size = min(K, int(np.ceil(K / parts)) + 2)
    starts = sorted({0, (K - size) // 2, K - size})
    return tuple(tuple(range(s, s + size)) for s in starts)


@dataclass(frozen=True)
class TopoConfig:
    C0: float = 0.3
    fractions: tuple | None = None
    peak_min_separation: float = 1.5
    select_C0: bool = True
    C0_halvings: int = 5
    mu_heuristic_factor: float = 2.0
    surface_mute: float = 1.0

    def __post_init__(self):
        if not 0 < self.C0 < 1:
            raise ConfigurationError("C0 must lie in (0, 1)")
        if self.fractions is not None:
            if not self.fractions or any(len(f) == 0 for f in self.fractions):
                raise ConfigurationError("fractions must be non-empty subsets")

    def resolved_fractions(self, K):
        return self.fractions if self.fractions is not None else default_fractions(K)


@dataclass(frozen=True, eq=False)
class EnergyField:
    mesh: fem.Mesh = field(repr=False)
    values: np.ndarray = field(repr=False)
    fraction_id: int = -1

    def __post_init__(self):
        if np.any(self.values < 0):
            raise ValueError("energy must be non-negative")

    @property
    def grid(self):
        return self.values.reshape(self.mesh.grid_shape)

    def argmax_point(self):
        return self.mesh.nodes[int(np.argmax(self.values))]

    def muted(self, depth):
        """Copy with nodes closer than ``depth`` to the top surface set to zero."""
        if depth <= 0:
            return self
        vals = np.where(self.mesh.nodes[:, 1] > self.mesh.y_max - depth, 0.0, self.values)
        return EnergyField(self.mesh, vals, self.fraction_id)


def record_stride(config):
    stride = config.record_step / config.dt
    if abs(stride - round(stride)) > 1e-6:
        raise ConfigurationError("record_step must be a multiple of dt")
    return int(round(stride))


def homogeneous_system(config, ops=None):
    ops = ops if ops is not None else fem.MeshOperators(fem.build_mesh(config), config)
    speed = np.full(ops.mesh.n_elements, config.c_background**2)
    return fem.assemble(ops.mesh, speed, config, ops)


def forward_homogeneous(config, ops=None, system=None) -> fem.WaveSolution:
    """Anomaly-free forward field, nodal history kept every recording step."""
    system = system if system is not None else homogeneous_system(config, ops)
    return fem.solve_forward(system, config, store_stride=record_stride(config))


def adjoint_from_data(U: fem.WaveSolution, d_even: DataSet, active, config, system) -> fem.WaveSolution:
    """Adjoint field for residual ``-(U - d_even)`` at the active receivers only."""
    if np.any(d_even.times < config.tau_in - 1e-12) or np.any(d_even.times > config.tau_end + 1e-12):
        raise ShapeMismatchError("residual times must lie in [tau_in, tau_end]")
    pred = fem.record(U, d_even.receivers, d_even.times)
    res = -(pred.values - d_even.values)
    mask = np.zeros(d_even.K, bool)
    mask[list(active)] = True
    res[~mask] = 0.0
    residual = DataSet(res, d_even.receivers, d_even.times, parity=d_even.parity)
    return fem.solve_adjoint(system, residual, config, store_stride=record_stride(config))


def trapezoid_weights(t):
    w = np.zeros_like(t)
    if t.size > 1:
        dt = np.diff(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def energy(U: fem.WaveSolution, P: fem.WaveSolution, config, fraction_id=-1) -> EnergyField:
    """Trapezoidal quadrature of ``U^2 P^2`` over stored levels in ``[tau_in, tau_end]``."""
    if U.mesh is not P.mesh and U.mesh.key != P.mesh.key:
        raise ShapeMismatchError("U and P live on different meshes")
    if not np.array_equal(U.stored_steps, P.stored_steps) or not np.isclose(U.dt, P.dt):
        raise ShapeMismatchError("U and P are not stored at the same time levels")
    t = U.stored_times
    sel = (t >= config.tau_in - 1e-12) & (t <= config.tau_end + 1e-12)
    w = trapezoid_weights(t[sel])
    E = w @ (U.values[sel] ** 2 * P.values[sel] ** 2)
    return EnergyField(U.mesh, E, fraction_id)


def threshold(E: EnergyField, C0):
    """Nodes with ``E > (1 - C0) max E``."""
    if not 0 < C0 < 1:
        raise ValueError("C0 must lie in (0, 1)")
    emax = E.values.max()
    if emax <= 0:
        raise DetectionError("energy field is identically zero")
    return E.values > (1.0 - C0) * emax


def components(mask, mesh):
    """4-connected components of a nodal mask; list of node-index arrays."""
    labels, n = ndimage.label(np.asarray(mask).reshape(mesh.grid_shape))
    flat = labels.ravel()
    return [np.flatnonzero(flat == k) for k in range(1, n + 1)]


def fit_circle(nodes_idx, mesh, fraction_id=-1, peak=0.0):
    """Centroid of the component and half its smallest axis-aligned extent."""
    pts = mesh.nodes[nodes_idx]
    ext = pts.max(axis=0) - pts.min(axis=0) + np.array([mesh.hx, mesh.hy])
    cx, cy = pts.mean(axis=0)
    return CircleGuess(float(cx), float(cy), float(0.5 * ext.min()), fraction_id, float(peak))


def detect(fields, topo: TopoConfig, C0=None):
    """Circle guesses from every fraction's thresholded energy, merged across fractions.

    Nodes within ``topo.surface_mute`` of the transducer surface are ignored:
    the forward and adjoint sources overlap there.
    """
    fields = [E.muted(topo.surface_mute) for E in fields]
    if not fields:
        raise ValueError("need at least one energy field")
    C0 = topo.C0 if C0 is None else C0
    found = []
    for fid, E in enumerate(fields):
        if E.values.max() <= 0:
            continue
        mask = threshold(E, C0)
        for comp in components(mask, E.mesh):
            fraction = E.fraction_id if E.fraction_id >= 0 else fid
            found.append(fit_circle(comp, E.mesh, fraction, E.values[comp].max()))
    if not found:
        raise DetectionError("no component above threshold in any energy field")
    found.sort(key=lambda c: -c.peak)
    kept = []
    for c in found:
        if all(np.hypot(c.cx - k.cx, c.cy - k.cy) >= topo.peak_min_separation for k in kept):
            kept.append(c)
    return kept


def misfit(data: DataSet, pred: DataSet):
    return 0.5 * float(((pred.values - data.values) ** 2).sum())


def circles_to_params(circles, mu, variant=SMOOTH, order=5):
    return from_blocks([circle(c.cx, c.cy, c.rho0, mu, variant, order) for c in circles], variant, order)


def select_C0(field: EnergyField, d_even: DataSet, config, ops, topo: TopoConfig, J_empty=None):
    """Largest ``C0`` in ``topo.C0 / 2^k`` with ``J(Omega_0) < J(empty)``.

    ``J`` uses circles fitted to the thresholded components with the
    heuristic interior value ``mu = factor * c_background^2``.  Returns
    ``(C0, satisfied)``; when no candidate satisfies the inequality the
    smallest tested value is returned with ``satisfied = False``.
    """
    mu = topo.mu_heuristic_factor * config.c_background**2
    mesh = ops.mesh
    if J_empty is None:
        U = fem.solve_forward(homogeneous_system(config, ops), config)
        J_empty = misfit(d_even, fem.record(U, d_even.receivers, d_even.times))
    C0 = topo.C0
    for _ in range(topo.C0_halvings + 1):
        circles = detect([field], topo, C0)
        nu = circles_to_params(circles, mu)
        try:
            speed = rasterize(nu, mesh, config.c_background, AdmissibilityRule())
        except Exception:  # overlapping guesses: try a tighter threshold
            C0 /= 2.0
            continue
        sol = fem.solve_forward(fem.assemble(mesh, speed, config, ops), config)
        J = misfit(d_even, fem.record(sol, d_even.receivers, d_even.times))
        if J < J_empty:
            return C0, True
        C0 /= 2.0
    C0 *= 2.0
    log.warning("no C0 satisfied J(Omega_0) < J(empty); using C0=%g (heuristic mu=%g)", C0, mu)
    return C0, False


@dataclass
class TopoResult:
    fields: list
    circles: list
    C0: float
    C0_satisfied: bool
    full_field: EnergyField


def topological_prior_guesses(d_even: DataSet, config, topo: TopoConfig = TopoConfig(), ops=None):
    """Energy fields for the full array and each fraction, then detection."""
    ops = ops if ops is not None else fem.MeshOperators(fem.build_mesh(config), config)
    system = homogeneous_system(config, ops)
    U = forward_homogeneous(config, system=system)
    K = d_even.K
    P_full = adjoint_from_data(U, d_even, range(K), config, system)
    full = energy(U, P_full, config)
    fields = []
    for fid, active in enumerate(topo.resolved_fractions(K)):
        P = adjoint_from_data(U, d_even, active, config, system)
        fields.append(energy(U, P, config, fid))
    C0, ok = topo.C0, True
    if topo.select_C0:
        J_empty = misfit(d_even, fem.record(U, d_even.receivers, d_even.times))
        C0, ok = select_C0(full, d_even, config, ops, topo, J_empty)
    circles = detect(fields, topo, C0)
    return TopoResult(fields, circles, C0, ok, full)


def write_circles_csv(path, circles):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cx", "cy", "rho0", "fraction_id"])
        for c in circles:
            w.writerow([f"{c.cx:.12e}", f"{c.cy:.12e}", f"{c.rho0:.12e}", c.fraction_id])


def read_circles_csv(path):
    with open(path, newline="") as fh:
        return [
            CircleGuess(float(r["cx"]), float(r["cy"]), float(r["rho0"]), int(r["fraction_id"]))
            for r in csv.DictReader(fh)
        ]
