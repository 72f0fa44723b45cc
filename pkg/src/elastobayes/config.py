"""Simulation configuration and the dimensionless defaults.

Defaults correspond to the low-contrast liver-like setting: background
speed 1.3 (c^2 = 1.69), anomaly speed 4 (c^2 = 16), peak frequency 0.5,
emitter width kappa = 2, spatial step 0.08, time step 0.00125, transducers
every 0.5 on the top surface and recordings every 0.025 from tau_in = 2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

C_BACKGROUND = 1.3
C_INCLUSION = 4.0
MU_BACKGROUND = C_BACKGROUND**2  # 1.69, stored as dimensionless c^2
MU_INCLUSION = C_INCLUSION**2  # 16
CFL_LIMIT = 0.5


def transducer_line(x_start=0.5, x_stop=9.5, step=0.5, y=0.0):
    """Equispaced transducer positions along a horizontal line."""
    n = int(round((x_stop - x_start) / step)) + 1
    return tuple((float(x_start + k * step), float(y)) for k in range(n))


@dataclass(frozen=True)
class SimulationConfig:
    """Discretization and acquisition parameters of one forward problem.

    ``tau_end`` defaults to ``2 * depth_H / c_background`` and ``record_times``
    to a grid of step ``record_step`` starting at ``tau_in``.
    """

    x_min: float = 0.0
    x_max: float = 10.0
    y_min: float = -7.0
    y_max: float = 0.0
    dx: float = 0.08
    dt: float = 0.00125
    fM: float = 0.5
    kappa: float = 2.0
    emitters: tuple = field(default_factory=transducer_line)
    receivers: tuple = field(default_factory=transducer_line)
    record_times: tuple | None = None
    record_step: float = 0.025
    tau_in: float = 2.0
    tau_end: float | None = None
    c_background: float = C_BACKGROUND
    c_max: float = C_INCLUSION
    depth_H: float = 7.0

    def __post_init__(self):
        object.__setattr__(self, "emitters", tuple(tuple(map(float, p)) for p in self.emitters))
        object.__setattr__(self, "receivers", tuple(tuple(map(float, p)) for p in self.receivers))
        if self.tau_end is None:
            object.__setattr__(self, "tau_end", 2.0 * self.depth_H / self.c_background)
        if self.record_times is not None:
            object.__setattr__(self, "record_times", tuple(float(t) for t in self.record_times))
        self.validate()

    def validate(self):
        if not (self.dx > 0 and self.dt > 0):
            raise ConfigurationError("dx and dt must be positive")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigurationError("empty domain")
        if not (self.tau_end > self.tau_in >= 0):
            raise ConfigurationError("need tau_end > tau_in >= 0")
        if self.c_background <= 0 or self.c_max <= 0 or self.kappa <= 0:
            raise ConfigurationError("speeds and kappa must be positive")
        if self.c_max * self.dt / self.dx > CFL_LIMIT:
            raise ConfigurationError(
                f"CFL number {self.c_max * self.dt / self.dx:.4g} exceeds {CFL_LIMIT}"
            )
        for name in ("emitters", "receivers"):
            for p in getattr(self, name):
                if not self.inside(p):
                    raise ConfigurationError(f"{name[:-1]} {p} outside the domain")
        times = self.times
        if times.size == 0:
            raise ConfigurationError("no recording times")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("record times must be strictly increasing")
        if times[0] < 0 or times[-1] > self.tau_end + 1e-12:
            raise ConfigurationError("record times must lie in [0, tau_end]")

    def inside(self, p, tol=1e-12):
        x, y = p
        return (self.x_min - tol <= x <= self.x_max + tol) and (self.y_min - tol <= y <= self.y_max + tol)

    @property
    def domain(self):
        return (self.x_min, self.x_max, self.y_min, self.y_max)

    @property
    def times(self):
        if self.record_times is not None:
            return np.asarray(self.record_times, dtype=float)
        m = int(np.floor((self.tau_end - self.tau_in) / self.record_step + 1e-9)) + 1
        return self.tau_in + self.record_step * np.arange(m)

    @property
    def n_steps(self):
        """Number of time steps so that ``n_steps * dt >= tau_end``."""
        return int(np.ceil(self.tau_end / self.dt - 1e-9))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def coarsened(self, factor=2):
        """Inversion discretization: spatial and time steps multiplied by ``factor``."""
        return self.replace(dx=self.dx * factor, dt=self.dt * factor)

    def same_discretization(self, other):
        return np.isclose(self.dx, other.dx) and np.isclose(self.dt, other.dt)
