"""Receiver-by-time data containers and their CSV format."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatchError

PARITIES = ("all", "even", "odd")


@dataclass(frozen=True)
class DataSet:
    """Recorded wave values, ``values[k, m]`` at receiver ``k`` and time ``times[m]``."""

    values: np.ndarray
    receivers: np.ndarray
    times: np.ndarray
    noise_sigma: float = 0.0
    parity: str = "all"

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        receivers = np.asarray(self.receivers, dtype=float).reshape(-1, 2)
        times = np.asarray(self.times, dtype=float).ravel()
        if values.shape != (receivers.shape[0], times.size):
            raise ShapeMismatchError(
                f"values {values.shape} vs {receivers.shape[0]} receivers x {times.size} times"
            )
        if values.size == 0:
            raise ShapeMismatchError("empty data set")
        if np.any(np.diff(times) <= 0):
            raise ShapeMismatchError("times must be strictly increasing")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be one of {PARITIES}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "receivers", receivers)
        object.__setattr__(self, "times", times)

    @property
    def K(self):
        return self.values.shape[0]

    @property
    def M(self):
        return self.values.shape[1]

    def flat(self):
        """Flatten time-major: all receivers at t_1, then all at t_2, ..."""
        return self.values.T.ravel()

    @classmethod
    def from_flat(cls, vector, receivers, times, **kw):
        receivers = np.asarray(receivers, dtype=float).reshape(-1, 2)
        times = np.asarray(times, dtype=float)
        values = np.asarray(vector, dtype=float).reshape(times.size, receivers.shape[0]).T
        return cls(values, receivers, times, **kw)

    def with_values(self, values, **kw):
        return replace(self, values=np.asarray(values, dtype=float), **kw)


@dataclass(frozen=True)
class SplitData:
    """Even-time (t_2, t_4, ...) and odd-time (t_1, t_3, ...) halves of one record."""

    d_even: DataSet
    d_odd: DataSet


def write_dataset_csv(path, data: DataSet):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["receiver_index", "time", "value", "parity"])
        for m, t in enumerate(data.times):
            for k in range(data.K):
                w.writerow([k, f"{t:.12e}", f"{data.values[k, m]:.12e}", data.parity])


def read_dataset_csv(path, receivers, noise_sigma=0.0) -> DataSet:
    """Read a data CSV; receiver positions are not stored in the file."""
    receivers = np.asarray(receivers, dtype=float).reshape(-1, 2)
    rows = []
    parity = "all"
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append((int(row["receiver_index"]), float(row["time"]), float(row["value"])))
            parity = row.get("parity") or parity
    if not rows:
        raise ShapeMismatchError(f"{path}: no data rows")
    arr = np.array(rows)
    times = np.unique(arr[:, 1])
    kidx = arr[:, 0].astype(int)
    if kidx.max() >= receivers.shape[0]:
        raise ShapeMismatchError(f"{path}: receiver index {kidx.max()} beyond {receivers.shape[0]} receivers")
    values = np.zeros((receivers.shape[0], times.size))
    values[kidx, np.searchsorted(times, arr[:, 1])] = arr[:, 2]
    return DataSet(values, receivers, times, noise_sigma=noise_sigma, parity=parity)
