"""Ingestion of measured trajectories from CSV files.

Measured data often carries only an angle channel. When the velocity column
is absent it is reconstructed by Savitzky-Golay smoothing (cubic fit over a
configurable odd window) followed by central differences, with one-sided
differences at the two boundary samples. The raw angle series is passed
through untouched; smoothing feeds only the derivative estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import savgol_filter

from .dynamics import Trajectory
from .exceptions import FileFormatError, InputError

__all__ = ["IngestSpec", "estimate_velocity", "ingest_measurements", "ingest_manifest"]

_POLYORDER = 3


@dataclass(frozen=True)
class IngestSpec:
    """Where to find measurement files and how to read them.

    velocity_column may name a column that is simply not present in a given
    file; reconstruction kicks in per file, so mixed corpora work.
    """

    paths: Tuple[str, ...]
    time_column: str = "t"
    angle_column: str = "x1"
    velocity_column: Optional[str] = "x2"
    input_columns: Tuple[str, ...] = field(default_factory=tuple)
    window: int = 21

    def __post_init__(self):
        if not self.paths:
            raise InputError("ingest spec needs at least one file path")
        object.__setattr__(self, "paths", tuple(self.paths))
        object.__setattr__(self, "input_columns", tuple(self.input_columns))
        _check_window(self.window)


def _check_window(window: int):
    if window < _POLYORDER + 2 or window % 2 == 0:
        raise InputError(
            f"smoothing window must be odd and at least {_POLYORDER + 2}, got {window}"
        )


def estimate_velocity(series: np.ndarray, dt: float, window: int = 21) -> np.ndarray:
    """Differentiate a sampled signal: smooth, then finite differences."""
    series = np.asarray(series, dtype=float)
    _check_window(window)
    if window > series.size:
        raise InputError(
            f"smoothing window {window} exceeds series length {series.size}"
        )
    smooth = savgol_filter(series, window, _POLYORDER)
    vel = np.empty_like(smooth)
    vel[1:-1] = (smooth[2:] - smooth[:-2]) / (2.0 * dt)
    vel[0] = (smooth[1] - smooth[0]) / dt
    vel[-1] = (smooth[-1] - smooth[-2]) / dt
    return vel


def _read_csv_columns(path: str) -> dict:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read measurement file {path}: {exc}")
    if len(lines) < 3:
        raise FileFormatError(f"{path}: need a header and at least 2 rows")
    header = [h.strip() for h in lines[0].split(",")]
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FileFormatError(
                f"{path}: row {r} has {len(cells)} values, expected {len(header)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise FileFormatError(f"{path}: row {r}: {exc}")
    data = np.array(rows).T
    return {name: data[i] for i, name in enumerate(header)}


def _column(columns: dict, name: str, path: str) -> np.ndarray:
    if name not in columns:
        raise FileFormatError(
            f"{path}: missing column {name!r}; file has {', '.join(columns)}"
        )
    return columns[name]


def ingest_measurements(spec: IngestSpec) -> list:
    """Load every listed measurement file as a Trajectory, estimating
    velocities where the configured velocity column is absent."""
    out = []
    for path in spec.paths:
        columns = _read_csv_columns(path)
        times = _column(columns, spec.time_column, path)
        steps = np.diff(times)
        if steps.size == 0 or steps[0] <= 0:
            raise FileFormatError(f"{path}: time column is not increasing")
        dt = float(steps[0])
        if not np.allclose(steps, dt, rtol=0, atol=1e-9 * max(dt, 1.0)):
            raise FileFormatError(f"{path}: time stamps are not uniformly spaced")
        angle = _column(columns, spec.angle_column, path)
        if spec.velocity_column is not None and spec.velocity_column in columns:
            velocity = columns[spec.velocity_column]
        else:
            velocity = estimate_velocity(angle, dt, spec.window)
        states = np.vstack([angle, velocity])
        inputs = None
        if spec.input_columns:
            inputs = np.vstack([_column(columns, c, path) for c in spec.input_columns])
        out.append(Trajectory(dt=dt, times=times, states=states, inputs=inputs))
    return out


def ingest_manifest(spec: IngestSpec, trajectories: Sequence[Trajectory]) -> dict:
    """Record, per file, whether the velocity series was measured or estimated.

    The written trajectories keep both series: the raw angle channel exactly
    as read, and the velocity channel (measured or reconstructed).
    """
    entries = []
    for path, traj in zip(spec.paths, trajectories):
        columns = _read_csv_columns(path)
        estimated = not (
            spec.velocity_column is not None and spec.velocity_column in columns
        )
        entry = {
            "source": path,
            "samples": traj.samples,
            "dt": traj.dt,
            "velocity": "estimated" if estimated else "measured",
        }
        if estimated:
            entry["estimator"] = {
                "smoother": "savitzky-golay",
                "polyorder": _POLYORDER,
                "window": spec.window,
                "differences": "central, one-sided at boundaries",
            }
        entries.append(entry)
    return {"files": entries}
