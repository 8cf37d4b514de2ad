"""File formats: trajectory CSV, model JSON, report JSON, set manifests.

All floats are written with 17 significant digits so a write/read round trip
reproduces every value bit for bit, and nothing here embeds timestamps or
machine identifiers: the same data always serializes to the same bytes.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Sequence

import numpy as np

from .dynamics import InputSignal, Trajectory
from .edmd import KoopmanModel
from .exceptions import FileFormatError, InputError
from .observables import Dictionary

__all__ = [
    "write_trajectory",
    "read_trajectory",
    "write_trajectory_set",
    "read_trajectory_set",
    "trajectory_csv",
    "parse_trajectory_csv",
    "write_model",
    "read_model",
    "model_to_dict",
    "model_from_dict",
    "write_json",
]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Trajectory CSV


def trajectory_csv(traj: Trajectory) -> str:
    """Render a trajectory in the CSV exchange format.

    Header `t,x1,...,xn[,u1,...,up]`, one row per sample, 17 significant
    digits per value.
    """
    n = traj.state_dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    columns = [traj.times] + [traj.states[i] for i in range(n)]
    if traj.inputs is not None:
        header += [f"u{i + 1}" for i in range(traj.inputs.shape[0])]
        columns += [traj.inputs[i] for i in range(traj.inputs.shape[0])]
    lines = [",".join(header)]
    for k in range(traj.samples):
        lines.append(",".join(_fmt(col[k]) for col in columns))
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str, name: str = "<string>") -> Trajectory:
    """Parse the trajectory CSV format; messages carry row/column positions."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FileFormatError(f"{name}: empty trajectory file")
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "t":
        raise FileFormatError(f"{name}: first column must be 't', got {header[0]!r}")
    state_cols = [h for h in header[1:] if h.startswith("x")]
    input_cols = [h for h in header[1:] if h.startswith("u")]
    expected = ["t"] + [f"x{i + 1}" for i in range(len(state_cols))] + [
        f"u{i + 1}" for i in range(len(input_cols))
    ]
    if header != expected or not state_cols:
        raise FileFormatError(
            f"{name}: header must read t,x1,...,xn[,u1,...,up], got {','.join(header)}"
        )
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise FileFormatError(
                f"{name}: row {r} has {len(cells)} values, expected {len(header)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise FileFormatError(f"{name}: row {r}: {exc}")
    if len(rows) < 2:
        raise FileFormatError(f"{name}: need at least 2 samples, got {len(rows)}")
    data = np.array(rows).T
    times = data[0]
    n = len(state_cols)
    states = data[1:1 + n]
    inputs = data[1 + n:] if input_cols else None
    dt = float(times[1] - times[0])
    if dt <= 0:
        raise FileFormatError(f"{name}: non-increasing time stamps in rows 2-3")
    try:
        return Trajectory(dt=dt, times=times, states=states, inputs=inputs)
    except InputError as exc:
        raise FileFormatError(f"{name}: {exc}")


def write_trajectory(traj: Trajectory, path: str):
    with open(path, "w") as fh:
        fh.write(trajectory_csv(traj))


def read_trajectory(path: str) -> Trajectory:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read trajectory file {path}: {exc}")
    return parse_trajectory_csv(text, name=path)


def write_trajectory_set(
    trajectories: Sequence[Trajectory], out_dir: str, prefix: str = "traj"
) -> dict:
    """Write one CSV per trajectory plus a manifest JSON; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i, traj in enumerate(trajectories):
        filename = f"{prefix}_{i:03d}.csv"
        write_trajectory(traj, os.path.join(out_dir, filename))
        entries.append({
            "file": filename,
            "seed": traj.seed,
            "system": traj.system,
            "signal": traj.signal.to_dict() if traj.signal is not None else None,
            "samples": traj.samples,
        })
    manifest = {
        "dt": trajectories[0].dt if trajectories else None,
        "trajectories": entries,
    }
    write_json(manifest, os.path.join(out_dir, f"{prefix}_manifest.json"))
    return manifest


def read_trajectory_set(manifest_path: str) -> list:
    """Load every trajectory listed in a set manifest."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read manifest {manifest_path}: {exc}")
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{manifest_path}: invalid JSON: {exc}")
    out = []
    for entry in manifest.get("trajectories", []):
        traj = read_trajectory(os.path.join(base, entry["file"]))
        signal = InputSignal.from_dict(entry["signal"]) if entry.get("signal") else None
        out.append(Trajectory(
            dt=traj.dt, times=traj.times, states=traj.states, inputs=traj.inputs,
            seed=entry.get("seed"), system=entry.get("system"), signal=signal,
        ))
    return out


# ---------------------------------------------------------------------------
# Model JSON

MODEL_FORMAT = "koopman-model/1"


def model_to_dict(model: KoopmanModel, provenance: Optional[dict] = None) -> dict:
    out = {
        "format": MODEL_FORMAT,
        "dt": model.dt,
        "dictionary": {
            "state_dim": model.dictionary.state_dim,
            "expressions": model.dictionary.expressions(),
        },
        "transition": model.transition.tolist(),  # row-major
        "input_matrix": None if model.input_matrix is None else model.input_matrix.tolist(),
        "fit_residual": model.fit_residual,
        "provenance": provenance or {},
    }
    return out


def model_from_dict(data: dict) -> KoopmanModel:
    fmt = data.get("format", MODEL_FORMAT)
    if fmt != MODEL_FORMAT:
        raise FileFormatError(f"unsupported model format {fmt!r}, expected {MODEL_FORMAT!r}")
    try:
        dictionary = Dictionary.from_expressions(
            data["dictionary"]["expressions"], int(data["dictionary"]["state_dim"])
        )
        input_matrix = data.get("input_matrix")
        return KoopmanModel(
            transition=np.array(data["transition"], dtype=float),
            dt=float(data["dt"]),
            dictionary=dictionary,
            fit_residual=float(data["fit_residual"]),
            input_matrix=None if input_matrix is None else np.array(input_matrix, dtype=float),
        )
    except (KeyError, TypeError) as exc:
        raise FileFormatError(f"model file is missing field {exc}")


def write_model(model: KoopmanModel, path: str, provenance: Optional[dict] = None):
    write_json(model_to_dict(model, provenance), path)


def read_model(path: str) -> KoopmanModel:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read model file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON: {exc}")
    return model_from_dict(data)


def write_json(data: dict, path: str):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
