"""Command line client.

Every data-handling subcommand goes through the HTTP service: in-process by
default, or a remote server when --server is given, so the CLI stays a thin
transport around the same endpoints. Exit codes: 0 success, 1 validation or
usage error, 2 numerical failure (a reproduction whose gates fail also exits
with 2).
"""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click
import numpy as np

from . import __version__
from .config import ExperimentConfig
from .dynamics import InputSignal, Trajectory
from .exceptions import InputError, KoopmanError, NumericsError
from .fileio import write_json, write_trajectory
from .reproduce import TARGETS

__all__ = ["cli", "main", "entrypoint", "ServiceClient"]

_SEED_RANGE = click.IntRange(0, 2 ** 64 - 1)


class ServiceClient:
    """Tiny wrapper mapping HTTP status codes back onto package exceptions."""

    def __init__(self, server: Optional[str] = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=600.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette nags about its test client's httpx dependency;
                # irrelevant to users driving the in-process service
                warnings.filterwarnings(
                    "ignore", message="Using .httpx. with .starlette.testclient.")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def _handle(self, response) -> dict:
        if response.status_code == 200:
            return response.json()
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        if response.status_code == 400:
            raise InputError(str(detail))
        if response.status_code == 422:
            raise NumericsError(str(detail))
        raise KoopmanError(f"service returned {response.status_code}: {detail}")

    def get(self, path: str) -> dict:
        return self._handle(self._client.get(path))

    def post(self, path: str, payload: dict) -> dict:
        return self._handle(self._client.post(path, json=payload))


def _global_options(f):
    f = click.option("--config", "config_path", type=str, default=None,
                     help="Experiment config JSON.")(f)
    f = click.option("--seed", type=_SEED_RANGE, default=None,
                     help="Override the config seed (unsigned 64-bit).")(f)
    f = click.option("--out", "out_dir", type=str, default=None,
                     help="Output directory (created if missing).")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None,
                     help="Trajectory output format (default csv).")(f)
    f = click.option("--server", type=str, default=None,
                     help="Base URL of a running service; default runs in-process.")(f)
    return f


def _merged(ctx, **values) -> dict:
    """Fill unset per-command options from group-level ones."""
    base = dict(ctx.obj or {})
    for key, value in values.items():
        if value is not None:
            base[key] = value
    return base


def _require_config(opts) -> ExperimentConfig:
    path = opts.get("config_path")
    if not path:
        raise InputError("this command needs --config <path>")
    config = ExperimentConfig.from_file(path)
    if opts.get("seed") is not None:
        config = config.replace(seed=opts["seed"])
    return config


def _out_dir(opts, default: str = ".") -> str:
    out = opts.get("out_dir") or default
    os.makedirs(out, exist_ok=True)
    return out


def _traj_from_payload(data: dict) -> Trajectory:
    signal = data.get("signal")
    return Trajectory(
        dt=float(data["dt"]),
        times=np.array(data["times"], dtype=float),
        states=np.array(data["states"], dtype=float),
        inputs=None if data.get("inputs") is None else np.array(data["inputs"], dtype=float),
        seed=data.get("seed"),
        system=data.get("system"),
        signal=InputSignal.from_dict(signal) if signal else None,
    )


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}")


@click.group(name="koopman")
@click.version_option(__version__, prog_name="koopman")
@_global_options
@click.pass_context
def cli(ctx, config_path, seed, out_dir, fmt, server):
    """Fit, predict, and analyze lifted linear models of nonlinear systems."""
    ctx.obj = {"config_path": config_path, "seed": seed, "out_dir": out_dir,
               "fmt": fmt, "server": server}


@cli.command()
@_global_options
@click.pass_context
def generate(ctx, config_path, seed, out_dir, fmt, server):
    """Simulate a training set of trajectories for a config."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    config = _require_config(opts)
    client = ServiceClient(opts.get("server"))
    response = client.post("/generate", {
        "system": config.system,
        "n_trajectories": config.n_trajectories,
        "duration": config.duration,
        "dt": config.dt,
        "signals": [s.to_dict() for s in config.signals],
        "seed": config.seed,
    })
    out = _out_dir(opts)
    if opts.get("fmt") == "json":
        write_json(response, os.path.join(out, "trajectories.json"))
        click.echo(f"wrote {os.path.join(out, 'trajectories.json')}")
        return
    for i, payload in enumerate(response["trajectories"]):
        path = os.path.join(out, f"traj_{i:03d}.csv")
        write_trajectory(_traj_from_payload(payload), path)
    write_json(response["manifest"], os.path.join(out, "traj_manifest.json"))
    click.echo(f"wrote {len(response['trajectories'])} trajectories to {out}")


@cli.command()
@_global_options
@click.pass_context
def fit(ctx, config_path, seed, out_dir, fmt, server):
    """Generate training data for a config and fit the lifted model."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    config = _require_config(opts)
    client = ServiceClient(opts.get("server"))
    response = client.post("/fit", {"config": config.to_dict()})
    out = _out_dir(opts)
    path = os.path.join(out, "model.json")
    write_json(response["model"], path)
    click.echo(f"wrote {path} (fit residual {response['model']['fit_residual']:.3e})")


def _read_input_file(path: str) -> list:
    """Input sequence from a CSV: either u1..up columns, or a trajectory file
    whose u columns are taken."""
    try:
        with open(path) as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read input file {path}: {exc}")
    if not lines:
        raise InputError(f"{path}: empty input file")
    header = [h.strip() for h in lines[0].split(",")]
    u_cols = [i for i, h in enumerate(header) if h.startswith("u")]
    if not u_cols:
        raise InputError(f"{path}: no u columns in header {','.join(header)}")
    rows = []
    for r, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise InputError(f"{path}: row {r} has {len(cells)} values, expected {len(header)}")
        try:
            rows.append([float(cells[i]) for i in u_cols])
        except ValueError as exc:
            raise InputError(f"{path}: row {r}: {exc}")
    return np.array(rows).T.tolist()


@cli.command()
@_global_options
@click.option("--model", "model_path", required=True, type=str, help="Model JSON file.")
@click.option("--x0", required=True, type=str, help="Initial state, comma-separated.")
@click.option("--steps", required=True, type=click.IntRange(0), help="Prediction steps.")
@click.option("--u", "u_path", type=str, default=None,
              help="CSV providing the input sequence for controlled models.")
@click.option("--scheme", type=click.Choice(["straight", "corrected", "both"]),
              default="both", show_default=True)
@click.pass_context
def predict(ctx, config_path, seed, out_dir, fmt, server, model_path, x0, steps,
            u_path, scheme):
    """Roll a fitted model forward from an initial state."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    try:
        x0_values = [float(tok) for tok in x0.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"--x0 must be comma-separated numbers, got {x0!r}")
    payload = {
        "model": _load_json(model_path, "model"),
        "x0": x0_values,
        "steps": steps,
        "scheme": scheme,
    }
    if u_path is not None:
        payload["u"] = _read_input_file(u_path)
    client = ServiceClient(opts.get("server"))
    response = client.post("/predict", payload)
    out = _out_dir(opts)
    if opts.get("fmt") == "json":
        write_json(response, os.path.join(out, "prediction.json"))
        click.echo(f"wrote {os.path.join(out, 'prediction.json')}")
        return
    dt = float(payload["model"]["dt"])
    times = np.array(response["times"], dtype=float)
    for name in ("straight", "corrected"):
        if response.get(name) is None:
            continue
        path = os.path.join(out, f"{name}.csv")
        write_trajectory(
            Trajectory(dt=dt, times=times, states=np.array(response[name], dtype=float)),
            path,
        )
        click.echo(f"wrote {path} ({len(times)} rows)")


@cli.command()
@_global_options
@click.option("--model", "model_path", required=True, type=str, help="Model JSON file.")
@click.option("--discrete", is_flag=True, default=False,
              help="Rank tests on the discrete-time matrices instead of the generator.")
@click.option("--rank-method", type=click.Choice(["svd", "exact"]), default="svd",
              show_default=True, help="Numerical or exact-arithmetic rank.")
@click.pass_context
def analyze(ctx, config_path, seed, out_dir, fmt, server, model_path, discrete,
            rank_method):
    """Spectrum, stability, and controllability/observability of a model."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    client = ServiceClient(opts.get("server"))
    report = client.post("/analyze", {
        "model": _load_json(model_path, "model"),
        "use_continuous": not discrete,
        "rank_method": rank_method,
    })
    out = _out_dir(opts)
    path = os.path.join(out, "report.json")
    write_json(report, path)
    click.echo(
        "stable_continuous={sc} stable_discrete={sd} ctrb_rank={cr} obsv_rank={orr}".format(
            sc=report["stable_continuous"], sd=report["stable_discrete"],
            cr=report["ctrb_rank"], orr=report["obsv_rank"],
        )
    )
    click.echo(f"wrote {path}")


@cli.command()
@_global_options
@click.argument("files", nargs=-1, required=True, type=str)
@click.option("--time-column", default="t", show_default=True)
@click.option("--angle-column", default="x1", show_default=True)
@click.option("--velocity-column", default="x2", show_default=True,
              help="Set to '' to force velocity estimation.")
@click.option("--input-column", "input_columns", multiple=True,
              help="Input column name; repeat for several inputs.")
@click.option("--window", default=21, show_default=True, type=click.IntRange(3),
              help="Odd smoothing window for velocity estimation.")
@click.pass_context
def ingest(ctx, config_path, seed, out_dir, fmt, server, files, time_column,
           angle_column, velocity_column, input_columns, window):
    """Convert measured CSVs into trajectory files, estimating velocities
    where no velocity column exists."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    payload_files = []
    for path in files:
        try:
            with open(path) as fh:
                payload_files.append({"name": os.path.basename(path), "content": fh.read()})
        except OSError as exc:
            raise InputError(f"cannot read measurement file {path}: {exc}")
    client = ServiceClient(opts.get("server"))
    response = client.post("/ingest", {
        "files": payload_files,
        "time_column": time_column,
        "angle_column": angle_column,
        "velocity_column": velocity_column or None,
        "input_columns": list(input_columns),
        "window": window,
    })
    out = _out_dir(opts)
    if opts.get("fmt") == "json":
        write_json(response, os.path.join(out, "ingested.json"))
        click.echo(f"wrote {os.path.join(out, 'ingested.json')}")
        return
    for i, payload in enumerate(response["trajectories"]):
        write_trajectory(_traj_from_payload(payload), os.path.join(out, f"ingested_{i:03d}.csv"))
    write_json(response["manifest"], os.path.join(out, "ingest_manifest.json"))
    click.echo(f"wrote {len(response['trajectories'])} trajectories to {out}")


@cli.command()
@_global_options
@click.argument("target", type=click.Choice(TARGETS))
@click.pass_context
def reproduce(ctx, config_path, seed, out_dir, fmt, server, target):
    """Run a named end-to-end experiment and write its artifacts.

    Exits 0 when every gate passes and 2 otherwise."""
    opts = _merged(ctx, config_path=config_path, seed=seed, out_dir=out_dir,
                   fmt=fmt, server=server)
    effective_seed = opts.get("seed") if opts.get("seed") is not None else 42
    client = ServiceClient(opts.get("server"))
    response = client.post("/reproduce", {"target": target, "seed": effective_seed})
    out = _out_dir(opts, default=target)
    for name in sorted(response["files"]):
        with open(os.path.join(out, name), "w") as fh:
            fh.write(response["files"][name])
    summary = response["summary"]
    for name, check in summary["checks"].items():
        click.echo(f"[{'PASS' if check['passed'] else 'FAIL'}] {name}: {check['requirement']}")
    click.echo(f"{target}: {'passed' if summary['passed'] else 'FAILED'} "
               f"(seed {effective_seed}, artifacts in {out})")
    if not summary["passed"]:
        ctx.exit(2)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, prog_name="koopman", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except NumericsError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    except KoopmanError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
