"""Benchmark systems, excitation signals, and fixed-step simulation.

Three control-affine systems are built in: a damped pendulum, a Duffing
oscillator, and a single-link golf robot with mixed viscous/static friction.
All trajectories come from classical RK4 with the input held constant over
each step, so simulated data pairs line up exactly with the discrete-time
model being fitted.

Randomness is explicit: every stochastic operation takes a seed, and batch
generation derives one integer sub-seed per trajectory up front, so serial
and parallel runs produce bit-identical data.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .exceptions import DivergenceError, InputError, SamplingError

__all__ = [
    "SystemModel",
    "GolfParameters",
    "InputSignal",
    "Trajectory",
    "get_system",
    "pendulum_rhs",
    "duffing_rhs",
    "golf_damping",
    "golf_rhs",
    "rk4_step",
    "simulate",
    "sample_initial_conditions",
    "generate_training_set",
    "derive_seeds",
    "pendulum_energy",
    "worker_count",
]

PENDULUM_DAMPING = 0.05
DUFFING_DAMPING = 0.1


@dataclass(frozen=True)
class GolfParameters:
    """Physical constants of the golf-robot arm. All strictly positive."""

    mass: float = 0.5241            # club mass [kg]
    inertia: float = 0.1445         # moment of inertia about the joint [kg m^2]
    gravity: float = 9.81           # [m/s^2]
    com_length: float = 0.4702      # joint to center of mass [m]
    damping: float = 0.0132         # viscous friction [kg m^2/s]
    friction_radius: float = 0.0245 # joint to friction contact [m]
    friction_coeff: float = 1.5136  # static friction coefficient [-]

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (value > 0):
                raise InputError(f"GolfParameters.{name} must be > 0, got {value}")


def pendulum_rhs(x, u=0.0):
    """Damped pendulum: x1'' = -sin(x1) - 0.05*x1' + u."""
    return np.array([x[1], -np.sin(x[0]) - PENDULUM_DAMPING * x[1] + u])


def duffing_rhs(x, u=0.0):
    """Duffing oscillator: x1'' = x1 - x1^3 - 0.1*x1' + u."""
    return np.array([x[1], x[0] - x[0] ** 3 - DUFFING_DAMPING * x[1] + u])


def golf_damping(x, params: GolfParameters = GolfParameters()):
    """Friction torque: viscous term plus velocity-sign static term.

    sgn(0) = 0, so the torque vanishes at rest.
    """
    p = params
    normal = abs(p.mass * x[1] ** 2 * p.com_length + p.mass * p.gravity * np.cos(x[0]))
    return p.damping * x[1] + p.friction_radius * p.friction_coeff * np.sign(x[1]) * normal


def golf_rhs(x, u=0.0, params: GolfParameters = GolfParameters()):
    """Golf robot: J*x1'' = -m*g*a*sin(x1) - friction + 4*u."""
    p = params
    torque = -p.mass * p.gravity * p.com_length * np.sin(x[0]) - golf_damping(x, p) + 4.0 * u
    return np.array([x[1], torque / p.inertia])


@dataclass(frozen=True)
class SystemModel:
    """A named control-affine system x' = f(x) + B*u."""

    name: str
    state_dim: int
    input_dim: int
    rhs: Callable
    parameters: Optional[GolfParameters] = None


_SYSTEMS = {
    "pendulum": SystemModel("pendulum", 2, 1, pendulum_rhs),
    "duffing": SystemModel("duffing", 2, 1, duffing_rhs),
    "golf": SystemModel("golf", 2, 1, golf_rhs, parameters=GolfParameters()),
}


def get_system(name: str) -> SystemModel:
    try:
        return _SYSTEMS[name]
    except KeyError:
        raise InputError(f"unknown system {name!r}; expected one of {sorted(_SYSTEMS)}")


def pendulum_energy(x) -> float:
    """Normalized pendulum energy (1 - cos x1) + x2^2/2."""
    return (1.0 - np.cos(x[0])) + 0.5 * x[1] ** 2


# ---------------------------------------------------------------------------
# Excitation signals


@dataclass(frozen=True)
class InputSignal:
    """Scalar excitation u(t), a pure function of time and the trajectory seed.

    Kinds: zero; constant (one uniform draw per trajectory, held for its whole
    duration); random (a fresh uniform draw per sample, held over the step);
    sine(amplitude, frequency); step(amplitude, at); chirp(amplitude, f0, f1,
    duration) with a linear frequency sweep from f0 to f1 over the duration.
    Frequencies in Hz, times in seconds.
    """

    kind: str
    params: dict = field(default_factory=dict)

    _KINDS = {
        "zero": (),
        "constant": ("low", "high"),
        "random": ("low", "high"),
        "sine": ("amplitude", "frequency"),
        "step": ("amplitude", "at"),
        "chirp": ("amplitude", "f0", "f1", "duration"),
    }

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise InputError(
                f"unknown signal kind {self.kind!r}; expected one of {tuple(self._KINDS)}"
            )
        required = self._KINDS[self.kind]
        missing = [k for k in required if k not in self.params]
        extra = [k for k in self.params if k not in required]
        if missing or extra:
            raise InputError(
                f"signal kind {self.kind!r} takes parameters {required}; "
                f"missing {missing}, unexpected {extra}"
            )
        clean = {}
        for key in required:
            try:
                value = float(self.params[key])
            except (TypeError, ValueError):
                raise InputError(f"signal parameter {key!r} must be a number")
            if not math.isfinite(value):
                raise InputError(f"signal parameter {key!r} must be finite")
            clean[key] = value
        if self.kind == "chirp" and clean["duration"] <= 0:
            raise InputError("chirp duration must be positive")
        object.__setattr__(self, "params", clean)

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, low=-1.0, high=1.0):
        return cls("constant", {"low": float(low), "high": float(high)})

    @classmethod
    def random(cls, low=-1.0, high=1.0):
        return cls("random", {"low": float(low), "high": float(high)})

    @classmethod
    def sine(cls, amplitude=1.0, frequency=1.0):
        return cls("sine", {"amplitude": float(amplitude), "frequency": float(frequency)})

    @classmethod
    def step(cls, amplitude=1.0, at=0.0):
        return cls("step", {"amplitude": float(amplitude), "at": float(at)})

    @classmethod
    def chirp(cls, amplitude=1.0, f0=0.1, f1=2.0, duration=1.0):
        return cls("chirp", {
            "amplitude": float(amplitude), "f0": float(f0),
            "f1": float(f1), "duration": float(duration),
        })

    def sample(self, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One input value per time stamp. Random kinds consume `rng`."""
        times = np.asarray(times, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(times)
        if self.kind == "constant":
            return np.full_like(times, rng.uniform(p["low"], p["high"]))
        if self.kind == "random":
            return rng.uniform(p["low"], p["high"], size=times.shape)
        if self.kind == "sine":
            return p["amplitude"] * np.sin(2.0 * np.pi * p["frequency"] * times)
        if self.kind == "step":
            return np.where(times >= p["at"], p["amplitude"], 0.0)
        # chirp: phase-rate form of a linear sweep; instantaneous
        # frequency runs f0 -> f1 over the duration
        sweep = p["f0"] + (p["f1"] - p["f0"]) * times / (2.0 * p["duration"])
        return p["amplitude"] * np.sin(2.0 * np.pi * sweep * times)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "InputSignal":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind is None:
            raise InputError("signal spec needs a 'kind' field")
        return cls(kind, data)


# ---------------------------------------------------------------------------
# Trajectories


@dataclass(frozen=True)
class Trajectory:
    """A uniformly sampled run: times (M,), states (n, M), inputs (p, M)."""

    dt: float
    times: np.ndarray
    states: np.ndarray
    inputs: Optional[np.ndarray] = None
    seed: Optional[int] = None
    system: Optional[str] = None
    signal: Optional[InputSignal] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if self.dt <= 0:
            raise InputError(f"dt must be > 0, got {self.dt}")
        if times.ndim != 1 or states.ndim != 2 or states.shape[1] != times.size:
            raise InputError(
                f"states {states.shape} do not match {times.size} time stamps"
            )
        expected = times[0] + self.dt * np.arange(times.size)
        if not np.allclose(times, expected, rtol=0.0, atol=1e-9 * max(1.0, abs(self.dt))):
            raise InputError("time stamps are not uniform with the declared dt")
        if not np.all(np.isfinite(states)):
            raise InputError("trajectory contains non-finite states")
        if self.inputs is not None:
            inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
            object.__setattr__(self, "inputs", inputs)
            if inputs.shape[1] != times.size:
                raise InputError(
                    f"inputs {inputs.shape} do not match {times.size} time stamps"
                )
            if not np.all(np.isfinite(inputs)):
                raise InputError("trajectory contains non-finite inputs")

    @property
    def samples(self) -> int:
        return self.times.size

    @property
    def state_dim(self) -> int:
        return self.states.shape[0]


def rk4_step(rhs: Callable, x: np.ndarray, u: float, dt: float) -> np.ndarray:
    """One classical RK4 step with u held constant (zero-order hold).

    Accepts either a bare rhs callable or a SystemModel."""
    if isinstance(rhs, SystemModel):
        rhs = rhs.rhs
    if dt <= 0:
        raise InputError(f"dt must be > 0, got {dt}")
    x = np.asarray(x, dtype=float)
    k1 = rhs(x, u)
    k2 = rhs(x + 0.5 * dt * k1, u)
    k3 = rhs(x + 0.5 * dt * k2, u)
    k4 = rhs(x + dt * k3, u)
    nxt = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(nxt)):
        raise DivergenceError("integration produced a non-finite state")
    return nxt


def simulate(
    model: Union[SystemModel, str],
    x0,
    signal: InputSignal,
    duration: float,
    dt: float,
    seed: int = 0,
) -> Trajectory:
    """Integrate one trajectory with RK4 and per-step held inputs.

    Produces round(duration/dt) + 1 samples. The input sequence is realized
    once from the trajectory seed, so the same (x0, signal, seed) always
    yields a bit-identical trajectory.
    """
    if isinstance(model, str):
        model = get_system(model)
    if duration <= 0 or dt <= 0:
        raise InputError("duration and dt must be > 0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.state_dim,):
        raise InputError(f"x0 must have shape ({model.state_dim},), got {x0.shape}")
    if not np.all(np.isfinite(x0)):
        raise InputError("x0 contains non-finite values")

    steps = int(round(duration / dt))
    times = dt * np.arange(steps + 1)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    inputs = signal.sample(times, rng)

    states = np.empty((model.state_dim, steps + 1))
    states[:, 0] = x0
    for k in range(steps):
        try:
            states[:, k + 1] = rk4_step(model.rhs, states[:, k], inputs[k], dt)
        except DivergenceError:
            raise DivergenceError("simulation diverged", step=k + 1)
    return Trajectory(
        dt=dt,
        times=times,
        states=states,
        inputs=inputs.reshape(1, -1),
        seed=int(seed),
        system=model.name,
        signal=signal,
    )


# ---------------------------------------------------------------------------
# Training-set generation

_MAX_REJECTION_ROUNDS = 1000


def sample_initial_conditions(system: Union[SystemModel, str], count: int, seed: int = 0) -> np.ndarray:
    """Draw `count` initial states, one row each.

    Pendulum states are rejection-sampled from x1 in (-pi, pi), x2 in (-2, 2)
    subject to (1 - cos x1) + x2^2/2 < 2, which keeps them strictly inside the
    undamped separatrix and therefore inside the damped basin of attraction.
    Duffing uses the square [-2, 2]^2, the golf robot x1 in (-pi/2, pi/2) and
    x2 in (-5, 5).
    """
    name = system.name if isinstance(system, SystemModel) else system
    if name not in _SYSTEMS:
        raise InputError(f"unknown system {name!r}; expected one of {sorted(_SYSTEMS)}")
    if count < 1:
        raise InputError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if name == "duffing":
        return rng.uniform([-2.0, -2.0], [2.0, 2.0], size=(count, 2))
    if name == "golf":
        return rng.uniform([-np.pi / 2, -5.0], [np.pi / 2, 5.0], size=(count, 2))

    # pendulum: rejection under the separatrix-energy bound
    accepted = []
    for _ in range(_MAX_REJECTION_ROUNDS):
        draws = rng.uniform([-np.pi, -2.0], [np.pi, 2.0], size=(count, 2))
        energy = (1.0 - np.cos(draws[:, 0])) + 0.5 * draws[:, 1] ** 2
        accepted.extend(draws[energy < 2.0])
        if len(accepted) >= count:
            return np.array(accepted[:count])
    raise SamplingError(
        f"rejection sampling produced {len(accepted)}/{count} states "
        f"after {_MAX_REJECTION_ROUNDS} rounds"
    )


def _stream_tag(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_seeds(seed: int, label: str, count: int) -> list:
    """Derive `count` independent integer sub-seeds from (seed, label).

    The label is hashed into the seed sequence, so differently named streams
    (initial conditions vs. input signals) never collide even for the same
    master seed. Deriving all sub-seeds up front keeps parallel and serial
    trajectory generation bit-identical.
    """
    ss = np.random.SeedSequence([int(seed), _stream_tag(label)])
    return [int(s) for s in ss.generate_state(count, dtype=np.uint64)]


def generate_training_set(
    system: Union[SystemModel, str],
    n_traj: int,
    duration: float,
    dt: float,
    signal: Union[InputSignal, Sequence[InputSignal]],
    seed: int = 0,
) -> list:
    """Simulate `n_traj` independent trajectories for one system.

    Initial conditions come from `sample_initial_conditions`; each trajectory
    gets its own derived seed (recorded on the Trajectory) and, when a list of
    signals is given, signals are assigned round-robin so a batch can mix
    e.g. chirp, sine, and step excitation.
    """
    if isinstance(system, str):
        system = get_system(system)
    if n_traj < 1:
        raise InputError(f"n_traj must be >= 1, got {n_traj}")
    signals = [signal] if isinstance(signal, InputSignal) else list(signal)
    if not signals:
        raise InputError("at least one input signal is required")

    ic_seed = derive_seeds(seed, f"{system.name}/initial-conditions", 1)[0]
    x0s = sample_initial_conditions(system, n_traj, seed=ic_seed)
    traj_seeds = derive_seeds(seed, f"{system.name}/input-signals", n_traj)

    def run(i: int) -> Trajectory:
        return simulate(
            system, x0s[i], signals[i % len(signals)], duration, dt,
            seed=traj_seeds[i],
        )

    workers = min(worker_count(), n_traj)
    if workers <= 1:
        return [run(i) for i in range(n_traj)]
    # Seeds are derived up front and results are placed by index, so the
    # parallel path is bit-identical to the serial one.
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, range(n_traj)))


def worker_count() -> int:
    """Worker cap from KOOPMAN_NUM_THREADS; 0 or unset picks a sensible auto."""
    raw = os.environ.get("KOOPMAN_NUM_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"KOOPMAN_NUM_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise InputError(f"KOOPMAN_NUM_THREADS must be >= 0, got {value}")
    if value == 0:
        return min(os.cpu_count() or 1, 4)
    return value
