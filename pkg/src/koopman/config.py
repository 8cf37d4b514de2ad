"""Experiment configuration: one JSON document fully determines a run.

Defaults per system are the protocols used by the reproduction presets; the
seed is part of the config so two runs of the same file are bit-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Optional, Tuple

from .dynamics import InputSignal, get_system
from .exceptions import FileFormatError, InputError

__all__ = ["ExperimentConfig", "default_config"]


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    dictionary_size: int
    n_trajectories: int
    duration: float
    dt: float
    signals: Tuple[InputSignal, ...] = field(default_factory=lambda: (InputSignal.zero(),))
    seed: int = 42
    controlled: bool = False
    use_continuous: bool = True
    rank_method: str = "svd"
    test_horizon: float = 10.0
    test_initial_condition: Optional[Tuple[float, ...]] = None
    test_signal: Optional[InputSignal] = None

    def __post_init__(self):
        system = get_system(self.system)  # raises InputError for unknown tags
        if self.dictionary_size < system.state_dim:
            raise InputError(
                f"dictionary_size must be at least the state dimension "
                f"{system.state_dim}, got {self.dictionary_size}"
            )
        if self.n_trajectories < 1:
            raise InputError(f"n_trajectories must be positive, got {self.n_trajectories}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InputError(f"dt must be a positive finite number, got {self.dt}")
        if self.duration < self.dt:
            raise InputError("duration must cover at least one step")
        if not self.signals:
            object.__setattr__(self, "signals", (InputSignal.zero(),))
        object.__setattr__(self, "signals", tuple(self.signals))
        if not (0 <= self.seed < 2 ** 64):
            raise InputError("seed must fit in an unsigned 64-bit integer")
        if self.rank_method not in ("svd", "exact"):
            raise InputError(f"rank_method must be 'svd' or 'exact', got {self.rank_method!r}")
        if self.test_horizon <= 0:
            raise InputError("test_horizon must be positive")
        if self.test_initial_condition is not None:
            ic = tuple(float(v) for v in self.test_initial_condition)
            n = get_system(self.system).state_dim
            if len(ic) != n:
                raise InputError(
                    f"test_initial_condition has {len(ic)} entries, state dim is {n}"
                )
            object.__setattr__(self, "test_initial_condition", ic)

    def to_dict(self) -> dict:
        out = {
            "system": self.system,
            "dictionary_size": self.dictionary_size,
            "n_trajectories": self.n_trajectories,
            "duration": self.duration,
            "dt": self.dt,
            "signals": [s.to_dict() for s in self.signals],
            "seed": self.seed,
            "controlled": self.controlled,
            "use_continuous": self.use_continuous,
            "rank_method": self.rank_method,
            "test_horizon": self.test_horizon,
            "test_initial_condition": (
                None if self.test_initial_condition is None
                else list(self.test_initial_condition)
            ),
            "test_signal": None if self.test_signal is None else self.test_signal.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputError(f"unknown config keys: {', '.join(unknown)}")
        missing = [k for k in ("system", "dictionary_size", "n_trajectories",
                               "duration", "dt") if k not in data]
        if missing:
            raise InputError(f"config is missing keys: {', '.join(missing)}")
        kwargs = dict(data)
        if "signals" in kwargs and kwargs["signals"] is not None:
            kwargs["signals"] = tuple(
                InputSignal.from_dict(s) for s in kwargs["signals"]
            )
        else:
            kwargs.pop("signals", None)
        if kwargs.get("test_signal") is not None:
            kwargs["test_signal"] = InputSignal.from_dict(kwargs["test_signal"])
        if kwargs.get("test_initial_condition") is not None:
            kwargs["test_initial_condition"] = tuple(kwargs["test_initial_condition"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read config file {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: invalid JSON: {exc}")
        return cls.from_dict(data)

    def replace(self, **kwargs) -> "ExperimentConfig":
        cfg = {f.name: getattr(self, f.name) for f in fields(self)}
        cfg.update(kwargs)
        return ExperimentConfig(**cfg)


_GOLF_SIGNALS = (
    InputSignal.chirp(0.1, 0.1, 2.0, 4.0),
    InputSignal.chirp(0.2, 0.1, 2.0, 4.0),
    InputSignal.sine(0.1, 0.5),
    InputSignal.sine(0.2, 0.5),
    InputSignal.step(0.1, 1.0),
    InputSignal.step(0.2, 1.0),
)


def default_config(system: str, size: Optional[int] = None,
                   controlled: Optional[bool] = None) -> ExperimentConfig:
    """Calibrated training/test protocol for one of the benchmark systems."""
    if system == "pendulum":
        want_control = bool(controlled)
        return ExperimentConfig(
            system="pendulum",
            dictionary_size=size if size is not None else 6,
            n_trajectories=100,
            duration=3.0,
            dt=0.01,
            signals=(InputSignal.random(-1.0, 1.0),) if want_control
            else (InputSignal.zero(),),
            controlled=want_control,
            test_horizon=10.0,
            test_initial_condition=(7.0 * math.pi / 8.0, 0.0),
        )
    if system == "duffing":
        want_control = bool(controlled)
        return ExperimentConfig(
            system="duffing",
            dictionary_size=size if size is not None else 6,
            n_trajectories=100,
            duration=3.0,
            dt=0.01,
            signals=(InputSignal.random(-1.0, 1.0),) if want_control
            else (InputSignal.zero(),),
            controlled=want_control,
            test_horizon=10.0,
            test_initial_condition=(-1.5, 1.5),
        )
    if system == "golf":
        if size is not None and size != 4:
            raise InputError("the golf robot uses its fixed 4-entry dictionary")
        return ExperimentConfig(
            system="golf",
            dictionary_size=4,
            n_trajectories=6,
            duration=4.0,
            dt=0.001,
            signals=_GOLF_SIGNALS,
            controlled=True,
            rank_method="svd",
            test_horizon=4.0,
            test_initial_condition=(0.5, 0.0),
            test_signal=InputSignal.chirp(0.15, 0.1, 2.0, 4.0),
        )
    raise InputError(f"unknown system {system!r}; expected pendulum, duffing or golf")
