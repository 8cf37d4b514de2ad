"""Request/response bodies for the HTTP service.

These mirror the package's file formats: a model payload is exactly the model
JSON document, a trajectory payload is the columnar content of a trajectory
CSV. Signal specs stay permissive here; InputSignal performs the real
per-kind validation so the service and the file loaders reject identically.
"""

from __future__ import annotations

from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..dynamics import InputSignal, Trajectory
from ..edmd import KoopmanModel
from ..fileio import model_from_dict, model_to_dict


class SignalSpec(BaseModel):
    model_config = ConfigDict(extra="allow")

    kind: str

    def to_signal(self) -> InputSignal:
        return InputSignal.from_dict(self.model_dump())


class TrajectoryPayload(BaseModel):
    dt: float
    times: List[float]
    states: List[List[float]]
    inputs: Optional[List[List[float]]] = None
    seed: Optional[int] = None
    system: Optional[str] = None
    signal: Optional[SignalSpec] = None

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "TrajectoryPayload":
        return cls(
            dt=traj.dt,
            times=traj.times.tolist(),
            states=traj.states.tolist(),
            inputs=None if traj.inputs is None else traj.inputs.tolist(),
            seed=None if traj.seed is None else int(traj.seed),
            system=traj.system,
            signal=None if traj.signal is None else SignalSpec(**traj.signal.to_dict()),
        )

    def to_trajectory(self) -> Trajectory:
        return Trajectory(
            dt=self.dt,
            times=np.array(self.times, dtype=float),
            states=np.array(self.states, dtype=float),
            inputs=None if self.inputs is None else np.array(self.inputs, dtype=float),
            seed=self.seed,
            system=self.system,
            signal=None if self.signal is None else self.signal.to_signal(),
        )


class DictionaryPayload(BaseModel):
    state_dim: int
    expressions: List[str]


class ModelPayload(BaseModel):
    format: str = "koopman-model/1"
    dt: float
    dictionary: DictionaryPayload
    transition: List[List[float]]
    input_matrix: Optional[List[List[float]]] = None
    fit_residual: float
    provenance: dict = Field(default_factory=dict)

    @classmethod
    def from_model(cls, model: KoopmanModel, provenance: Optional[dict] = None) -> "ModelPayload":
        return cls(**model_to_dict(model, provenance))

    def to_model(self) -> KoopmanModel:
        return model_from_dict(self.model_dump())


class GenerateRequest(BaseModel):
    system: str
    n_trajectories: int = 10
    duration: float = 3.0
    dt: float = 0.01
    signals: List[SignalSpec] = Field(default_factory=lambda: [SignalSpec(kind="zero")])
    seed: int = 42


class GenerateResponse(BaseModel):
    trajectories: List[TrajectoryPayload]
    manifest: dict


class FitRequest(BaseModel):
    """Either a full experiment config, or explicit trajectories plus the
    dictionary selection to fit them with."""

    config: Optional[dict] = None
    trajectories: Optional[List[TrajectoryPayload]] = None
    system: Optional[str] = None
    dictionary_size: Optional[int] = None
    controlled: bool = False


class FitResponse(BaseModel):
    model: ModelPayload


class PredictRequest(BaseModel):
    model: ModelPayload
    x0: List[float]
    steps: int = 1
    u: Optional[List[List[float]]] = None
    scheme: Literal["straight", "corrected", "both"] = "both"


class PredictResponse(BaseModel):
    times: List[float]
    straight: Optional[List[List[float]]] = None
    corrected: Optional[List[List[float]]] = None


class AnalyzeRequest(BaseModel):
    model: ModelPayload
    use_continuous: bool = True
    rank_method: Literal["svd", "exact"] = "svd"


class IngestFile(BaseModel):
    name: str
    content: str


class IngestRequest(BaseModel):
    files: List[IngestFile]
    time_column: str = "t"
    angle_column: str = "x1"
    velocity_column: Optional[str] = "x2"
    input_columns: List[str] = Field(default_factory=list)
    window: int = 21


class IngestResponse(BaseModel):
    trajectories: List[TrajectoryPayload]
    manifest: dict


class ReproduceRequest(BaseModel):
    target: str
    seed: int = 42


class ReproduceResponse(BaseModel):
    summary: dict
    files: Dict[str, str]
