"""Snapshot assembly, operator fitting, and the two prediction schemes.

The fit is plain least squares on lifted snapshot pairs, solved through an
SVD pseudoinverse because lifted regressors are routinely ill-conditioned.
Prediction comes in two flavors: `predict_straight` lifts the initial state
once and iterates the linear model, `predict_corrected` projects back to the
original state and re-lifts at every step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .dynamics import Trajectory
from .exceptions import DivergenceError, InputError, NumericsError
from .observables import Dictionary, projection_matrix

__all__ = [
    "SnapshotSet",
    "KoopmanModel",
    "assemble",
    "pinv",
    "fit",
    "fit_with_control",
    "predict_straight",
    "predict_corrected",
]


@dataclass(frozen=True)
class SnapshotSet:
    """Paired one-step snapshots pooled across trajectories.

    Column j of `next_states` is the successor of column j of `states` within
    a single trajectory; pairs never span a trajectory boundary.
    """

    states: np.ndarray       # n x M
    next_states: np.ndarray  # n x M
    dt: float
    inputs: Optional[np.ndarray] = None  # p x M, input active during each pair
    manifest: Optional[dict] = None

    def __post_init__(self):
        a, b = np.asarray(self.states, float), np.asarray(self.next_states, float)
        object.__setattr__(self, "states", a)
        object.__setattr__(self, "next_states", b)
        if a.ndim != 2 or a.shape != b.shape:
            raise InputError(f"snapshot matrices disagree: {a.shape} vs {b.shape}")
        if self.dt <= 0:
            raise InputError(f"dt must be > 0, got {self.dt}")
        if self.inputs is not None:
            u = np.atleast_2d(np.asarray(self.inputs, float))
            object.__setattr__(self, "inputs", u)
            if u.shape[1] != a.shape[1]:
                raise InputError(
                    f"inputs provide {u.shape[1]} columns for {a.shape[1]} pairs"
                )

    @property
    def pairs(self) -> int:
        return self.states.shape[1]

    @property
    def state_dim(self) -> int:
        return self.states.shape[0]


def assemble(trajectories: Sequence[Trajectory]) -> SnapshotSet:
    """Pool (x_k, x_{k+1}) pairs from trajectories sharing one dt.

    A trajectory of M samples contributes M-1 pairs, ordered trajectory by
    trajectory, then by time. Inputs, when present on every trajectory, are
    paired with the step during which they were applied (sample k).
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise InputError("at least one trajectory is required")
    dt = trajectories[0].dt
    n = trajectories[0].state_dim
    with_inputs = all(t.inputs is not None for t in trajectories)
    xs, ys, us, manifest = [], [], [], []
    for i, traj in enumerate(trajectories):
        if traj.samples < 2:
            raise InputError(f"trajectory {i} has {traj.samples} samples, need >= 2")
        if traj.dt != dt:
            raise InputError(f"trajectory {i} has dt={traj.dt}, expected {dt}")
        if traj.state_dim != n:
            raise InputError(f"trajectory {i} has state_dim={traj.state_dim}, expected {n}")
        xs.append(traj.states[:, :-1])
        ys.append(traj.states[:, 1:])
        if with_inputs:
            us.append(traj.inputs[:, :-1])
        manifest.append({
            "samples": traj.samples,
            "seed": traj.seed,
            "system": traj.system,
            "signal": traj.signal.to_dict() if traj.signal is not None else None,
        })
    return SnapshotSet(
        states=np.hstack(xs),
        next_states=np.hstack(ys),
        dt=dt,
        inputs=np.hstack(us) if with_inputs else None,
        manifest={"trajectories": manifest},
    )


def pinv(matrix: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD truncation.

    Singular values below rtol * sigma_max are treated as zero;
    rtol defaults to max(rows, cols) * machine epsilon.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise InputError(f"expected a matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InputError("matrix contains non-finite entries")
    try:
        u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"SVD failed: {exc}")
    if rtol is None:
        rtol = max(matrix.shape) * np.finfo(float).eps
    if s.size == 0:
        return matrix.T
    cutoff = rtol * s[0]
    keep = s > cutoff
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


@dataclass(frozen=True)
class KoopmanModel:
    """A fitted lifted linear model z_{k+1} = transition z_k (+ input_matrix u_k)."""

    transition: np.ndarray               # N x N
    dt: float
    dictionary: Dictionary
    fit_residual: float
    input_matrix: Optional[np.ndarray] = None  # N x p

    def __post_init__(self):
        k = np.asarray(self.transition, float)
        object.__setattr__(self, "transition", k)
        size = self.dictionary.size
        if k.shape != (size, size):
            raise InputError(
                f"transition shape {k.shape} does not match dictionary size {size}"
            )
        if self.dt <= 0:
            raise InputError(f"dt must be > 0, got {self.dt}")
        if self.fit_residual < 0:
            raise InputError("fit_residual must be >= 0")
        if self.input_matrix is not None:
            b = np.atleast_2d(np.asarray(self.input_matrix, float))
            if b.shape[0] != size:
                b = b.T
            if b.shape[0] != size:
                raise InputError(
                    f"input_matrix shape {b.shape} does not match dictionary size {size}"
                )
            object.__setattr__(self, "input_matrix", b)

    @property
    def size(self) -> int:
        return self.dictionary.size

    @property
    def state_dim(self) -> int:
        return self.dictionary.state_dim

    @property
    def input_dim(self) -> int:
        return 0 if self.input_matrix is None else self.input_matrix.shape[1]

    @property
    def projection(self) -> np.ndarray:
        return projection_matrix(self.dictionary)


def _lift_pair(snapshots: SnapshotSet, dictionary: Dictionary):
    if dictionary.state_dim != snapshots.state_dim:
        raise InputError(
            f"dictionary expects state_dim={dictionary.state_dim}, "
            f"snapshots have {snapshots.state_dim}"
        )
    if snapshots.pairs < dictionary.size:
        warnings.warn(
            f"only {snapshots.pairs} snapshot pairs for {dictionary.size} observables; "
            "the least-squares fit is underdetermined",
            stacklevel=3,
        )
    return dictionary.lift(snapshots.states), dictionary.lift(snapshots.next_states)


def _residual(lifted_next, reconstruction) -> float:
    denom = np.linalg.norm(lifted_next)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(lifted_next - reconstruction) / denom)


def fit(snapshots: SnapshotSet, dictionary: Dictionary) -> KoopmanModel:
    """Least-squares fit of the autonomous lifted transition matrix."""
    if snapshots.inputs is not None and np.any(snapshots.inputs != 0.0):
        raise InputError("snapshots carry nonzero inputs; use fit_with_control")
    lifted, lifted_next = _lift_pair(snapshots, dictionary)
    transition = lifted_next @ pinv(lifted)
    return KoopmanModel(
        transition=transition,
        dt=snapshots.dt,
        dictionary=dictionary,
        fit_residual=_residual(lifted_next, transition @ lifted),
    )


def fit_with_control(snapshots: SnapshotSet, dictionary: Dictionary) -> KoopmanModel:
    """Joint least-squares fit of transition and input matrices.

    Solves for (K B) against the lifted states stacked over the inputs, then
    splits the solution.
    """
    if snapshots.inputs is None:
        raise InputError("snapshots carry no inputs; use fit")
    lifted, lifted_next = _lift_pair(snapshots, dictionary)
    stacked = np.vstack([lifted, snapshots.inputs])
    solution = lifted_next @ pinv(stacked)
    size = dictionary.size
    transition, input_matrix = solution[:, :size], solution[:, size:]
    return KoopmanModel(
        transition=transition,
        dt=snapshots.dt,
        dictionary=dictionary,
        fit_residual=_residual(lifted_next, solution @ stacked),
        input_matrix=input_matrix,
    )


def _input_sequence(model: KoopmanModel, u_seq, steps: int) -> Optional[np.ndarray]:
    if model.input_matrix is None:
        if u_seq is not None and np.any(np.asarray(u_seq) != 0.0):
            raise InputError("model has no input matrix but a nonzero u_seq was given")
        return None
    if u_seq is None:
        raise InputError("controlled model needs a u_seq covering every step")
    u = np.atleast_2d(np.asarray(u_seq, dtype=float))
    p = model.input_matrix.shape[1]
    if u.shape[0] != p and u.shape[1] == p:
        u = u.T
    if u.shape[0] != p or u.shape[1] < steps:
        raise InputError(
            f"u_seq must provide {p} x >= {steps} values, got {np.asarray(u_seq).shape}"
        )
    return u[:, :steps]


def predict_straight(
    model: KoopmanModel, x0, u_seq=None, steps: int = 0
) -> Tuple[np.ndarray, np.ndarray]:
    """Lift once, iterate the linear model; returns (lifted N x (steps+1), states n x (steps+1)).

    The dictionary is evaluated only at k = 0, so the rollout is a purely
    linear system in the lifted space.
    """
    if steps < 0:
        raise InputError("steps must be >= 0")
    u = _input_sequence(model, u_seq, steps)
    lifted = np.empty((model.size, steps + 1))
    lifted[:, 0] = model.dictionary.eval(np.asarray(x0, dtype=float))
    # Straight rollouts may legitimately blow up; overflow to inf is the
    # signal the caller inspects, not an error condition.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            z = model.transition @ lifted[:, k]
            if u is not None:
                z = z + model.input_matrix @ u[:, k]
            lifted[:, k + 1] = z
        return lifted, model.projection @ lifted


def predict_corrected(model: KoopmanModel, x0, u_seq=None, steps: int = 0) -> np.ndarray:
    """Project and re-lift every step; returns states n x (steps+1).

    More accurate than the straight rollout on dictionaries that do not span
    an invariant subspace, at the price of no longer being a linear system.
    """
    if steps < 0:
        raise InputError("steps must be >= 0")
    u = _input_sequence(model, u_seq, steps)
    proj = model.projection
    states = np.empty((model.state_dim, steps + 1))
    states[:, 0] = np.asarray(x0, dtype=float)
    for k in range(steps):
        z = model.transition @ model.dictionary.eval(states[:, k])
        if u is not None:
            z = z + model.input_matrix @ u[:, k]
        nxt = proj @ z
        if not np.all(np.isfinite(nxt)):
            raise DivergenceError("corrected prediction diverged", step=k + 1)
        states[:, k + 1] = nxt
    return states
