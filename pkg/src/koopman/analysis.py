"""Spectral and system-theoretic assessment of fitted lifted models.

Discrete eigenvalues are mapped to continuous time through the principal
logarithm, the full generator matrix is recovered by eigendecomposition
(with an explicit exp round-trip check rather than silent regularization),
and controllability/observability are certified by numerical rank of the
Kalman block matrices with an auditable tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg

from .edmd import KoopmanModel
from .exceptions import (
    IllConditionedError,
    InputError,
    NoPrincipalLogError,
    NumericsError,
)

__all__ = [
    "Spectrum",
    "AnalysisReport",
    "spectrum",
    "generator",
    "continuous_input_matrix",
    "controllability_rank",
    "observability_rank",
    "analyze",
    "cumulative_error",
]

_EIGENVECTOR_COND_LIMIT = 1e12
_IMAG_RESIDUE_LIMIT = 1e-8
_ROUNDTRIP_LIMIT = 1e-6


def _sorted_eigenvalues(values: np.ndarray) -> np.ndarray:
    # deterministic report order: decreasing modulus, then decreasing
    # imaginary part so conjugate pairs sit together, + branch first
    order = np.lexsort((-values.imag, -np.abs(values)))
    return values[order]


@dataclass(frozen=True)
class Spectrum:
    """Discrete eigenvalues and their continuous-time counterparts.

    continuous[i] = log(discrete[i]) / dt on the principal branch. A zero
    discrete eigenvalue has no finite logarithm; its continuous entry is
    -inf and `has_zero_modes` is set.
    """

    discrete: np.ndarray
    continuous: np.ndarray
    dt: float
    has_zero_modes: bool = False

    def __post_init__(self):
        if self.discrete.shape != self.continuous.shape:
            raise InputError("discrete and continuous spectra differ in length")

    @property
    def stable_discrete(self) -> bool:
        return bool(np.all(np.abs(self.discrete) < 1.0))

    @property
    def stable_continuous(self) -> bool:
        return bool(np.all(self.continuous.real < 0.0))


def spectrum(model: KoopmanModel) -> Spectrum:
    """Eigenvalues of the transition matrix and their principal logarithms."""
    try:
        discrete = np.linalg.eigvals(model.transition).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigensolver failed: {exc}")
    discrete = _sorted_eigenvalues(discrete)
    zero = discrete == 0.0
    continuous = np.empty_like(discrete)
    # principal branch: log mu = ln|mu| + i*arg(mu), arg in (-pi, pi]
    with np.errstate(divide="ignore"):
        continuous[~zero] = np.log(discrete[~zero]) / model.dt
    continuous[zero] = complex(-np.inf, 0.0)
    return Spectrum(
        discrete=discrete,
        continuous=continuous,
        dt=model.dt,
        has_zero_modes=bool(zero.any()),
    )


def generator(model: KoopmanModel) -> np.ndarray:
    """Continuous-time generator K with exp(K*dt) = transition.

    Computed by eigendecomposition: K = V diag(log mu) V^-1 / dt. Fails
    loudly instead of approximating: eigenvalues on the closed negative real
    axis have no principal logarithm, and an eigenvector basis with condition
    number above 1e12 (or a failed exp round-trip) is rejected.
    """
    k_t = model.transition
    try:
        eigvals, eigvecs = np.linalg.eig(k_t)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigensolver failed: {exc}")

    scale = np.max(np.abs(eigvals)) if eigvals.size else 0.0
    on_branch_cut = (np.abs(eigvals.imag) <= 1e-14 * max(scale, 1.0)) & (eigvals.real <= 0.0)
    if np.any(on_branch_cut):
        bad = eigvals[on_branch_cut][0]
        raise NoPrincipalLogError(
            f"eigenvalue {bad:.6g} lies on the closed negative real axis; "
            "no principal logarithm exists"
        )

    cond = np.linalg.cond(eigvecs)
    if not np.isfinite(cond) or cond > _EIGENVECTOR_COND_LIMIT:
        raise IllConditionedError(
            f"eigenvector condition number {cond:.3g} exceeds {_EIGENVECTOR_COND_LIMIT:.0e}"
        )

    log_k = (eigvecs * np.log(eigvals)) @ np.linalg.inv(eigvecs) / model.dt
    residue = float(np.max(np.abs(log_k.imag)))
    if residue > _IMAG_RESIDUE_LIMIT * max(1.0, np.max(np.abs(log_k.real))):
        raise IllConditionedError(
            f"matrix logarithm has imaginary residue {residue:.3g}"
        )
    gen = log_k.real

    roundtrip = scipy.linalg.expm(gen * model.dt)
    err = np.linalg.norm(roundtrip - k_t) / max(np.linalg.norm(k_t), 1e-300)
    if err > _ROUNDTRIP_LIMIT:
        raise IllConditionedError(
            f"exp(K*dt) reproduces the transition only to {err:.3g} relative error"
        )
    return gen


def continuous_input_matrix(model: KoopmanModel, gen: Optional[np.ndarray] = None) -> np.ndarray:
    """Continuous input matrix under a zero-order hold.

    Inverts B_t = K^-1 (exp(K dt) - I) B_c, i.e. B_c = K (K_t - I)^-1 B_t;
    requires the transition minus identity to be invertible.
    """
    if model.input_matrix is None:
        raise InputError("model has no input matrix")
    if gen is None:
        gen = generator(model)
    shifted = model.transition - np.eye(model.size)
    try:
        solved = np.linalg.solve(shifted, model.input_matrix)
    except np.linalg.LinAlgError:
        raise NumericsError(
            "transition matrix has a unit eigenvalue; zero-order-hold "
            "inversion of the input matrix is singular"
        )
    return gen @ solved


def exact_rank(matrix: np.ndarray) -> int:
    """Rank over the rationals, treating each float entry as exact.

    Bareiss fraction-free elimination, so no tolerance is involved. Kalman
    block matrices beyond a dozen states have singular-value ratios under
    the double-precision noise floor even when they are structurally full
    rank; this answers the structural question the SVD cannot.
    """
    matrix = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise InputError("rank test received non-finite entries")
    rows = [[Fraction(x) for x in row] for row in matrix.tolist()]
    m, n = len(rows), len(rows[0]) if rows else 0
    rank, prev = 0, Fraction(1)
    for col in range(n):
        pivot_row = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if pivot_row is None:
            continue
        rows[rank], rows[pivot_row] = rows[pivot_row], rows[rank]
        pivot = rows[rank][col]
        for r in range(rank + 1, m):
            factor = rows[r][col]
            for c in range(col, n):
                rows[r][c] = (rows[r][c] * pivot - factor * rows[rank][c]) / prev
        prev = pivot
        rank += 1
        if rank == m:
            break
    return rank


def _numerical_rank(matrix: np.ndarray, order: int, rtol: Optional[float]) -> int:
    if not np.all(np.isfinite(matrix)):
        raise InputError("rank test received non-finite entries")
    s = np.linalg.svd(matrix, compute_uv=False)
    if rtol is None:
        rtol = order * np.finfo(float).eps
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def _rank(matrix: np.ndarray, order: int, rtol, method: str) -> int:
    if method == "exact":
        return exact_rank(matrix)
    if method != "svd":
        raise InputError(f"unknown rank method {method!r}; expected 'svd' or 'exact'")
    return _numerical_rank(matrix, order, rtol)


def controllability_rank(
    k: np.ndarray, b: np.ndarray, rtol: Optional[float] = None, method: str = "svd"
) -> int:
    """Rank of the Kalman block matrix (B, KB, ..., K^(N-1)B).

    method "svd" counts singular values above rtol * sigma_max (rtol defaults
    to N * machine epsilon); "exact" computes the tolerance-free rational rank.
    """
    k = np.asarray(k, dtype=float)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[0] != k.shape[0]:
        b = b.T
    if k.ndim != 2 or k.shape[0] != k.shape[1] or b.shape[0] != k.shape[0]:
        raise InputError(f"inconsistent shapes {k.shape} and {b.shape}")
    n = k.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(k @ blocks[-1])
    return _rank(np.hstack(blocks), n, rtol, method)


def observability_rank(
    k: np.ndarray, c: np.ndarray, rtol: Optional[float] = None, method: str = "svd"
) -> int:
    """Rank of the stacked observability matrix (C; CK; ...; CK^(N-1))."""
    k = np.asarray(k, dtype=float)
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if k.ndim != 2 or k.shape[0] != k.shape[1] or c.shape[1] != k.shape[0]:
        raise InputError(f"inconsistent shapes {k.shape} and {c.shape}")
    n = k.shape[0]
    blocks = [c]
    for _ in range(n - 1):
        blocks.append(blocks[-1] @ k)
    return _rank(np.vstack(blocks), n, rtol, method)


@dataclass(frozen=True)
class AnalysisReport:
    """Everything the rank/stability assessment produced, tolerances included."""

    spectrum: Spectrum
    stable_continuous: bool
    stable_discrete: bool
    size: int
    rank_rtol: Optional[float]
    fit_residual: float
    ctrb_rank: Optional[int] = None
    obsv_rank: Optional[int] = None
    rank_domain: str = "continuous"  # which (K, B) pair the rank tests used
    rank_method: str = "svd"
    fallback_reason: Optional[str] = None

    def to_dict(self) -> dict:
        def pairs(values):
            out = []
            for v in values:
                re = float(v.real) if np.isfinite(v.real) else None
                im = float(v.imag) if np.isfinite(v.imag) else None
                out.append([re, im])
            return out

        return {
            "size": self.size,
            "dt": self.spectrum.dt,
            "eigenvalues_discrete": pairs(self.spectrum.discrete),
            "eigenvalues_continuous": pairs(self.spectrum.continuous),
            "has_zero_modes": self.spectrum.has_zero_modes,
            "stable_continuous": self.stable_continuous,
            "stable_discrete": self.stable_discrete,
            "ctrb_rank": self.ctrb_rank,
            "obsv_rank": self.obsv_rank,
            "rank_rtol": self.rank_rtol,
            "rank_domain": self.rank_domain,
            "rank_method": self.rank_method,
            "fallback_reason": self.fallback_reason,
            "fit_residual": self.fit_residual,
        }


def analyze(
    model: KoopmanModel, use_continuous: bool = True, rank_method: str = "svd"
) -> AnalysisReport:
    """Spectrum, stability verdicts, and rank tests for a fitted model.

    Rank tests run on the continuous-time pair (generator, ZOH-inverted input
    matrix) when possible, falling back to the discrete pair with a recorded
    reason when the generator or the inversion fails. The output map for
    observability is the first state coordinate.
    """
    spec = spectrum(model)
    rank_rtol = None if rank_method == "exact" else model.size * np.finfo(float).eps
    c_out = model.projection[:1, :]

    domain, reason = "continuous", None
    k, b = None, None
    if use_continuous:
        try:
            gen = generator(model)
            k = gen
            if model.input_matrix is not None:
                b = continuous_input_matrix(model, gen)
        except NumericsError as exc:
            domain, reason = "discrete", str(exc)
            k, b = None, None
    else:
        domain, reason = "discrete", "requested"
    if k is None:
        k = model.transition
        b = model.input_matrix

    ctrb = controllability_rank(k, b, rank_rtol, rank_method) if b is not None else None
    obsv = observability_rank(k, c_out, rank_rtol, rank_method)

    return AnalysisReport(
        spectrum=spec,
        stable_continuous=spec.stable_continuous,
        stable_discrete=spec.stable_discrete,
        size=model.size,
        rank_rtol=rank_rtol,
        fit_residual=model.fit_residual,
        ctrb_rank=ctrb,
        obsv_rank=obsv,
        rank_domain=domain,
        rank_method=rank_method,
        fallback_reason=reason,
    )


def cumulative_error(measured, predicted) -> np.ndarray:
    """Running sum of squared deviations between two equal-length series."""
    measured = np.asarray(measured, dtype=float).ravel()
    predicted = np.asarray(predicted, dtype=float).ravel()
    if measured.shape != predicted.shape:
        raise InputError(
            f"series lengths differ: {measured.shape} vs {predicted.shape}"
        )
    return np.cumsum((measured - predicted) ** 2)
