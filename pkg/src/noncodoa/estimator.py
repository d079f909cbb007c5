"""Multi-snapshot DOA estimation by per-snapshot recovery and support fusion.

Each snapshot's recovery matrix is collapsed to the singular vector that
spans the grid axis, the vectors are fused column-wise into one matrix,
and the row energies of that matrix form a pseudo-spectrum whose largest
entries select the estimated directions. Because the per-subarray phases
only ever multiply the recovery matrix from the grid-independent side,
the pseudo-spectrum is invariant to them.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .geometry import SubarrayPartition
from .signal import Grid, SnapshotData
from .solver import RecoveryProblem, RecoverySolution, SolverConfig, solve_smv

__all__ = [
    "EstimationFailedError",
    "EstimatorConfig",
    "SpectrumEstimate",
    "leading_left_singular_vector",
    "fuse_snapshots",
    "pseudo_spectrum",
    "hard_threshold_support",
    "estimate_doas",
]


class EstimationFailedError(RuntimeError):
    """No usable spectrum could be formed (all recovery outputs were zero)."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Recovery constants plus estimator switches.

    ``m_const`` defaults to the total sensor count. The spectrum is built
    from the grid-side (left) singular vectors; ``singular_side="right"``
    uses the conjugated vectors instead, which leaves the spectrum
    unchanged and exists only for comparison. ``weight_by_singular_value``
    scales each snapshot's vector by its leading singular value before
    fusion. ``peak_mode="local_maxima"`` restricts support selection to
    interior local maxima of the spectrum (falling back to top-D when
    there are fewer than D peaks).
    """

    c_const: float = 2.0
    m_const: Optional[int] = None
    epsilon: float = 1.0
    singular_side: Literal["left", "right"] = "left"
    weight_by_singular_value: bool = False
    peak_mode: Literal["top_d", "local_maxima"] = "top_d"
    n_jobs: int = 1


@dataclass(frozen=True)
class SpectrumEstimate:
    """Pseudo-spectrum over the grid plus the selected support and DOAs."""

    pseudo_spectrum: np.ndarray
    support: tuple[int, ...]
    estimated_dirs: tuple[float, ...]
    solver_statuses: tuple[str, ...]
    solver_iterations: tuple[int, ...]

    def __post_init__(self):
        spectrum = np.asarray(self.pseudo_spectrum, dtype=np.float64)
        spectrum.flags.writeable = False
        object.__setattr__(self, "pseudo_spectrum", spectrum)


def leading_left_singular_vector(g_matrix: np.ndarray) -> np.ndarray:
    """Unit-norm leading left singular vector with a fixed phase convention.

    The entry of largest modulus is made real and positive (ties break at
    the lowest index), so repeated calls on the same data agree exactly.
    A zero matrix yields a zero vector and a warning.
    """
    g_matrix = np.asarray(g_matrix)
    if not np.any(g_matrix):
        warnings.warn("zero matrix has no leading singular vector", stacklevel=2)
        return np.zeros(g_matrix.shape[0], dtype=np.complex128)
    u, _, _ = np.linalg.svd(g_matrix, full_matrices=False)
    vec = u[:, 0]
    k = int(np.argmax(np.abs(vec)))
    phase = vec[k] / abs(vec[k])
    return vec * np.conj(phase)


def fuse_snapshots(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Stack per-snapshot grid vectors as the columns of one g x T matrix.

    Equivalent to placing the vectors on a block diagonal, collapsing with
    an all-ones vector and un-vectorizing column-major, which reduces to
    plain column stacking.
    """
    vectors = [np.asarray(v).ravel() for v in vectors]
    if len(vectors) == 0:
        raise ValueError("need at least one snapshot vector")
    g = vectors[0].size
    if any(v.size != g for v in vectors):
        raise ValueError("snapshot vectors must share the grid length")
    return np.column_stack(vectors)


def pseudo_spectrum(e: np.ndarray) -> np.ndarray:
    """Row energies of the fused matrix: diagonal of E @ E^H.

    A 1-D input is treated as a single fused column. Invariant to any
    per-column unit-modulus phase factors.
    """
    e = np.asarray(e)
    if e.ndim == 1:
        e = e[:, None]
    return np.sum(np.abs(e) ** 2, axis=1)


def hard_threshold_support(spectrum: np.ndarray, d: int) -> tuple[int, ...]:
    """Indices of the d largest spectrum entries, ties going to lower indices."""
    spectrum = np.asarray(spectrum)
    if not 1 <= d <= spectrum.size:
        raise ValueError("support size must be between 1 and the grid size")
    order = np.argsort(-spectrum, kind="stable")
    return tuple(sorted(int(i) for i in order[:d]))


def _local_maxima_support(spectrum: np.ndarray, d: int) -> tuple[int, ...]:
    s = np.asarray(spectrum)
    interior = (s[1:-1] >= s[:-2]) & (s[1:-1] >= s[2:])
    peaks = np.flatnonzero(interior) + 1
    if peaks.size < d:
        return hard_threshold_support(s, d)
    best = peaks[np.argsort(-s[peaks], kind="stable")[:d]]
    return tuple(sorted(int(i) for i in best))


def _solve_one(args) -> RecoverySolution:
    problem, config = args
    return solve_smv(problem, config)


def estimate_doas(
    data: SnapshotData,
    grid: Grid,
    partition: SubarrayPartition,
    d_sources: int,
    config: EstimatorConfig = EstimatorConfig(),
    solver_config: SolverConfig = SolverConfig(),
) -> SpectrumEstimate:
    """Estimate ``d_sources`` directions from noncoherent snapshot data.

    Runs the convex recovery once per snapshot, fuses the leading singular
    vectors, and keeps the ``d_sources`` strongest pseudo-spectrum entries.
    Snapshot solves are independent; ``config.n_jobs > 1`` runs them in
    parallel worker processes without changing the result. Solver
    non-convergence is reported as a warning and the estimate is still
    formed from the returned iterates; a spectrum that is identically zero
    raises EstimationFailedError.
    """
    if data.n_snapshots < 1:
        raise ValueError("need at least one snapshot")
    problems = [
        RecoveryProblem.from_partition(
            partition,
            grid,
            data.observations[:, t],
            data.noise_var,
            c_const=config.c_const,
            m_const=config.m_const,
            epsilon=config.epsilon,
        )
        for t in range(data.n_snapshots)
    ]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            solutions = list(pool.map(_solve_one, [(p, solver_config) for p in problems]))
    else:
        solutions = [solve_smv(p, solver_config) for p in problems]

    for t, sol in enumerate(solutions):
        if sol.status != "converged":
            warnings.warn(
                f"snapshot {t}: solver stopped with status {sol.status!r} "
                f"after {sol.iterations} iterations",
                stacklevel=2,
            )

    vectors = []
    for sol in solutions:
        if not np.any(sol.g_matrix):
            vectors.append(np.zeros(grid.g, dtype=np.complex128))
            continue
        vec = leading_left_singular_vector(sol.g_matrix)
        if config.singular_side == "right":
            # Literal reading: the leading grid-length singular vector of
            # the transposed matrix, i.e. the conjugate. Same spectrum.
            vec = np.conj(vec)
        if config.weight_by_singular_value:
            vec = vec * np.linalg.svd(sol.g_matrix, compute_uv=False)[0]
        vectors.append(vec)

    fused = fuse_snapshots(vectors)
    spectrum = pseudo_spectrum(fused)
    if not np.any(spectrum > 0):
        raise EstimationFailedError("pseudo-spectrum is identically zero")
    if config.peak_mode == "local_maxima":
        support = _local_maxima_support(spectrum, d_sources)
    else:
        support = hard_threshold_support(spectrum, d_sources)
    dirs = tuple(float(grid.points[i]) for i in support)
    return SpectrumEstimate(
        pseudo_spectrum=spectrum,
        support=support,
        estimated_dirs=dirs,
        solver_statuses=tuple(s.status for s in solutions),
        solver_iterations=tuple(s.iterations for s in solutions),
    )
