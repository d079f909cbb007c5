"""Convex recovery of a row-sparse, low-rank grid coefficient matrix.

Solves, for a single snapshot split across L noncoherent subarrays,

    minimize    ||G||_{1,2} + epsilon * ||G||_*
    subject to  sum_l ||x_l - A_l @ G[:, l]||_2^2 <= C * M * sigma^2

with G of shape (g, L). The mixed norm pushes the rows of G to a common
sparse support while the nuclear norm pushes G toward the rank-one
structure induced by a shared source vector times per-subarray phases.

The solver is a consensus ADMM with three proximal blocks (row
soft-thresholding, singular-value soft-thresholding, and a residual-ball
projection through the block-diagonal subarray operator) coupled by a
per-column linear solve. The linear solves use cached factorizations of
the small N_l x N_l Gram matrices, so each iteration is O(g * N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .geometry import SubarrayPartition
from .signal import Grid, manifold

__all__ = [
    "RecoveryProblem",
    "SolverConfig",
    "RecoverySolution",
    "prox_row_l12",
    "prox_nuclear",
    "project_residual_ball",
    "objective_value",
    "solve_smv",
]


@dataclass(frozen=True)
class RecoveryProblem:
    """One snapshot of subarray observations plus the recovery constants.

    ``m_const`` defaults to the total sensor count, making
    C * M * sigma^2 a multiple of the expected noise energy.
    """

    subarray_manifolds: tuple[np.ndarray, ...]
    observation: np.ndarray
    noise_var: float
    c_const: float = 2.0
    m_const: Optional[int] = None
    epsilon: float = 1.0

    def __post_init__(self):
        mats = tuple(np.asarray(a, dtype=np.complex128) for a in self.subarray_manifolds)
        if len(mats) == 0:
            raise ValueError("need at least one subarray manifold")
        g = mats[0].shape[1]
        if any(a.ndim != 2 or a.shape[1] != g for a in mats):
            raise ValueError("subarray manifolds must share the grid size")
        obs = np.asarray(self.observation, dtype=np.complex128).ravel()
        n_total = sum(a.shape[0] for a in mats)
        if obs.size != n_total:
            raise ValueError(
                f"observation has {obs.size} entries, manifolds cover {n_total} sensors"
            )
        if self.noise_var < 0:
            raise ValueError("noise variance must be >= 0")
        if self.c_const <= 0:
            raise ValueError("constraint slack C must be > 0")
        m = self.m_const if self.m_const is not None else n_total
        if m < 1:
            raise ValueError("constraint scale M must be a positive integer")
        if self.epsilon < 0:
            raise ValueError("nuclear-norm weight must be >= 0")
        obs.flags.writeable = False
        object.__setattr__(self, "subarray_manifolds", mats)
        object.__setattr__(self, "observation", obs)
        object.__setattr__(self, "m_const", int(m))

    @classmethod
    def from_partition(
        cls,
        partition: SubarrayPartition,
        grid: Grid,
        observation: np.ndarray,
        noise_var: float,
        *,
        c_const: float = 2.0,
        m_const: Optional[int] = None,
        epsilon: float = 1.0,
    ) -> "RecoveryProblem":
        """Build the per-subarray manifolds (absolute positions) for a partition."""
        mats = tuple(manifold(s, grid) for s in partition.subarrays)
        return cls(mats, observation, noise_var, c_const, m_const, epsilon)

    @property
    def n_subarrays(self) -> int:
        return len(self.subarray_manifolds)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.subarray_manifolds)

    @property
    def n_total(self) -> int:
        return int(self.observation.size)

    @property
    def g(self) -> int:
        return int(self.subarray_manifolds[0].shape[1])

    @property
    def residual_radius_sq(self) -> float:
        return float(self.c_const * self.m_const * self.noise_var)

    @property
    def residual_radius(self) -> float:
        return math.sqrt(self.residual_radius_sq)


@dataclass(frozen=True)
class SolverConfig:
    """ADMM knobs; the defaults favor accuracy over speed."""

    rho: float = 1.0
    max_iter: int = 5000
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    over_relaxation: float = 1.0
    adapt_rho: bool = True

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be > 0")
        if not 1.0 <= self.over_relaxation <= 1.8:
            raise ValueError("over_relaxation must lie in [1, 1.8]")


@dataclass(frozen=True)
class RecoverySolution:
    """Solver output: the recovered matrix plus convergence diagnostics.

    ``feasibility_gap`` is constraint LHS minus RHS (non-positive up to
    tolerance on success). ``status`` is "converged", "max_iter" or
    "infeasible".
    """

    g_matrix: np.ndarray
    objective: float
    feasibility_gap: float
    iterations: int
    status: str
    primal_residual: float
    dual_residual: float


def prox_row_l12(m: np.ndarray, tau: float) -> np.ndarray:
    """Row-wise group soft-thresholding: prox of tau * sum of row 2-norms.

    Each row r maps to max(0, 1 - tau/||r||) * r; rows with norm below tau
    vanish and zero rows stay zero.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return np.array(m, copy=True)
    m = np.asarray(m)
    norms = np.linalg.norm(m, axis=1)
    scale = np.maximum(0.0, 1.0 - tau / np.maximum(norms, np.finfo(float).tiny))
    return m * scale[:, None]


def prox_nuclear(m: np.ndarray, tau: float) -> np.ndarray:
    """Singular-value soft-thresholding: prox of tau * nuclear norm."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    if tau == 0:
        return np.array(m, copy=True)
    try:
        u, s, vh = np.linalg.svd(np.asarray(m), full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ArithmeticError("SVD failed in singular-value thresholding") from exc
    s = np.maximum(s - tau, 0.0)
    return (u * s) @ vh


def project_residual_ball(residual: np.ndarray, problem: RecoveryProblem) -> np.ndarray:
    """Project a stacked data residual onto the constraint ball.

    The ball has radius sqrt(C * M * sigma^2) around the origin; a zero
    noise variance collapses it to a point, forcing an exact data fit.
    """
    residual = np.asarray(residual)
    radius = problem.residual_radius
    nrm = np.linalg.norm(residual)
    if nrm <= radius:
        return np.array(residual, copy=True)
    if radius == 0.0:
        return np.zeros_like(residual)
    return residual * (radius / nrm)


def objective_value(g_matrix: np.ndarray, epsilon: float) -> float:
    """Mixed-norm objective: sum of row 2-norms plus epsilon * nuclear norm."""
    g_matrix = np.asarray(g_matrix)
    row_part = float(np.sum(np.linalg.norm(g_matrix, axis=1)))
    if epsilon == 0:
        return row_part
    return row_part + epsilon * float(np.sum(np.linalg.svd(g_matrix, compute_uv=False)))


class _BlockOperator:
    """Column-wise application of the subarray manifolds and the cached
    solves of (2*I + A_l^H A_l) via the small-Gram Woodbury identity."""

    def __init__(self, mats: Sequence[np.ndarray]):
        self.mats = list(mats)
        self.sizes = [a.shape[0] for a in self.mats]
        self.g = self.mats[0].shape[1]
        self.offsets = np.cumsum([0] + self.sizes)
        self.factors = [
            cho_factor(2.0 * np.eye(a.shape[0]) + a @ a.conj().T) for a in self.mats
        ]

    def apply(self, g_matrix: np.ndarray) -> np.ndarray:
        """Stack A_l @ G[:, l] into one length-N vector."""
        out = np.empty(self.offsets[-1], dtype=np.complex128)
        for l, a in enumerate(self.mats):
            out[self.offsets[l] : self.offsets[l + 1]] = a @ g_matrix[:, l]
        return out

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Columns A_l^H @ y_l as a (g, L) matrix."""
        out = np.empty((self.g, len(self.mats)), dtype=np.complex128)
        for l, a in enumerate(self.mats):
            out[:, l] = a.conj().T @ y[self.offsets[l] : self.offsets[l + 1]]
        return out

    def solve_consensus(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (2*I + A_l^H A_l) g_l = rhs_l for every column."""
        out = np.empty_like(rhs)
        for l, a in enumerate(self.mats):
            ar = a @ rhs[:, l]
            out[:, l] = 0.5 * (rhs[:, l] - a.conj().T @ cho_solve(self.factors[l], ar))
        return out


def solve_smv(problem: RecoveryProblem, config: SolverConfig = SolverConfig()) -> RecoverySolution:
    """Run the consensus ADMM on one snapshot's recovery problem.

    Deterministic for fixed inputs and config. The subarray operators are
    rescaled internally by their largest spectral norm (at least 1) so the
    three consensus couplings are comparably conditioned; the returned
    matrix and objective are in the original scaling.

    Returns a solution with status "converged" once the block residuals,
    the dual residual and the constraint gap all sit below the configured
    relative tolerances; "max_iter" if the budget runs out first; and
    "infeasible" when the data-fit residual stalls above tolerance, which
    happens when the observation cannot be matched within the ball (e.g. a
    zero noise variance with an observation outside the operators' range).
    """
    x = problem.observation
    radius = problem.residual_radius
    radius_sq = problem.residual_radius_sq
    eps = problem.epsilon
    g, nl = problem.g, problem.n_subarrays

    # Balance the ball coupling against the two identity couplings.
    scale = max(1.0, max(np.linalg.norm(a, 2) for a in problem.subarray_manifolds))
    op = _BlockOperator([a / scale for a in problem.subarray_manifolds])

    rho = config.rho
    alpha = config.over_relaxation
    tol_p, tol_d = config.tol_primal, config.tol_dual

    gm = np.zeros((g, nl), dtype=np.complex128)
    z1 = np.zeros_like(gm)
    z2 = np.zeros_like(gm)
    z3 = np.zeros(problem.n_total, dtype=np.complex128)
    u1 = np.zeros_like(gm)
    u2 = np.zeros_like(gm)
    u3 = np.zeros_like(z3)

    status = "max_iter"
    iterations = config.max_iter
    pr = dr = math.inf
    best_p3 = math.inf
    stall_reference = math.inf

    for it in range(1, config.max_iter + 1):
        gm = op.solve_consensus((z1 - u1) + (z2 - u2) + op.adjoint(z3 - u3))
        bg = op.apply(gm)

        h1 = gm if alpha == 1.0 else alpha * gm + (1.0 - alpha) * z1
        h2 = gm if alpha == 1.0 else alpha * gm + (1.0 - alpha) * z2
        h3 = bg if alpha == 1.0 else alpha * bg + (1.0 - alpha) * z3

        z1_old, z2_old, z3_old = z1, z2, z3
        z1 = prox_row_l12(h1 + u1, 1.0 / rho)
        z2 = prox_nuclear(h2 + u2, eps / rho)
        v = h3 + u3
        z3 = x - project_residual_ball(x - v, problem)

        u1 = u1 + (h1 - z1)
        u2 = u2 + (h2 - z2)
        u3 = u3 + (h3 - z3)

        g_norm = np.linalg.norm(gm)
        p1 = np.linalg.norm(z1 - gm)
        p2 = np.linalg.norm(z2 - gm)
        p3 = np.linalg.norm(z3 - bg)
        pr = math.sqrt(p1 * p1 + p2 * p2 + p3 * p3)
        dvec = (z1 - z1_old) + (z2 - z2_old) + op.adjoint(z3 - z3_old)
        dr = rho * np.linalg.norm(dvec)

        bg_norm = np.linalg.norm(bg)
        primal_ok = (
            p1 <= tol_p * (1.0 + g_norm)
            and p2 <= tol_p * (1.0 + g_norm)
            and p3 <= tol_p * (1.0 + bg_norm)
        )
        if primal_ok:
            dual_scale = rho * np.linalg.norm(u1 + u2 + op.adjoint(u3))
            if dr <= tol_d * (1.0 + dual_scale):
                gap = np.linalg.norm(x - bg) ** 2 - radius_sq
                if gap <= tol_p * (1.0 + radius_sq):
                    status = "converged"
                    iterations = it
                    break

        best_p3 = min(best_p3, p3)
        if it % 500 == 0:
            # A data-fit residual that has stopped shrinking but still sits
            # far above tolerance means the ball is unreachable.
            if (
                stall_reference < math.inf
                and best_p3 > 0.999 * stall_reference
                and best_p3 > 1e3 * tol_p * (1.0 + np.linalg.norm(x))
            ):
                status = "infeasible"
                iterations = it
                break
            stall_reference = best_p3

        if config.adapt_rho:
            if pr > 10.0 * dr and dr > 0:
                rho *= 2.0
                u1 *= 0.5
                u2 *= 0.5
                u3 *= 0.5
            elif dr > 10.0 * pr:
                rho *= 0.5
                u1 *= 2.0
                u2 *= 2.0
                u3 *= 2.0

    g_out = gm / scale
    residual_norm = np.linalg.norm(x - op.apply(gm))
    return RecoverySolution(
        g_matrix=g_out,
        objective=objective_value(g_out, eps),
        feasibility_gap=float(residual_norm**2 - radius_sq),
        iterations=iterations,
        status=status,
        primal_residual=float(pr),
        dual_residual=float(dr),
    )
