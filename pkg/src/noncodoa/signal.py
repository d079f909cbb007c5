"""Steering manifolds, subarray phase screens and snapshot synthesis.

Directions are normalized: theta = sin(angle) in [-1, 1) under
half-wavelength minimum spacing, so a sensor at integer position s
responds to direction theta with exp(1j * pi * s * theta).

Noncoherent subarrays apply an unknown unit-modulus factor exp(-1j*phi_l)
to every sensor of subarray l; in the per-snapshot phase model the phases
are redrawn for every snapshot, in the calibrated model they are drawn
once and held fixed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence, Union

import numpy as np

from .geometry import ArrayGeometry, SubarrayPartition

__all__ = [
    "Grid",
    "Scenario",
    "SnapshotData",
    "manifold",
    "gamma",
    "gamma_diag",
    "synthesize",
    "scenario_to_dict",
    "scenario_from_dict",
    "partition_to_dict",
    "partition_from_dict",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

PhaseModel = Literal["per-snapshot", "calibrated"]


@dataclass(frozen=True, eq=False)
class Grid:
    """Search grid of normalized directions, strictly increasing in [-1, 1)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid must be a non-empty 1-D array")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if pts[0] < -1.0 or pts[-1] >= 1.0:
            raise ValueError("grid points must lie in [-1, 1)")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, step: float = 0.01) -> "Grid":
        """Uniform grid over [-1, 1) with the given step (1/step integral)."""
        m = round(1.0 / step)
        if m < 1 or abs(m * step - 1.0) > 1e-12:
            raise ValueError("step must be the reciprocal of a positive integer")
        return cls(np.arange(-m, m) / m)

    @property
    def g(self) -> int:
        return int(self.points.size)

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)


def default_grid() -> Grid:
    """200-point grid with step 0.01, resolving 0.2-spaced sources with margin."""
    return Grid.uniform(0.01)


def manifold(s: ArrayGeometry, grid: Union[Grid, Sequence[float], np.ndarray]) -> np.ndarray:
    """Steering matrix of an array over a set of directions.

    Entry (k, m) is exp(1j * pi * positions[k] * dirs[m]); a sensor at
    position 0 contributes an all-ones row. The row-stack of subarray
    manifolds (absolute positions) equals the full-array manifold up to
    the row permutation induced by the partition order.

    Parameters
    ----------
    s : ArrayGeometry
        Sensor positions (absolute, not re-normalized).
    grid : Grid or array_like
        Directions to evaluate, either a search grid or arbitrary
        normalized directions (e.g. the true DOAs).

    Returns
    -------
    np.ndarray
        Complex matrix of shape (n_sensors, n_directions).
    """
    dirs = grid.points if isinstance(grid, Grid) else np.asarray(grid, dtype=np.float64)
    return np.exp(1j * np.pi * np.outer(s.as_array(), dirs))


def gamma_diag(phases: Sequence[float], partition: SubarrayPartition) -> np.ndarray:
    """Diagonal of the subarray phase-screen matrix, as a length-N vector.

    Subarray l contributes conj(exp(1j*phi_l)) repeated over its sensors.
    """
    phases = np.asarray(phases, dtype=np.float64)
    if phases.shape != (partition.n_subarrays,):
        raise ValueError(
            f"expected {partition.n_subarrays} phases, got shape {phases.shape}"
        )
    return np.repeat(np.exp(-1j * phases), partition.sizes)


def gamma(phases: Sequence[float], partition: SubarrayPartition) -> np.ndarray:
    """Block-diagonal N x N phase-screen matrix (unitary, diagonal)."""
    return np.diag(gamma_diag(phases, partition))


@dataclass(frozen=True)
class Scenario:
    """Complete description of a synthetic noncoherent-subarray dataset.

    ``snr_db`` is per-element SNR for a single unit-power source: the noise
    variance per element is 10**(-snr_db/10), with each source drawn at
    unit power. ``math.inf`` disables noise. ``seed`` (an int or tuple of
    ints) fully determines the dataset.
    """

    partition: SubarrayPartition
    true_dirs: tuple[float, ...]
    grid: Grid
    snr_db: float
    snapshots: int
    phase_model: PhaseModel = "per-snapshot"
    seed: Union[int, tuple[int, ...]] = 0

    def __post_init__(self):
        dirs = tuple(float(d) for d in self.true_dirs)
        if len(dirs) == 0:
            raise ValueError("need at least one source direction")
        if len(set(dirs)) != len(dirs):
            raise ValueError("source directions must be distinct")
        if any(d < -1.0 or d >= 1.0 for d in dirs):
            raise ValueError("source directions must lie in [-1, 1)")
        if len(dirs) >= self.grid.g:
            raise ValueError("need fewer sources than grid points")
        if self.snapshots < 1:
            raise ValueError("need at least one snapshot")
        if self.phase_model not in ("per-snapshot", "calibrated"):
            raise ValueError(f"unknown phase model {self.phase_model!r}")
        object.__setattr__(self, "true_dirs", dirs)
        if not isinstance(self.seed, int):
            object.__setattr__(self, "seed", tuple(int(k) for k in self.seed))

    @property
    def n_sources(self) -> int:
        return len(self.true_dirs)

    @property
    def noise_var(self) -> float:
        if math.isinf(self.snr_db):
            return 0.0
        return 10.0 ** (-self.snr_db / 10.0)

    def with_seed(self, seed) -> "Scenario":
        return replace(self, seed=seed)


def _complex_normal(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    """Zero-mean circular complex Gaussian samples with the given variance."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class SnapshotData:
    """Synthesized observations plus the ground truth behind them.

    Column t of ``observations`` equals, exactly as stored,
    ``gamma_diag(phases[:, t]) * (A_true @ sources[:, t]) + noise[:, t]``
    where A_true is the full-array manifold at the true directions.
    """

    observations: np.ndarray  # (N, T)
    phases: np.ndarray  # (L, T), radians in [0, 2*pi)
    sources: np.ndarray  # (D, T)
    noise: np.ndarray  # (N, T)
    noise_var: float

    def __post_init__(self):
        for name in ("observations", "phases", "sources", "noise"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_snapshots(self) -> int:
        return int(self.observations.shape[1])

    def save_debug(self, prefix: str) -> None:
        """Write ``<prefix>.npz`` (full arrays) and ``<prefix>.csv`` (observations)."""
        np.savez(
            f"{prefix}.npz",
            observations=self.observations,
            phases=self.phases,
            sources=self.sources,
            noise=self.noise,
            noise_var=np.float64(self.noise_var),
        )
        with open(f"{prefix}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["element", "snapshot", "real", "imag"])
            n, t = self.observations.shape
            for i in range(n):
                for j in range(t):
                    z = self.observations[i, j]
                    writer.writerow([i, j, repr(z.real), repr(z.imag)])


def synthesize(scenario: Scenario) -> SnapshotData:
    """Draw one dataset from the scenario's generative model.

    Sources are unit-power circular complex Gaussian, uncorrelated across
    sources and snapshots; subarray phases are uniform on [0, 2*pi) (drawn
    once and held fixed under the calibrated model); noise is white
    circular complex Gaussian at the scenario's noise variance. Draw order
    is sources, phases, noise, so a seed pins the dataset bit-for-bit.
    """
    rng = np.random.default_rng(scenario.seed)
    part = scenario.partition
    d = scenario.n_sources
    t = scenario.snapshots
    n = part.n_sensors
    l = part.n_subarrays

    sources = _complex_normal(rng, (d, t), 1.0)
    if scenario.phase_model == "per-snapshot":
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(l, t))
    else:
        phases = np.broadcast_to(rng.uniform(0.0, 2.0 * np.pi, size=(l, 1)), (l, t)).copy()
    sigma2 = scenario.noise_var
    noise = _complex_normal(rng, (n, t), sigma2) if sigma2 > 0 else np.zeros((n, t), complex)

    a_true = manifold(part.full_array, scenario.true_dirs)
    screens = np.repeat(np.exp(-1j * phases), part.sizes, axis=0)  # (N, T)
    observations = screens * (a_true @ sources) + noise
    return SnapshotData(observations, phases, sources, noise, sigma2)


# --- JSON-friendly dict conversion (strict: unknown keys rejected) ---


def _check_keys(doc: dict, allowed: set[str], what: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown keys in {what}: {sorted(unknown)}")


def partition_to_dict(partition: SubarrayPartition) -> dict:
    return {
        "kind": partition.kind,
        "subarrays": [list(s.positions) for s in partition.subarrays],
    }


def partition_from_dict(doc: dict) -> SubarrayPartition:
    _check_keys(doc, {"kind", "subarrays"}, "partition")
    subs = tuple(ArrayGeometry(tuple(p)) for p in doc["subarrays"])
    return SubarrayPartition(subs, kind=doc["kind"])


def _grid_to_dict(grid: Grid) -> dict:
    pts = grid.points
    m = round(1.0 / (pts[1] - pts[0])) if pts.size > 1 else None
    if m and np.array_equal(pts, np.arange(-m, m) / m):
        return {"step": 1.0 / m}
    return {"points": [float(p) for p in pts]}


def _grid_from_dict(doc: dict) -> Grid:
    _check_keys(doc, {"step", "points"}, "grid")
    if "step" in doc and "points" in doc:
        raise ValueError("grid takes either 'step' or 'points', not both")
    if "step" in doc:
        return Grid.uniform(float(doc["step"]))
    if "points" in doc:
        return Grid(np.asarray(doc["points"], dtype=np.float64))
    raise ValueError("grid needs 'step' or 'points'")


def _snr_to_json(snr_db: float):
    return "inf" if math.isinf(snr_db) else float(snr_db)


def _snr_from_json(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        raise ValueError(f"bad snr_db value {value!r}")
    return float(value)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Scenario as a JSON-ready dict (schema_version included)."""
    seed = scenario.seed
    return {
        "schema_version": SCHEMA_VERSION,
        "partition": partition_to_dict(scenario.partition),
        "true_dirs": [float(d) for d in scenario.true_dirs],
        "grid": _grid_to_dict(scenario.grid),
        "snr_db": _snr_to_json(scenario.snr_db),
        "snapshots": scenario.snapshots,
        "phase_model": scenario.phase_model,
        "seed": list(seed) if isinstance(seed, tuple) else seed,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    """Parse a scenario dict, rejecting unknown keys."""
    allowed = {
        "schema_version",
        "partition",
        "true_dirs",
        "grid",
        "snr_db",
        "snapshots",
        "phase_model",
        "seed",
    }
    _check_keys(doc, allowed, "scenario")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version}")
    seed = doc.get("seed", 0)
    return Scenario(
        partition=partition_from_dict(doc["partition"]),
        true_dirs=tuple(doc["true_dirs"]),
        grid=_grid_from_dict(doc.get("grid", {"step": 0.01})),
        snr_db=_snr_from_json(doc["snr_db"]),
        snapshots=int(doc["snapshots"]),
        phase_model=doc.get("phase_model", "per-snapshot"),
        seed=tuple(seed) if isinstance(seed, list) else int(seed),
    )
