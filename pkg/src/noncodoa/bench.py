"""Seeded Monte Carlo campaigns: RMSE versus SNR or snapshot count.

A campaign sweeps one variable over a set of named subarray layouts,
running R independent trials per (layout, value) cell. Every trial owns
an RNG stream keyed by (campaign seed, layout index, value index, run
index), so results do not depend on worker count or scheduling, and a
fixed seed reproduces the result CSV byte for byte. Wall-clock timings
are therefore kept out of the results CSV and written to a sidecar.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from typing import Literal, Optional, Sequence

import numpy as np

from .estimator import EstimationFailedError, EstimatorConfig, estimate_doas
from .geometry import (
    ArrayGeometry,
    SubarrayPartition,
    make_mra,
    make_nested,
    make_ula,
    type1_split,
    type2_build,
)
from .signal import (
    Grid,
    Scenario,
    _check_keys,
    _grid_from_dict,
    _grid_to_dict,
    _snr_from_json,
    _snr_to_json,
    default_grid,
    manifold,
    partition_from_dict,
    partition_to_dict,
    synthesize,
)
from .solver import SolverConfig

__all__ = [
    "Sweep",
    "Campaign",
    "CampaignRow",
    "CampaignResult",
    "rmse",
    "beampattern",
    "paper_geometries",
    "paper_campaigns",
    "run_campaign",
    "write_results_csv",
    "write_timing_csv",
    "campaign_to_dict",
    "campaign_from_dict",
]

WORKERS_ENV_VAR = "NONCODOA_WORKERS"

PAPER_TRUE_DIRS = (0.0, 0.2, 0.4, 0.6, 0.8)


def rmse(true_dirs: Sequence[float], estimates: Sequence[Sequence[float]]) -> float:
    """Root mean square error over R runs of D sorted direction estimates.

    sqrt(sum_i ||true - est_i||^2 / (D * R)), in normalized-direction
    units, pairing truth and estimates in ascending order.
    """
    truth = np.asarray(true_dirs, dtype=np.float64)
    est = np.asarray(estimates, dtype=np.float64)
    if est.ndim == 1:
        est = est[None, :]
    if est.ndim != 2 or est.shape[1] != truth.size:
        raise ValueError("each estimate must have one entry per true direction")
    d, r = truth.size, est.shape[0]
    return float(np.sqrt(np.sum((est - truth[None, :]) ** 2) / (d * r)))


def beampattern(s: ArrayGeometry, grid: Grid) -> np.ndarray:
    """Uniformly weighted power pattern |sum_k exp(1j*pi*s_k*theta)|^2 / N^2.

    Normalized so broadside (theta = 0) has value exactly 1.
    """
    a = manifold(s, grid)
    return np.abs(a.sum(axis=0)) ** 2 / s.n_sensors**2


def paper_geometries() -> tuple[tuple[str, SubarrayPartition], ...]:
    """The benchmark's five layouts: 12 sensors in two 6-sensor subarrays.

    The ULA and the type-1 variants split a 12-sensor array into halves;
    the type-2 variants join two 6-sensor layouts with a unit gap.
    """
    return (
        ("ula12", type1_split(make_ula(12), [6, 6])),
        ("type1_mra", type1_split(make_mra(12), [6, 6])),
        ("type2_mra", type2_build(make_mra(6), 2, 1)),
        ("type1_naq2", type1_split(make_nested(6, 6), [6, 6])),
        ("type2_naq2", type2_build(make_nested(3, 3), 2, 1)),
    )


@dataclass(frozen=True)
class Sweep:
    """One swept variable and its values (in sweep order)."""

    variable: Literal["snr_db", "snapshots"]
    values: tuple[float, ...]

    def __post_init__(self):
        if self.variable not in ("snr_db", "snapshots"):
            raise ValueError(f"unknown sweep variable {self.variable!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        object.__setattr__(self, "values", tuple(self.values))


@dataclass(frozen=True)
class Campaign:
    """A named Monte Carlo experiment, fully determined by its seed."""

    name: str
    geometries: tuple[tuple[str, SubarrayPartition], ...]
    sweep: Sweep
    runs: int = 50
    true_dirs: tuple[float, ...] = PAPER_TRUE_DIRS
    grid: Grid = field(default_factory=default_grid)
    snr_db: float = 10.0
    snapshots: int = 10
    phase_model: str = "per-snapshot"
    seed: int = 1
    estimator: EstimatorConfig = EstimatorConfig()
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("need at least one run")
        if len(self.geometries) == 0:
            raise ValueError("need at least one geometry")
        object.__setattr__(self, "geometries", tuple(self.geometries))
        object.__setattr__(self, "true_dirs", tuple(float(d) for d in self.true_dirs))

    def scenario_for(self, geo_idx: int, val_idx: int, run_idx: int) -> Scenario:
        """Scenario of one trial, with its derived per-run RNG stream."""
        _, partition = self.geometries[geo_idx]
        value = self.sweep.values[val_idx]
        snr = float(value) if self.sweep.variable == "snr_db" else self.snr_db
        t = int(value) if self.sweep.variable == "snapshots" else self.snapshots
        return Scenario(
            partition=partition,
            true_dirs=self.true_dirs,
            grid=self.grid,
            snr_db=snr,
            snapshots=t,
            phase_model=self.phase_model,
            seed=(self.seed, geo_idx, val_idx, run_idx),
        )


def paper_campaigns(
    runs: int = 50,
    seed: int = 1,
    grid: Optional[Grid] = None,
    solver: Optional[SolverConfig] = None,
) -> tuple[Campaign, Campaign]:
    """Desk-scale SNR and snapshot sweeps over the five benchmark layouts.

    Five sources at 0, 0.2, ..., 0.8; the SNR sweep uses 10 snapshots and
    the snapshot sweep runs at 10 dB. The default solver settings trade a
    little tolerance for speed, which is plenty for support selection.
    """
    grid = grid if grid is not None else default_grid()
    solver = solver if solver is not None else SolverConfig(
        max_iter=1500, tol_primal=1e-5, tol_dual=1e-5, over_relaxation=1.6
    )
    common = dict(
        geometries=paper_geometries(),
        runs=runs,
        true_dirs=PAPER_TRUE_DIRS,
        grid=grid,
        seed=seed,
        solver=solver,
    )
    snr = Campaign(
        name="rmse_vs_snr",
        sweep=Sweep("snr_db", (0.0, 10.0, 20.0)),
        snapshots=10,
        **common,
    )
    snaps = Campaign(
        name="rmse_vs_snapshots",
        sweep=Sweep("snapshots", (2, 4, 6, 8, 10)),
        snr_db=10.0,
        **common,
    )
    return snr, snaps


@dataclass(frozen=True)
class CampaignRow:
    """Aggregated result of one (geometry, sweep value) cell."""

    name: str
    sweep_var: str
    sweep_value: float
    rmse: float
    runs: int
    failures: int
    mean_iters: float
    wall_ms: float


@dataclass(frozen=True)
class CampaignResult:
    campaign_name: str
    rows: tuple[CampaignRow, ...]

    def row_for(self, name: str, sweep_value) -> CampaignRow:
        for row in self.rows:
            if row.name == name and row.sweep_value == sweep_value:
                return row
        raise KeyError(f"no row for ({name!r}, {sweep_value!r})")


_WORKER_CAMPAIGN: Optional[Campaign] = None


def _init_worker(campaign: Campaign) -> None:
    global _WORKER_CAMPAIGN
    _WORKER_CAMPAIGN = campaign


def _run_trial(task: tuple[int, int, int]):
    """One Monte Carlo trial; returns per-run error and solver diagnostics."""
    campaign = _WORKER_CAMPAIGN
    geo_idx, val_idx, run_idx = task
    _, partition = campaign.geometries[geo_idx]
    scenario = campaign.scenario_for(geo_idx, val_idx, run_idx)
    started = time.perf_counter()
    data = synthesize(scenario)
    err_sq = None
    iters: tuple[int, ...] = ()
    statuses: tuple[str, ...] = ()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            est = estimate_doas(
                data,
                campaign.grid,
                partition,
                len(campaign.true_dirs),
                campaign.estimator,
                campaign.solver,
            )
            err_sq = float(
                np.sum((np.asarray(est.estimated_dirs) - np.asarray(campaign.true_dirs)) ** 2)
            )
            iters = est.solver_iterations
            statuses = est.solver_statuses
        except EstimationFailedError:
            pass
    wall_ms = (time.perf_counter() - started) * 1e3
    return geo_idx, val_idx, run_idx, err_sq, iters, statuses, wall_ms


def _worker_count(n_workers: Optional[int]) -> int:
    if n_workers is not None:
        return max(1, int(n_workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_campaign(campaign: Campaign, n_workers: Optional[int] = None) -> CampaignResult:
    """Run every trial of a campaign and aggregate per-cell RMSE rows.

    Trials execute across a process pool (size from ``n_workers``, the
    NONCODOA_WORKERS environment variable, or the CPU count); reduction
    happens in deterministic (geometry, value, run) order, so the numbers
    never depend on parallelism. Trials whose estimation fails outright
    are excluded from the RMSE and counted in ``failures``.
    """
    tasks = [
        (geo_idx, val_idx, run_idx)
        for geo_idx in range(len(campaign.geometries))
        for val_idx in range(len(campaign.sweep.values))
        for run_idx in range(campaign.runs)
    ]
    workers = _worker_count(n_workers)
    if workers > 1 and len(tasks) > 1:
        ctx = get_context()
        with ctx.Pool(workers, initializer=_init_worker, initargs=(campaign,)) as pool:
            outcomes = pool.map(_run_trial, tasks, chunksize=1)
    else:
        _init_worker(campaign)
        outcomes = [_run_trial(t) for t in tasks]

    by_cell: dict[tuple[int, int], list] = {}
    for geo_idx, val_idx, run_idx, err_sq, iters, statuses, wall_ms in outcomes:
        by_cell.setdefault((geo_idx, val_idx), []).append(
            (run_idx, err_sq, iters, statuses, wall_ms)
        )

    d = len(campaign.true_dirs)
    rows = []
    for geo_idx, (name, _) in enumerate(campaign.geometries):
        for val_idx, value in enumerate(campaign.sweep.values):
            cell = sorted(by_cell[(geo_idx, val_idx)])
            errors = np.array([e for _, e, _, _, _ in cell if e is not None])
            failures = sum(1 for _, e, _, _, _ in cell if e is None)
            all_iters = np.array(
                [k for _, _, iters, _, _ in cell for k in iters], dtype=np.float64
            )
            cell_rmse = (
                float(np.sqrt(np.sum(errors) / (d * errors.size)))
                if errors.size
                else math.nan
            )
            rows.append(
                CampaignRow(
                    name=name,
                    sweep_var=campaign.sweep.variable,
                    sweep_value=float(value),
                    rmse=cell_rmse,
                    runs=len(cell),
                    failures=failures,
                    mean_iters=float(np.mean(all_iters)) if all_iters.size else math.nan,
                    wall_ms=float(sum(w for _, _, _, _, w in cell)),
                )
            )
    return CampaignResult(campaign_name=campaign.name, rows=tuple(rows))


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def write_results_csv(result: CampaignResult, path: str) -> None:
    """Write the deterministic result rows (no timing columns)."""
    lines = ["name,sweep_var,sweep_value,rmse,runs,failures,mean_iters"]
    for r in result.rows:
        lines.append(
            ",".join(
                [
                    r.name,
                    r.sweep_var,
                    _fmt(r.sweep_value),
                    _fmt(r.rmse),
                    str(r.runs),
                    str(r.failures),
                    _fmt(r.mean_iters),
                ]
            )
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def write_timing_csv(result: CampaignResult, path: str) -> None:
    """Write wall-clock timings (machine-dependent, hence a sidecar file)."""
    lines = ["name,sweep_var,sweep_value,wall_ms"]
    for r in result.rows:
        lines.append(
            ",".join([r.name, r.sweep_var, _fmt(r.sweep_value), format(r.wall_ms, ".3f")])
        )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# --- JSON-friendly dict conversion ---


def campaign_to_dict(campaign: Campaign) -> dict:
    doc = {
        "schema_version": 1,
        "name": campaign.name,
        "geometries": [
            {"name": name, "partition": partition_to_dict(p)}
            for name, p in campaign.geometries
        ],
        "sweep": {"variable": campaign.sweep.variable, "values": list(campaign.sweep.values)},
        "runs": campaign.runs,
        "true_dirs": list(campaign.true_dirs),
        "grid": _grid_to_dict(campaign.grid),
        "snr_db": _snr_to_json(campaign.snr_db),
        "snapshots": campaign.snapshots,
        "phase_model": campaign.phase_model,
        "seed": campaign.seed,
        "estimator": {
            "c_const": campaign.estimator.c_const,
            "m_const": campaign.estimator.m_const,
            "epsilon": campaign.estimator.epsilon,
            "singular_side": campaign.estimator.singular_side,
            "weight_by_singular_value": campaign.estimator.weight_by_singular_value,
            "peak_mode": campaign.estimator.peak_mode,
        },
        "solver": {
            "rho": campaign.solver.rho,
            "max_iter": campaign.solver.max_iter,
            "tol_primal": campaign.solver.tol_primal,
            "tol_dual": campaign.solver.tol_dual,
            "over_relaxation": campaign.solver.over_relaxation,
            "adapt_rho": campaign.solver.adapt_rho,
        },
    }
    return doc


def _geometry_entry_from_json(entry) -> tuple[str, SubarrayPartition]:
    if isinstance(entry, str):
        named = dict(paper_geometries())
        if entry not in named:
            raise ValueError(
                f"unknown geometry name {entry!r} (built-ins: {sorted(named)})"
            )
        return entry, named[entry]
    _check_keys(entry, {"name", "partition"}, "geometry entry")
    return entry["name"], partition_from_dict(entry["partition"])


def campaign_from_dict(doc: dict) -> Campaign:
    """Parse a campaign dict, rejecting unknown keys.

    Geometries may be built-in names (see ``paper_geometries``) or inline
    partition objects.
    """
    allowed = {
        "schema_version",
        "name",
        "geometries",
        "sweep",
        "runs",
        "true_dirs",
        "grid",
        "snr_db",
        "snapshots",
        "phase_model",
        "seed",
        "estimator",
        "solver",
    }
    _check_keys(doc, allowed, "campaign")
    version = doc.get("schema_version", 1)
    if version != 1:
        raise ValueError(f"unsupported schema_version {version}")
    sweep_doc = doc["sweep"]
    _check_keys(sweep_doc, {"variable", "values"}, "sweep")
    est_doc = dict(doc.get("estimator", {}))
    _check_keys(
        est_doc,
        {"c_const", "m_const", "epsilon", "singular_side", "weight_by_singular_value", "peak_mode"},
        "estimator",
    )
    sol_doc = dict(doc.get("solver", {}))
    _check_keys(
        sol_doc,
        {"rho", "max_iter", "tol_primal", "tol_dual", "over_relaxation", "adapt_rho"},
        "solver",
    )
    return Campaign(
        name=doc.get("name", "campaign"),
        geometries=tuple(_geometry_entry_from_json(e) for e in doc["geometries"]),
        sweep=Sweep(sweep_doc["variable"], tuple(sweep_doc["values"])),
        runs=int(doc.get("runs", 50)),
        true_dirs=tuple(doc.get("true_dirs", PAPER_TRUE_DIRS)),
        grid=_grid_from_dict(doc.get("grid", {"step": 0.01})),
        snr_db=_snr_from_json(doc.get("snr_db", 10.0)),
        snapshots=int(doc.get("snapshots", 10)),
        phase_model=doc.get("phase_model", "per-snapshot"),
        seed=int(doc.get("seed", 1)),
        estimator=replace(EstimatorConfig(), **est_doc),
        solver=replace(SolverConfig(), **sol_doc),
    )
