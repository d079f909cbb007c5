"""Command-line interface: geometry tools, DoF checks, estimation, benchmarks.

Exit codes: 0 success, 2 bad input (flags, files, JSON), 3 estimation
failure, 4 solver non-convergence under --strict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import bench as bench_mod
from .estimator import EstimationFailedError, EstimatorConfig, estimate_doas
from .geometry import (
    check_dof_bound,
    dof,
    make_mra,
    make_nested,
    make_ula,
    type1_split,
    type2_build,
    weight_function,
)
from .signal import (
    SCHEMA_VERSION,
    Grid,
    partition_to_dict,
    scenario_from_dict,
    synthesize,
)

SCENARIO_SCHEMA = {
    "schema_version": SCHEMA_VERSION,
    "description": "synthetic noncoherent-subarray dataset definition",
    "fields": {
        "schema_version": "int (optional, defaults to current)",
        "partition": {
            "kind": "'type1' | 'type2'",
            "subarrays": "list of integer position lists, pairwise disjoint",
        },
        "true_dirs": "list of distinct normalized directions in [-1, 1)",
        "grid": "{'step': 1/m} or {'points': [...]} (optional, default step 0.01)",
        "snr_db": "number, or 'inf' for noiseless",
        "snapshots": "int >= 1",
        "phase_model": "'per-snapshot' (default) | 'calibrated'",
        "seed": "int or list of ints (optional, default 0)",
    },
}

CAMPAIGN_SCHEMA = {
    "schema_version": 1,
    "description": "Monte Carlo sweep definition",
    "fields": {
        "schema_version": "int (optional)",
        "name": "string used for output file names",
        "geometries": "list of built-in names or {'name':..., 'partition': {...}}",
        "builtin_geometry_names": [name for name, _ in bench_mod.paper_geometries()],
        "sweep": {"variable": "'snr_db' | 'snapshots'", "values": "list"},
        "runs": "int >= 1 (default 50)",
        "true_dirs": "list of normalized directions (default [0,0.2,0.4,0.6,0.8])",
        "grid": "as in scenario (default step 0.01)",
        "snr_db": "base SNR when sweeping snapshots (default 10)",
        "snapshots": "base snapshot count when sweeping SNR (default 10)",
        "phase_model": "'per-snapshot' | 'calibrated'",
        "seed": "int (default 1)",
        "estimator": "optional overrides: c_const, m_const, epsilon, singular_side, weight_by_singular_value, peak_mode",
        "solver": "optional overrides: rho, max_iter, tol_primal, tol_dual, over_relaxation, adapt_rho",
    },
}


def _fail_input(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _load_json(path: str):
    with open(path) as fh:
        return json.load(fh)


def _geometry_from_args(args) -> object:
    if args.kind == "ula":
        return make_ula(args.n)
    if args.kind == "nested":
        n1 = args.n1 if args.n1 is not None else args.n
        n2 = args.n2 if args.n2 is not None else args.n
        if n1 is None or n2 is None:
            raise ValueError("nested arrays need --n1/--n2 (or --n for both)")
        return make_nested(n1, n2)
    if args.kind == "mra":
        return make_mra(args.n)
    raise ValueError(f"unknown kind {args.kind!r}")


def cmd_geometry(args) -> int:
    try:
        if args.kind != "nested" and args.n is None:
            raise ValueError(f"--kind {args.kind} needs --n")
        geo = _geometry_from_args(args)
        out: dict = {"positions": list(geo.positions)}
        target = geo
        if args.type2:
            part = type2_build(geo, args.l, args.mu)
            out["partition"] = partition_to_dict(part)
            target = part.full_array
        elif args.type1:
            sizes = [int(k) for k in args.type1.split(",")]
            part = type1_split(geo, sizes)
            out["partition"] = partition_to_dict(part)
        if args.weights:
            w = weight_function(target)
            out["weights"] = {
                "lags": [int(n) for n in w.lags],
                "counts": [int(c) for c in w.counts],
            }
            out["dof"] = dof(target)
    except ValueError as exc:
        return _fail_input(str(exc))
    print(json.dumps(out, indent=2))
    return 0


def _parse_int_list(text: str) -> list[int]:
    values = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if ":" in chunk:
            lo, hi = chunk.split(":")
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(int(chunk))
    return values


def cmd_verify_dof(args) -> int:
    try:
        geo = _geometry_from_args(args)
        l_values = _parse_int_list(args.l_values)
        mu_values = (
            _parse_int_list(args.mu_values)
            if args.mu_values
            else list(range(1, 2 * geo.aperture + 3))
        )
    except ValueError as exc:
        return _fail_input(str(exc))
    all_ok = True
    print("l,mu,dof,bound_kind,bound_value,shift_identity,satisfied")
    for l in l_values:
        for mu in mu_values:
            report = check_dof_bound(geo, l, mu)
            all_ok = all_ok and report.satisfied
            print(
                f"{l},{mu},{report.bruteforce_dof},{report.bound.kind},"
                f"{report.bound.value},{report.shift_identity_ok},{report.satisfied}"
            )
    print(f"all satisfied: {all_ok}")
    return 0 if all_ok else 1


def cmd_estimate(args) -> int:
    if args.schema:
        print(json.dumps(SCENARIO_SCHEMA, indent=2))
        return 0
    if args.scenario is None:
        return _fail_input("missing scenario JSON path (or use --schema)")
    try:
        doc = _load_json(args.scenario)
        scenario = scenario_from_dict(doc)
    except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        return _fail_input(f"cannot load scenario: {exc}")
    if args.t is not None:
        scenario = replace(scenario, snapshots=args.t)
    data = synthesize(scenario)
    if args.save_data:
        data.save_debug(args.save_data)
    config = replace(EstimatorConfig(), n_jobs=args.jobs)
    try:
        est = estimate_doas(
            data,
            scenario.grid,
            scenario.partition,
            scenario.n_sources,
            config,
        )
    except EstimationFailedError as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return 3
    result = {
        "schema_version": SCHEMA_VERSION,
        "estimated_dirs": list(est.estimated_dirs),
        "support": list(est.support),
        "solver_statuses": list(est.solver_statuses),
        "solver_iterations": list(est.solver_iterations),
    }
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    if args.spectrum_csv:
        with open(args.spectrum_csv, "w") as fh:
            fh.write("theta,power\n")
            for theta, p in zip(scenario.grid.points, est.pseudo_spectrum):
                fh.write(f"{theta:.12g},{p:.12g}\n")
    if args.strict and any(s != "converged" for s in est.solver_statuses):
        print("error: solver did not converge on every snapshot", file=sys.stderr)
        return 4
    return 0


_PLOT_SCRIPT = """\
#!/usr/bin/env python3
\"\"\"Plot campaign CSVs produced by `noncodoa bench` (RMSE curves).\"\"\"
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

for path in sys.argv[1:]:
    curves = defaultdict(list)
    with open(path) as fh:
        for row in csv.DictReader(fh):
            curves[row["name"]].append((float(row["sweep_value"]), float(row["rmse"])))
    plt.figure()
    for name, pts in curves.items():
        pts.sort()
        plt.semilogy([x for x, _ in pts], [y for _, y in pts], marker="o", label=name)
    sweep = row["sweep_var"]
    plt.xlabel("SNR (dB)" if sweep == "snr_db" else "snapshots")
    plt.ylabel("RMSE (normalized direction)")
    plt.legend()
    plt.grid(True, which="both", alpha=0.3)
    plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
print("wrote one PNG per input CSV")
"""


def cmd_bench(args) -> int:
    if args.schema:
        print(json.dumps(CAMPAIGN_SCHEMA, indent=2))
        return 0
    try:
        if args.paper:
            campaigns = list(bench_mod.paper_campaigns(runs=args.runs, seed=args.seed))
        elif args.campaign:
            doc = _load_json(args.campaign)
            docs = doc["campaigns"] if isinstance(doc, dict) and "campaigns" in doc else [doc]
            campaigns = [bench_mod.campaign_from_dict(d) for d in docs]
        else:
            return _fail_input("give a campaign JSON path, or --paper (or --schema)")
    except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
        return _fail_input(f"cannot load campaign: {exc}")

    os.makedirs(args.out, exist_ok=True)
    if args.beampattern:
        grid = Grid.uniform(0.001)
        with open(os.path.join(args.out, "beampattern.csv"), "w") as fh:
            fh.write("name,theta,power\n")
            for name, part in bench_mod.paper_geometries():
                pattern = bench_mod.beampattern(part.full_array, grid)
                for theta, p in zip(grid.points, pattern):
                    fh.write(f"{name},{theta:.12g},{p:.12g}\n")
        print(f"wrote {os.path.join(args.out, 'beampattern.csv')}")

    for campaign in campaigns:
        result = bench_mod.run_campaign(campaign, n_workers=args.workers)
        csv_path = os.path.join(args.out, f"{campaign.name}.csv")
        bench_mod.write_results_csv(result, csv_path)
        bench_mod.write_timing_csv(
            result, os.path.join(args.out, f"{campaign.name}_timing.csv")
        )
        print(f"wrote {csv_path}")
        for row in result.rows:
            print(
                f"  {row.name} {row.sweep_var}={row.sweep_value:g} "
                f"rmse={row.rmse:.6g} failures={row.failures}"
            )
    if args.plot_script:
        script_path = os.path.join(args.out, "plot_results.py")
        with open(script_path, "w") as fh:
            fh.write(_PLOT_SCRIPT)
        print(f"wrote {script_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noncodoa",
        description="Noncoherent DOA estimation with sparse subarrays",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_geo = sub.add_parser("geometry", help="construct and inspect array layouts")
    p_geo.add_argument("--kind", choices=["ula", "nested", "mra"], required=True)
    p_geo.add_argument("--n", type=int, help="sensor count (table size for mra)")
    p_geo.add_argument("--n1", type=int, help="nested inner stage size")
    p_geo.add_argument("--n2", type=int, help="nested outer stage size")
    p_geo.add_argument("--type1", metavar="SIZES", help="split into segments, e.g. 6,6")
    p_geo.add_argument("--type2", action="store_true", help="tile translated copies")
    p_geo.add_argument("--l", type=int, default=2, help="number of copies for --type2")
    p_geo.add_argument("--mu", type=int, default=1, help="gap between copies for --type2")
    p_geo.add_argument("--weights", action="store_true", help="include weight function and DoF")
    p_geo.set_defaults(func=cmd_geometry)

    p_dof = sub.add_parser("verify-dof", help="check the translated-union DoF bound")
    p_dof.add_argument("--kind", choices=["ula", "nested", "mra"], required=True)
    p_dof.add_argument("--n", type=int)
    p_dof.add_argument("--n1", type=int)
    p_dof.add_argument("--n2", type=int)
    p_dof.add_argument("--l-values", default="2,3", help="copy counts, e.g. 2,3 or 2:4")
    p_dof.add_argument("--mu-values", default=None, help="gaps, e.g. 1:20 (default 1..2*aperture+2)")
    p_dof.set_defaults(func=cmd_verify_dof)

    p_est = sub.add_parser("estimate", help="synthesize a scenario and estimate DOAs")
    p_est.add_argument("scenario", nargs="?", help="scenario JSON path")
    p_est.add_argument("--out", help="write the result JSON here as well")
    p_est.add_argument("--spectrum-csv", help="write the pseudo-spectrum as CSV")
    p_est.add_argument("--save-data", metavar="PREFIX", help="dump snapshot data to PREFIX.npz/.csv")
    p_est.add_argument("--t", type=int, help="override the snapshot count (1 = single-snapshot mode)")
    p_est.add_argument("--jobs", type=int, default=1, help="parallel per-snapshot solves")
    p_est.add_argument("--strict", action="store_true", help="exit 4 if any solve fails to converge")
    p_est.add_argument("--schema", action="store_true", help="print the scenario JSON schema")
    p_est.set_defaults(func=cmd_estimate)

    p_bench = sub.add_parser("bench", help="run Monte Carlo campaigns, write CSVs")
    p_bench.add_argument("campaign", nargs="?", help="campaign JSON (single object or {'campaigns': [...]})")
    p_bench.add_argument("--paper", action="store_true", help="run the built-in SNR and snapshot sweeps")
    p_bench.add_argument("--runs", type=int, default=50, help="runs per cell with --paper")
    p_bench.add_argument("--seed", type=int, default=1, help="campaign seed with --paper")
    p_bench.add_argument("--out", default=".", help="output directory")
    p_bench.add_argument("--workers", type=int, default=None,
                         help=f"worker processes (default: {bench_mod.WORKERS_ENV_VAR} or CPU count)")
    p_bench.add_argument("--beampattern", action="store_true", help="also write beampattern.csv")
    p_bench.add_argument("--plot-script", action="store_true", help="emit a matplotlib plot script")
    p_bench.add_argument("--schema", action="store_true", help="print the campaign JSON schema")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
