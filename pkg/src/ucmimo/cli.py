"""Command line front end: coverage, simulate, compare, validate.

Desk-scale defaults (20 users, 200 slots, 4 runs) keep all commands in the
minutes range; --paper-scale switches to the scenario's own embedded values
(50 users, 1000 slots, 10 runs in the default deployment). Explicit size
flags always win over either default.

Exit codes: 0 success, 2 usage, 3 scenario/validation error, 4 simulation
error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import __version__
from .engine import run_campaign
from .errors import ScenarioError, UcmimoError
from .mcs import default_mcs_table, load_mcs_table
from .metrics import (
    NETWORK_CENTRIC,
    REFERENCE_TARGETS,
    USER_CENTRIC,
    compare_modes,
    comparison_to_dict,
    coverage_gap_stats,
    coverage_map,
    emit_cdf_csv,
    emit_coverage_csv,
    emit_json,
    emit_quantiles_json,
    quantile,
    run_metrics_to_dict,
)
from .scenario import default_scenario, load_scenario

DESK_USERS = 20
DESK_SLOTS = 200
DESK_RUNS = 4

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SCENARIO = 3
EXIT_SIMULATION = 4
EXIT_IO = 5

OUTDIR_ENV = "UCMIMO_OUTDIR"


def _default_outdir() -> str:
    return os.environ.get(OUTDIR_ENV, "ucmimo_out")


def _add_common(p: argparse.ArgumentParser, sim: bool):
    p.add_argument("--scenario", metavar="PATH", help="scenario YAML; omit for the built-in default")
    p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    p.add_argument("--out", metavar="DIR", default=None,
                   help=f"output directory (default ${OUTDIR_ENV} or ./ucmimo_out)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    if sim:
        p.add_argument("--users", type=int, default=None, help="override user count")
        p.add_argument("--slots", type=int, default=None, help="override slots per run")
        p.add_argument("--runs", type=int, default=None, help="override run count")
        p.add_argument("--paper-scale", action="store_true",
                       help="use the scenario's embedded sizes instead of desk-scale defaults")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel run workers (default: available CPUs)")
        p.add_argument("--correlation-threshold", type=float, default=0.5,
                       help="spatial multiplexing gate (default 0.5)")
        p.add_argument("--cluster-size", type=int, default=None,
                       help="serving cluster size for cluster mode")
        p.add_argument("--mcs-table", metavar="PATH", default=None,
                       help="CSV with columns index,threshold_db,efficiency")
        p.add_argument("--perfect-csi", action="store_true",
                       help="schedule and adapt on current-slot channels (no estimation lag)")
        p.add_argument("--dump-schedule", action="store_true",
                       help="write per-run scheduler trace CSVs")
        p.add_argument("--dump-channels", action="store_true",
                       help="write per-run link gain CSVs (per coherence block)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucmimo",
        description="Downlink simulator comparing network-centric and user-centric massive MIMO",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="load and validate a scenario")
    p_val.add_argument("--scenario", metavar="PATH", default=None)

    p_cov = sub.add_parser("coverage", help="received-power map for both architectures")
    _add_common(p_cov, sim=False)
    p_cov.add_argument("--spacing", type=float, default=5.0, help="grid spacing in meters")

    p_sim = sub.add_parser("simulate", help="throughput campaign for one serving mode")
    _add_common(p_sim, sim=True)
    p_sim.add_argument("--mode", choices=["network_centric", "user_centric", "cluster"],
                       default="user_centric")

    p_cmp = sub.add_parser("compare", help="paired campaign, network-centric vs user-centric")
    _add_common(p_cmp, sim=True)
    return parser


def _load(args) -> tuple:
    if getattr(args, "scenario", None):
        return load_scenario(args.scenario), args.scenario
    return default_scenario(), "builtin-default"


def _effective_scenario(scenario, args):
    """Apply size overrides: explicit flags win, then desk or paper scale."""
    users = args.users if args.users is not None else (scenario.num_users if args.paper_scale else DESK_USERS)
    slots = args.slots if args.slots is not None else (scenario.num_slots if args.paper_scale else DESK_SLOTS)
    runs = args.runs if args.runs is not None else (scenario.num_runs if args.paper_scale else DESK_RUNS)
    out = dataclasses.replace(scenario, num_users=users, num_slots=slots, num_runs=runs)
    return out.validate()


def _config_doc(scenario, source, args, modes) -> dict:
    # The effective configuration; execution-only knobs (workers, output
    # directory) stay out so identical seeds give identical files.
    return {
        "scenario": scenario.name,
        "scenario_source": source,
        "seed": args.seed,
        "num_users": scenario.num_users,
        "num_slots": scenario.num_slots,
        "num_runs": scenario.num_runs,
        "modes": list(modes),
        "correlation_threshold": args.correlation_threshold,
        "cluster_size": args.cluster_size,
        "perfect_csi": bool(args.perfect_csi),
        "mcs_table": args.mcs_table or "builtin-default",
        "paper_scale": bool(args.paper_scale),
    }


def _write_traces(result, out_dir: str, schedule: bool, channels: bool):
    for mode, runs in result.runs.items():
        for m in runs:
            if schedule:
                path = os.path.join(out_dir, f"schedule_{mode}_run{m.run_index}.csv")
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write("slot,rb,user\n")
                    for slot, rb, user in m.schedule_trace:
                        fh.write(f"{slot},{rb},{user}\n")
            if channels:
                path = os.path.join(out_dir, f"link_gains_{mode}_run{m.run_index}.csv")
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write("slot,user,bs,gain_db\n")
                    for slot, user, bs, gain in m.link_gain_trace:
                        fh.write(f"{slot},{user},{bs},{gain:.4f}\n")


def _campaign(args, scenario, modes):
    table = load_mcs_table(args.mcs_table) if args.mcs_table else default_mcs_table()
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    return run_campaign(
        scenario,
        num_runs=scenario.num_runs,
        modes=modes,
        master_seed=args.seed,
        workers=workers,
        cluster_size=args.cluster_size,
        perfect_csi=args.perfect_csi,
        correlation_threshold=args.correlation_threshold,
        mcs_table=table,
        record_schedule=args.dump_schedule,
        record_link_gains=args.dump_channels,
        progress=None if args.quiet else True,
    )


def cmd_validate(args) -> int:
    scenario, source = _load(args)
    print(f"scenario '{scenario.name}' from {source}: "
          f"{scenario.num_base_stations} base stations, "
          f"{len(scenario.buildings)} buildings, "
          f"{scenario.band.num_resource_blocks} resource blocks: OK")
    return EXIT_OK


def cmd_coverage(args) -> int:
    scenario, source = _load(args)
    out_dir = args.out or _default_outdir()
    os.makedirs(out_dir, exist_ok=True)
    grid = coverage_map(scenario, args.spacing, seed=args.seed)
    stats = coverage_gap_stats(grid, scenario)
    for mode in (NETWORK_CENTRIC, USER_CENTRIC):
        emit_coverage_csv(grid, mode, os.path.join(out_dir, f"coverage_{mode}.csv"))
    emit_json(
        {
            "config": {
                "scenario": scenario.name,
                "scenario_source": source,
                "spacing_m": args.spacing,
                "seed": args.seed,
            },
            "coverage": stats,
        },
        os.path.join(out_dir, "summary.json"),
    )
    if not args.no_figures:
        from . import plotting

        vmin = float(min(grid.best_single_bs_dbm.min(), grid.user_centric_dbm.min()))
        vmax = float(max(grid.best_single_bs_dbm.max(), grid.user_centric_dbm.max()))
        for mode in (NETWORK_CENTRIC, USER_CENTRIC):
            plotting.render_coverage(
                grid, scenario, mode, os.path.join(out_dir, f"coverage_{mode}.png"),
                vmin=vmin, vmax=vmax,
            )
        plotting.render_coverage_gain(grid, scenario, os.path.join(out_dir, "coverage_gain.png"))
    print(
        f"coverage: {stats['num_points']} points, "
        f"user-centric >= best single BS at {100 * stats['dominance_fraction']:.1f}%, "
        f"p95 border gain {stats.get('gap_db_p95_equidistant', float('nan')):.2f} dB"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario, source = _load(args)
    scenario = _effective_scenario(scenario, args)
    mode = args.mode
    out_dir = args.out or _default_outdir()
    os.makedirs(out_dir, exist_ok=True)
    result = _campaign(args, scenario, [mode])
    samples = result.samples[mode]
    qs = {f"q{q}": quantile(samples, q / 100.0) for q in (10, 50, 90)}
    emit_cdf_csv(samples, os.path.join(out_dir, f"cdf_{mode}.csv"))
    for m in result.runs[mode]:
        emit_json(run_metrics_to_dict(m), os.path.join(out_dir, f"run_{mode}_{m.run_index}.json"))
    emit_json(
        {
            "config": _config_doc(scenario, source, args, [mode]),
            "quantiles_bps": qs,
            "samples_per_mode": int(len(samples)),
        },
        os.path.join(out_dir, "summary.json"),
    )
    _write_traces(result, out_dir, args.dump_schedule, args.dump_channels)
    if not args.no_figures:
        from . import plotting

        plotting.render_cdf({mode: samples}, os.path.join(out_dir, "cdf.png"))
    print(f"{mode}: q10 {qs['q10'] / 1e6:.3f} / q50 {qs['q50'] / 1e6:.3f} / "
          f"q90 {qs['q90'] / 1e6:.3f} Mbit/s over {len(samples)} samples")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario, source = _load(args)
    scenario = _effective_scenario(scenario, args)
    modes = [NETWORK_CENTRIC, USER_CENTRIC]
    out_dir = args.out or _default_outdir()
    os.makedirs(out_dir, exist_ok=True)
    result = _campaign(args, scenario, modes)
    cmp = compare_modes(result.samples)
    for mode in modes:
        emit_cdf_csv(result.samples[mode], os.path.join(out_dir, f"cdf_{mode}.csv"))
        for m in result.runs[mode]:
            emit_json(run_metrics_to_dict(m), os.path.join(out_dir, f"run_{mode}_{m.run_index}.json"))
    emit_quantiles_json(cmp, os.path.join(out_dir, "quantiles.json"))
    emit_json(
        {
            "config": _config_doc(scenario, source, args, modes),
            "comparison": comparison_to_dict(cmp),
            "reference_targets": REFERENCE_TARGETS,
        },
        os.path.join(out_dir, "summary.json"),
    )
    _write_traces(result, out_dir, args.dump_schedule, args.dump_channels)
    if not args.no_figures:
        from . import plotting

        plotting.render_cdf(result.samples, os.path.join(out_dir, "cdf.png"))
        plotting.render_quantile_bars(cmp, os.path.join(out_dir, "quantiles.png"))

    print(f"{'mode':<18} {'q10':>9} {'q50':>9} {'q90':>9} {'q90-q10':>9}  [Mbit/s]")
    for mode in modes:
        q = cmp.quantiles_bps[mode]
        print(f"{mode:<18} {q[10] / 1e6:>9.3f} {q[50] / 1e6:>9.3f} {q[90] / 1e6:>9.3f} "
              f"{cmp.spread_bps[mode] / 1e6:>9.3f}")
    r = cmp.ratios_uc_over_nc
    print(f"{'ratio uc/nc':<18} {r[10]:>9.3f} {r[50]:>9.3f} {r[90]:>9.3f} "
          f"{cmp.spread_ratio_uc_over_nc:>9.3f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "coverage": cmd_coverage,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except UcmimoError as e:
        print(f"simulation error: {e}", file=sys.stderr)
        return EXIT_SIMULATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
