"""Command line front end: run scenarios or presets, write CSV/JSON results.

Exit codes:
    0  run(s) completed, constraint held, declared targets met
    2  could not parse inputs (bad JSON, unknown preset)
    3  scenario failed schema or parameter validation
    4  numeric abort during integration
    5  run completed but violated the constraint or missed its targets
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .engine import (
    SimulationAbort,
    ValidationFailure,
    run_scenario,
    write_summary_json,
    write_trajectory_csv,
)
from .scenario import ScenarioError, list_presets, load_preset, load_scenario

_EXIT_OK = 0
_EXIT_PARSE = 2
_EXIT_VALIDATION = 3
_EXIT_NUMERIC = 4
_EXIT_PERFORMANCE = 5


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slewguard",
        description="Attitude pointing simulation with keep-out cone avoidance")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled preset")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", metavar="PATH",
                     help="path to a scenario JSON file")
    src.add_argument("--preset", metavar="NAME",
                     help="name of a bundled preset (see list-presets)")
    src.add_argument("--all-presets", action="store_true",
                     help="run every bundled preset")
    run.add_argument("--out", metavar="DIR", default="runs",
                     help="output directory (default: runs); each run writes "
                          "into DIR/<scenario-name>/")
    run.add_argument("--compare", action="store_true",
                     help="also run the potential-field-only baseline and "
                          "write comparison.json")
    run.add_argument("--dt", type=float, default=None,
                     help="override integration step [s]")
    run.add_argument("--duration", type=float, default=None,
                     help="override simulated duration [s]")
    run.add_argument("--no-disturbance", action="store_true",
                     help="disable the environmental disturbance torque")
    run.add_argument("--seed", type=int, default=None,
                     help="reserved for future stochastic features; runs are "
                          "deterministic and ignore it")

    sub.add_parser("list-presets", help="list bundled presets")
    return parser


def _apply_overrides(scenario, args):
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.duration is not None:
        changes["duration"] = args.duration
    if args.no_disturbance:
        changes["disturbance_enabled"] = False
    if changes:
        scenario = scenario.with_sim(**changes)
    return scenario


def _fmt(value, spec=".4g"):
    return "n/a" if value is None else format(value, spec)


def _run_one(scenario, args, out_root: Path) -> int:
    """Run one scenario (plus baseline when comparing); returns an exit code."""
    out_dir = out_root / scenario.name
    out_dir.mkdir(parents=True, exist_ok=True)

    result = run_scenario(scenario)
    write_trajectory_csv(result.records, out_dir / "trajectory.csv")
    write_summary_json(result.summary, out_dir / "summary.json")
    s = result.summary
    ok = s["constraint_satisfied"] and s["targets_met"] is not False
    clear = min(s["min_clearance_deg"]) if s["min_clearance_deg"] else None
    print(f"{scenario.name}: clearance {_fmt(clear)} deg, "
          f"settle(1 deg) {_fmt(s['settling_time_1deg_s'])} s, "
          f"terminal {_fmt(s['terminal_error_deg'])} deg, "
          f"wall {s['wall_clock_s']:.2f} s "
          f"[{'ok' if ok else 'MISS'}]")

    if args.compare:
        bench = scenario.with_sim(controller_mode="benchmark_apf")
        bench_result = run_scenario(bench)
        write_trajectory_csv(bench_result.records,
                             out_dir / "trajectory_benchmark.csv")
        write_summary_json(bench_result.summary,
                           out_dir / "summary_benchmark.json")
        b = bench_result.summary
        comparison = {
            "scenario": scenario.name,
            "proposed": s,
            "benchmark_apf": b,
            "proposed_terminal_error_deg": s["terminal_error_deg"],
            "benchmark_terminal_error_deg": b["terminal_error_deg"],
            "proposed_not_worse": (
                s["terminal_error_deg"] is not None
                and b["terminal_error_deg"] is not None
                and s["terminal_error_deg"] <= b["terminal_error_deg"]),
        }
        write_summary_json(comparison, out_dir / "comparison.json")
        print(f"{scenario.name} baseline: terminal "
              f"{_fmt(b['terminal_error_deg'])} deg vs proposed "
              f"{_fmt(s['terminal_error_deg'])} deg")

    return _EXIT_OK if ok else _EXIT_PERFORMANCE


def _cmd_run(args) -> int:
    out_root = Path(args.out)

    try:
        if args.all_presets:
            scenarios = [load_preset(name) for name, _ in list_presets()]
        elif args.preset is not None:
            scenarios = [load_preset(args.preset)]
        else:
            scenarios = [load_scenario(args.scenario)]
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return _EXIT_PARSE
    except ScenarioError as exc:
        for line in exc.errors:
            print(f"error: {line}", file=sys.stderr)
        return _EXIT_PARSE if exc.kind == "parse" else _EXIT_VALIDATION

    worst = _EXIT_OK
    for scenario in scenarios:
        scenario = _apply_overrides(scenario, args)
        try:
            code = _run_one(scenario, args, out_root)
        except ValidationFailure as exc:
            print(f"error: {scenario.name}:", file=sys.stderr)
            print(exc.report.describe(), file=sys.stderr)
            return _EXIT_VALIDATION
        except SimulationAbort as exc:
            print(f"error: {scenario.name}: {exc}", file=sys.stderr)
            return _EXIT_NUMERIC
        worst = max(worst, code)
    return worst


def _cmd_list_presets() -> int:
    for name, desc in list_presets():
        print(f"{name:18s} {desc}")
    return _EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-presets":
        return _cmd_list_presets()
    return _cmd_run(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
