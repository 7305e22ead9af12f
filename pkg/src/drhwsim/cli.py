"""Command-line front end: generate, analyze, simulate, render traces.

All times on the interfaces are milliseconds as decimal numbers; integer
ranges are accepted as ``a..b``.  Every command is deterministic given its
flags; re-running a command with the same flags reproduces its output files
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .design_time import build_store, load_store, save_store
from .errors import DrhwError
from .model import load_workload, save_workload
from .runtime import MODES
from .sim import (SimConfig, metrics_to_dict, read_trace, run_simulation,
                  write_trace, REPORT_SCHEMA)
from .workloads import PRESETS, GenParams, gen_workload


def _parse_range(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def _parse_modes(text: str) -> tuple[str, ...]:
    if text == "all":
        return MODES
    modes = tuple(m.strip() for m in text.split(",") if m.strip())
    unknown = set(modes) - set(MODES)
    if unknown:
        raise DrhwError(
            f"unknown modes {sorted(unknown)}; choose from {', '.join(MODES)}")
    return modes


def cmd_gen(args) -> int:
    if args.preset:
        workload = PRESETS[args.preset](args.seed)
    else:
        n_lo, *rest = _parse_range(args.subtasks)
        n_hi = rest[-1] if rest else n_lo
        params = GenParams(
            n_min=n_lo, n_max=n_hi,
            exec_low=args.exec_low, exec_high=args.exec_high,
            edge_density=args.density, drhw_fraction=args.drhw_frac,
            slots=args.slots, scenarios=args.scenarios)
        workload = gen_workload(params, args.tasks, args.seed,
                                default_latency=args.latency_ms)
    save_workload(workload, args.out)
    n_scn = sum(len(t.scenarios) for t in workload.tasks)
    print(f"wrote {args.out}: {len(workload.tasks)} tasks, {n_scn} scenarios")
    return 0


def cmd_analyze(args) -> int:
    workload = load_workload(args.workload)
    store = build_store(workload, args.latency_ms)
    save_store(store, args.out)
    print(f"{'task':<16}{'scenario':<10}{'|DRHW|':>7}{'|CS|':>6}"
          f"{'penalty before':>16}{'penalty after':>15}")
    for (tid, sid), e in sorted(store.entries.items()):
        print(f"{tid:<16}{sid:<10}{len(e.drhw):>7}{len(e.critical):>6}"
              f"{e.penalty_noreuse:>16.3f}{0.0:>15.3f}")
    frac = store.cs_fraction
    print(f"critical subtask fraction: {100.0 * frac:.1f}% "
          f"(qualitative reproduction; the published graphs are not available)")
    print(f"wrote {args.out}")
    return 0


def cmd_simulate(args) -> int:
    workload = load_workload(args.workload)
    store = load_store(args.store, expect_latency=args.latency_ms)
    modes = _parse_modes(args.modes)
    tiles_list = _parse_range(args.tiles)
    cells = []
    trace_all = []
    wall = {}
    for tiles in tiles_list:
        config = SimConfig(tiles=tiles, latency=args.latency_ms,
                           iterations=args.iterations, seed=args.seed,
                           modes=modes, trace=args.trace is not None,
                           all_tasks=args.all_tasks)
        results, trace = run_simulation(workload, store, config)
        baseline = results.get("NoPrefetch")
        for mode in modes:
            cell = {"tiles": tiles}
            cell.update(metrics_to_dict(results[mode], baseline))
            cells.append(cell)
            wall[(mode, tiles)] = results[mode].sched_wall_s
        trace_all.extend(trace)
    manifest = {
        "tool": "drhwsim",
        "version": __version__,
        "workload": args.workload,
        "store": args.store,
        "tiles": tiles_list,
        "latency_ms": args.latency_ms,
        "iterations": args.iterations,
        "seed": args.seed,
        "modes": list(modes),
        "all_tasks": args.all_tasks,
        "trace": args.trace,
    }
    report = {"schema": REPORT_SCHEMA, "manifest": manifest, "cells": cells}
    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
    if args.trace:
        write_trace(trace_all, args.trace)
    print(f"{'mode':<22}{'tiles':>6}{'overhead%':>11}{'reuse%':>8}"
          f"{'hidden%':>9}{'sched wall s':>14}")
    for cell in cells:
        hid = cell["hidden_pct_vs_noprefetch"]
        print(f"{cell['mode']:<22}{cell['tiles']:>6}"
              f"{cell['overhead_pct']:>11.3f}{cell['reuse_pct']:>8.1f}"
              f"{(f'{hid:.1f}' if hid is not None else '-'):>9}"
              f"{wall[(cell['mode'], cell['tiles'])]:>14.4f}")
    if args.out:
        print(f"wrote {args.out}")
    return 0


def cmd_trace(args) -> int:
    rows = read_trace(args.trace)
    if args.format == "table":
        print(f"{'iteration':>9} {'task':<14}{'scenario':<10}{'resource':<10}"
              f"{'kind':<14}{'subtask':>7} {'start':>10} {'end':>10}")
        for r in rows:
            print(f"{r['iteration']:>9} {r['task']:<14}{r['scenario']:<10}"
                  f"{r['resource']:<10}{r['kind']:<14}{r['subtask']:>7} "
                  f"{r['start']:>10.3f} {r['end']:>10.3f}")
        return 0
    if args.format == "gantt":
        _render_gantt(rows, width=args.width)
        return 0
    raise DrhwError(f"unknown trace format {args.format!r}")


def _render_gantt(rows, width: int = 100) -> None:
    if not rows:
        print("(empty trace)")
        return
    t_lo = min(r["start"] for r in rows)
    t_hi = max(r["end"] for r in rows)
    span = max(t_hi - t_lo, 1e-9)
    resources = sorted({r["resource"] for r in rows})
    glyph = {"exec": "#", "load": "=", "init_load": "+",
             "prefetch_load": "*", "cancel": "x"}
    print(f"time {t_lo:.3f}..{t_hi:.3f} ms  "
          f"(#=exec ==load +=init *=prefetch x=cancelled)")
    for res in resources:
        line = [" "] * width
        for r in rows:
            if r["resource"] != res:
                continue
            a = int((r["start"] - t_lo) / span * (width - 1))
            b = max(a + 1, int((r["end"] - t_lo) / span * (width - 1)))
            for i in range(a, min(b, width)):
                line[i] = glyph.get(r["kind"], "?")
        print(f"{res:<10}|{''.join(line)}|")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drhwsim", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a workload file")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--tasks", type=int, default=4)
    g.add_argument("--subtasks", default="4..10",
                   help="subtask count or range a..b (random workloads)")
    g.add_argument("--exec-low", type=float, default=1.0)
    g.add_argument("--exec-high", type=float, default=10.0)
    g.add_argument("--density", type=float, default=0.3)
    g.add_argument("--drhw-frac", type=float, default=1.0)
    g.add_argument("--slots", type=int, default=3)
    g.add_argument("--scenarios", type=int, default=1)
    g.add_argument("--latency-ms", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze",
                       help="extract critical subtasks, write the schedule store")
    a.add_argument("workload")
    a.add_argument("--latency-ms", type=float, default=4.0)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="run the discrete-event simulation")
    s.add_argument("workload")
    s.add_argument("store")
    s.add_argument("--tiles", default="4", help="tile count or range a..b")
    s.add_argument("--latency-ms", type=float, default=4.0)
    s.add_argument("--iterations", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--modes", default="all",
                   help="comma-separated mode list or 'all'")
    s.add_argument("--all-tasks", action="store_true",
                   help="run every task each iteration instead of a random subset")
    s.add_argument("--trace", help="write a trace file")
    s.add_argument("--out", help="write the JSON report")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("trace", help="render a trace file")
    t.add_argument("trace")
    t.add_argument("--format", choices=("gantt", "table"), default="gantt")
    t.add_argument("--width", type=int, default=100)
    t.set_defaults(func=cmd_trace)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DrhwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
