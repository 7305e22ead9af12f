"""Discrete-event experiment driver.

Each iteration draws a feasible scenario combination and a task sequence,
then replays that sequence through the run-time manager once per enabled
mode.  Residency persists across iterations per mode, so reuse carries from
one execution to the next; modes never share a residency map.

Randomness comes from NumPy's PCG64 generator; every iteration uses an
independent substream derived from ``SeedSequence(seed, spawn_key=(i,))``,
so draws are reproducible and independent of how many iterations run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design_time import ScheduleStore
from .errors import DrhwError, LatencyMismatch
from .model import TIME_TOL, Workload, scenario_map
from .runtime import MODES, ResidencyMap, execute_task_instance

TRACE_FIELDS = ("iteration", "task", "scenario", "resource", "kind",
                "subtask", "start", "end")
TRACE_SCHEMA = "drhw-trace/1"
REPORT_SCHEMA = "drhw-report/1"


@dataclass(frozen=True)
class SimConfig:
    tiles: int
    latency: float = 4.0
    iterations: int = 1000
    seed: int = 0
    modes: tuple[str, ...] = MODES
    trace: bool = False
    all_tasks: bool = False    # run every task each iteration vs random subset

    def __post_init__(self):
        if self.tiles < 1:
            raise DrhwError(f"tiles must be >= 1, got {self.tiles}")
        if self.iterations < 1:
            raise DrhwError(f"iterations must be >= 1, got {self.iterations}")
        if self.latency < 0:
            raise DrhwError(f"latency must be >= 0, got {self.latency}")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise DrhwError(f"unknown modes: {sorted(unknown)}")


@dataclass
class Metrics:
    mode: str
    ideal_total: float = 0.0
    actual_total: float = 0.0
    drhw_instances: int = 0
    reused_instances: int = 0
    loads_issued: int = 0
    loads_cancelled: int = 0
    cs_fraction: float = 0.0
    sched_wall_s: float = 0.0    # reported separately, never in the timeline

    @property
    def overhead_pct(self) -> float:
        return overhead_pct(self.ideal_total, self.actual_total)

    @property
    def reuse_pct(self) -> float:
        if self.drhw_instances == 0:
            return 0.0
        return 100.0 * self.reused_instances / self.drhw_instances


def overhead_pct(ideal: float, actual: float) -> float:
    """Percentage of the ideal execution time that was added."""
    if ideal <= 0:
        raise DrhwError(f"ideal time must be positive, got {ideal}")
    if actual < ideal - TIME_TOL:
        raise DrhwError(f"actual {actual} below ideal {ideal}")
    return 100.0 * (actual - ideal) / ideal


def hidden_pct(baseline_overhead: float, achieved_overhead: float) -> float:
    """Share of the baseline overhead that was eliminated."""
    if baseline_overhead <= 0:
        raise DrhwError(f"baseline overhead must be positive, got {baseline_overhead}")
    return 100.0 * (1.0 - achieved_overhead / baseline_overhead)


# ---------------------------------------------------------------------------
# Iteration selection
# ---------------------------------------------------------------------------

def _iteration_rng(seed: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(iteration,)))


def select_iteration(workload: Workload, seed: int, iteration: int,
                     all_tasks: bool = False) -> list[tuple[str, str]]:
    """Draw the (task, scenario) sequence executed in one iteration.

    A feasible scenario combination is chosen uniformly (the cartesian
    product when none are declared) along with a random task order; unless
    ``all_tasks`` is set, a uniformly sized non-empty prefix of that order
    runs.  Deterministic given (seed, iteration).
    """
    rng = _iteration_rng(seed, iteration)
    tasks = workload.tasks
    if not tasks:
        raise DrhwError("workload has no tasks")
    if workload.feasible_combinations is not None:
        combos = workload.feasible_combinations
        combo = dict(combos[int(rng.integers(len(combos)))])
    else:
        combo = {t.id: t.scenarios[int(rng.integers(len(t.scenarios)))].id
                 for t in tasks}
    perm = rng.permutation(len(tasks))
    count = len(tasks) if all_tasks else 1 + int(rng.integers(len(tasks)))
    return [(tasks[i].id, combo[tasks[i].id]) for i in perm[:count]]


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def run_simulation(workload: Workload, store: ScheduleStore, config: SimConfig):
    """Execute every enabled mode over the same iteration plan.

    Returns (metrics per mode, trace rows).  Identical seeds give identical
    results; the trace is empty unless the config enables it.
    """
    if abs(store.latency - config.latency) > TIME_TOL:
        raise LatencyMismatch(
            f"store was built for latency {store.latency} ms, "
            f"simulation requested {config.latency} ms")
    scenarios = scenario_map(workload)
    for key in scenarios:
        if key not in store.entries:
            raise LatencyMismatch(
                f"store has no entry for task {key[0]} scenario {key[1]}")

    plan: list[tuple[int, str, str]] = []
    for i in range(config.iterations):
        for tid, sid in select_iteration(workload, config.seed, i,
                                         config.all_tasks):
            plan.append((i, tid, sid))

    cs_fraction = store.cs_fraction
    results: dict[str, Metrics] = {}
    trace: list[tuple] = []
    for mode in config.modes:
        metrics = Metrics(mode=mode, cs_fraction=cs_fraction)
        residency = ResidencyMap(config.tiles)
        t0 = 0.0
        ctrl = 0.0
        pending: dict = {}
        cache: dict = {}
        wall = 0.0
        for n, (iteration, tid, sid) in enumerate(plan):
            scenario = scenarios[(tid, sid)]
            entry = store.entry(tid, sid)
            lookahead = None
            if n + 1 < len(plan):
                _, ntid, nsid = plan[n + 1]
                lookahead = (ntid, store.entry(ntid, nsid), scenarios[(ntid, nsid)])
            tic = time.perf_counter()
            res = execute_task_instance(
                scenario, entry, residency, mode, config.latency,
                t0=t0, ctrl_free=ctrl, pending=pending, lookahead=lookahead,
                sched_cache=cache)
            wall += time.perf_counter() - tic
            metrics.ideal_total += res.ideal
            metrics.actual_total += res.span
            metrics.drhw_instances += len(entry.drhw)
            metrics.reused_instances += len(res.decision.reused)
            metrics.loads_issued += len(res.load_events) + len(res.decision.prefetched)
            metrics.loads_cancelled += len(res.decision.cancelled)
            if config.trace:
                _emit_trace(trace, iteration, tid, sid, res)
            t0 = res.end
            ctrl = res.ctrl_free
            pending = res.pending
        metrics.sched_wall_s = wall
        results[mode] = metrics
    return results, trace


def _emit_trace(trace, iteration, tid, sid, res):
    decision = res.decision
    init_ids = {l[0] for l in decision.init_loads}
    prefetch_keys = {(task, s) for task, s, _, _, _ in decision.prefetched}
    for s in sorted(res.schedule.execs, key=lambda ev: (ev[2], ev[0])):
        subtask, pe, start, end = s
        trace.append((iteration, tid, sid, pe, "exec", subtask, start, end))
    for subtask, tile, start, end in sorted(res.load_events,
                                            key=lambda ev: (ev[2], ev[0])):
        kind = "init_load" if subtask in init_ids else "load"
        trace.append((iteration, tid, sid, f"tile{tile}", kind, subtask, start, end))
    for task, subtask, tile, start, end in decision.prefetched:
        trace.append((iteration, task, "-", f"tile{tile}", "prefetch_load",
                      subtask, start, end))
    for subtask, slot, start, end in decision.cancelled_loads:
        trace.append((iteration, tid, sid, slot, "cancel", subtask, start, end))


# ---------------------------------------------------------------------------
# Report / trace serialization
# ---------------------------------------------------------------------------

def metrics_to_dict(m: Metrics, baseline: Optional[Metrics] = None) -> dict:
    d = {
        "mode": m.mode,
        "ideal_total_ms": m.ideal_total,
        "actual_total_ms": m.actual_total,
        "overhead_pct": m.overhead_pct,
        "reuse_pct": m.reuse_pct,
        "loads_issued": m.loads_issued,
        "loads_cancelled": m.loads_cancelled,
        "cs_fraction": m.cs_fraction,
        "drhw_instances": m.drhw_instances,
        "reused_instances": m.reused_instances,
    }
    if baseline is not None and baseline.overhead_pct > 0:
        d["hidden_pct_vs_noprefetch"] = hidden_pct(baseline.overhead_pct,
                                                   m.overhead_pct)
    else:
        d["hidden_pct_vs_noprefetch"] = None
    return d


def trace_lines(trace) -> list[str]:
    """One fixed-field-order CSV line per event, header first."""
    lines = [",".join(TRACE_FIELDS)]
    for row in trace:
        iteration, task, scn, resource, kind, subtask, start, end = row
        lines.append(f"{iteration},{task},{scn},{resource},{kind},{subtask},"
                     f"{start!r},{end!r}")
    return lines


def write_trace(trace, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(trace_lines(trace)))
        fh.write("\n")


def read_trace(path: str) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != list(TRACE_FIELDS):
            raise DrhwError(f"{path}: not a trace file (header {header})")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = line.split(",")
            row = dict(zip(TRACE_FIELDS, vals))
            row["iteration"] = int(row["iteration"])
            row["subtask"] = int(row["subtask"])
            row["start"] = float(row["start"])
            row["end"] = float(row["end"])
            rows.append(row)
    return rows
