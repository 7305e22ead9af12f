"""Design-time phase: critical-subtask extraction and the schedule store.

A critical subtask is one whose load latency the prefetch scheduler cannot
hide when everything must be loaded.  Extraction is greedy: start from the
empty set and, while the penalty is non-zero, add the maximum-weight member
of the delayed set.  The loop terminates in at most |DRHW| iterations since
the penalty with everything reused is zero.  Minimality beyond the greedy
loop is not claimed, only the set size is reported.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .engine import (DEFAULT_BB_LIMIT, TimedSchedule, compute_penalty)
from .errors import ConsistencyError, LatencyMismatch, StoreFormatError
from .model import (TIME_TOL, Scenario, Workload, ideal_makespan, index_of,
                    validate)

STORE_SCHEMA = "drhw-store/1"


@dataclass
class DesignTimeEntry:
    """Per-scenario output of the design-time phase.

    ``stored_schedule`` assumes the critical set is reused and everything
    else is loaded; by construction its makespan equals the ideal makespan.
    ``noreuse_order`` is the load order when nothing at all is reused (used
    by the design-time-only prefetch mode).  ``weights`` snapshots the
    longest-path weights so the run-time phase never recomputes them.
    """

    task_id: str
    scenario_id: str
    critical: tuple[int, ...]            # descending weight, id tie-break
    extraction_order: tuple[int, ...]    # order the greedy loop added them
    init_order: tuple[int, ...]          # critical ids, greatest weight first
    stored_order: tuple[int, ...]        # load order of the non-critical loads
    noreuse_order: tuple[int, ...]
    weights: dict[int, float]
    stored_schedule: TimedSchedule
    ideal: float
    drhw: tuple[int, ...]
    penalty_noreuse: float

    @property
    def cs_fraction(self) -> float:
        return len(self.critical) / len(self.drhw) if self.drhw else 0.0


@dataclass
class ScheduleStore:
    """Mapping (task id, scenario id) -> entry, for one latency R."""

    latency: float
    entries: dict[tuple[str, str], DesignTimeEntry] = field(default_factory=dict)

    def entry(self, task_id: str, scenario_id: str) -> DesignTimeEntry:
        return self.entries[(task_id, scenario_id)]

    @property
    def cs_fraction(self) -> float:
        total = sum(len(e.drhw) for e in self.entries.values())
        crit = sum(len(e.critical) for e in self.entries.values())
        return crit / total if total else 0.0


def extract_critical_subtasks(scenario: Scenario, R: float, task_id: str = "",
                              bb_limit: int = DEFAULT_BB_LIMIT,
                              delayed_mode: str = "binding") -> DesignTimeEntry:
    """Greedy critical-set extraction for one scenario."""
    idx = index_of(scenario)
    weights = dict(idx.weights)
    cs: list[int] = []
    report = compute_penalty(scenario, cs, R, bb_limit=bb_limit,
                             delayed_mode=delayed_mode)
    penalty_noreuse = report.penalty
    noreuse_order = report.order
    while report.penalty > TIME_TOL:
        pool = report.delayed
        if not pool:
            # Degenerate: penalty remains but no load is the binding
            # constraint (tolerance edge).  Fall back to the heaviest
            # remaining load so the loop still terminates.
            pool = frozenset(set(idx.drhw) - set(cs))
        pick = min(pool, key=lambda sid: (-weights[sid], sid))
        cs.append(pick)
        report = compute_penalty(scenario, cs, R, bb_limit=bb_limit,
                                 delayed_mode=delayed_mode)
    ideal = ideal_makespan(scenario)
    if abs(report.schedule.makespan - ideal) > TIME_TOL:
        raise ConsistencyError(
            f"stored schedule makespan {report.schedule.makespan} != ideal {ideal}")
    ordered = tuple(sorted(cs, key=lambda sid: (-weights[sid], sid)))
    return DesignTimeEntry(
        task_id=task_id,
        scenario_id=scenario.id,
        critical=ordered,
        extraction_order=tuple(cs),
        init_order=ordered,
        stored_order=report.order,
        noreuse_order=noreuse_order,
        weights=weights,
        stored_schedule=report.schedule,
        ideal=ideal,
        drhw=idx.drhw,
        penalty_noreuse=penalty_noreuse,
    )


def build_store(workload: Workload, R: float,
                bb_limit: int = DEFAULT_BB_LIMIT) -> ScheduleStore:
    """Run extraction for every scenario of every task."""
    store = ScheduleStore(latency=R)
    for task in workload.tasks:
        for scenario in task.scenarios:
            problems = validate(scenario)
            if problems:
                raise ConsistencyError(
                    f"task {task.id} scenario {scenario.id}: " + "; ".join(problems))
            store.entries[(task.id, scenario.id)] = extract_critical_subtasks(
                scenario, R, task_id=task.id, bb_limit=bb_limit)
    return store


# ---------------------------------------------------------------------------
# Store document I/O
#
# Schema (JSON, versioned): top level carries the latency the store was
# built for; each entry carries the critical ids with their weights, the
# init order, the non-critical load order and the full event list of the
# stored schedule.  Field order is stable for diff-based regression tests.
# ---------------------------------------------------------------------------

def _schedule_to_dict(ts: TimedSchedule) -> dict:
    return {
        "origin": ts.origin,
        "makespan": ts.makespan,
        "execs": [[sid, pe, s, e] for sid, pe, s, e in ts.execs],
        "loads": [[sid, slot, s, e] for sid, slot, s, e in ts.loads],
    }


def _schedule_from_dict(doc: dict) -> TimedSchedule:
    return TimedSchedule(
        float(doc["origin"]), float(doc["makespan"]),
        tuple((int(sid), str(pe), float(s), float(e))
              for sid, pe, s, e in doc["execs"]),
        tuple((int(sid), str(slot), float(s), float(e))
              for sid, slot, s, e in doc["loads"]),
    )


def store_to_dict(store: ScheduleStore) -> dict:
    return {
        "schema": STORE_SCHEMA,
        "latency_ms": store.latency,
        "entries": [
            {
                "task": e.task_id,
                "scenario": e.scenario_id,
                "critical": list(e.critical),
                "critical_weights": [e.weights[sid] for sid in e.critical],
                "extraction_order": list(e.extraction_order),
                "init_order": list(e.init_order),
                "stored_order": list(e.stored_order),
                "noreuse_order": list(e.noreuse_order),
                "weights": {str(sid): w for sid, w in sorted(e.weights.items())},
                "schedule": _schedule_to_dict(e.stored_schedule),
                "ideal_ms": e.ideal,
                "drhw": list(e.drhw),
                "penalty_noreuse_ms": e.penalty_noreuse,
            }
            for (_, _), e in sorted(store.entries.items())
        ],
    }


def save_store(store: ScheduleStore, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(store_to_dict(store), fh, indent=2, sort_keys=True)
        fh.write("\n")


def store_from_dict(doc: dict) -> ScheduleStore:
    if not isinstance(doc, dict) or doc.get("schema") != STORE_SCHEMA:
        raise StoreFormatError(
            f"not a {STORE_SCHEMA} document (schema={doc.get('schema')!r})")
    store = ScheduleStore(latency=float(doc["latency_ms"]))
    for edoc in doc.get("entries", []):
        try:
            entry = DesignTimeEntry(
                task_id=str(edoc["task"]),
                scenario_id=str(edoc["scenario"]),
                critical=tuple(int(s) for s in edoc["critical"]),
                extraction_order=tuple(int(s) for s in edoc["extraction_order"]),
                init_order=tuple(int(s) for s in edoc["init_order"]),
                stored_order=tuple(int(s) for s in edoc["stored_order"]),
                noreuse_order=tuple(int(s) for s in edoc["noreuse_order"]),
                weights={int(k): float(v) for k, v in edoc["weights"].items()},
                stored_schedule=_schedule_from_dict(edoc["schedule"]),
                ideal=float(edoc["ideal_ms"]),
                drhw=tuple(int(s) for s in edoc["drhw"]),
                penalty_noreuse=float(edoc["penalty_noreuse_ms"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreFormatError(f"malformed store entry: {exc}") from exc
        _check_entry(entry)
        store.entries[(entry.task_id, entry.scenario_id)] = entry
    return store


def _check_entry(entry: DesignTimeEntry) -> None:
    if sorted(entry.init_order) != sorted(entry.critical):
        raise StoreFormatError(
            f"entry ({entry.task_id},{entry.scenario_id}): init order is not "
            "a permutation of the critical set")
    wts = [entry.weights[sid] for sid in entry.critical]
    for a, b, sa, sb in zip(wts, wts[1:], entry.critical, entry.critical[1:]):
        if a < b - TIME_TOL or (abs(a - b) <= TIME_TOL and sa > sb):
            raise StoreFormatError(
                f"entry ({entry.task_id},{entry.scenario_id}): critical set "
                "is not in descending weight order")
    if abs(entry.stored_schedule.makespan - entry.ideal) > TIME_TOL:
        raise StoreFormatError(
            f"entry ({entry.task_id},{entry.scenario_id}): stored makespan "
            f"{entry.stored_schedule.makespan} differs from ideal {entry.ideal}")


def load_store(path: str, expect_latency: Optional[float] = None) -> ScheduleStore:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StoreFormatError(
                f"{path}: parse error at offset {exc.pos} "
                f"(line {exc.lineno} column {exc.colno}): {exc.msg}") from exc
    store = store_from_dict(doc)
    if expect_latency is not None and abs(store.latency - expect_latency) > TIME_TOL:
        raise LatencyMismatch(
            f"store was built for latency {store.latency} ms, "
            f"requested {expect_latency} ms")
    return store
