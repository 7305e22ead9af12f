"""Domain model: tasks, scenarios, subtask graphs and structural analyses.

Times are non-negative reals in milliseconds.  All comparisons between
times use an absolute tolerance of ``TIME_TOL``.  Every type here is an
immutable value after construction and safe to share between concurrent
experiment runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Sequence

from .errors import GraphError, WorkloadFormatError

ISP = "ISP"
DRHW = "DRHW"
TIME_TOL = 1e-9

WORKLOAD_SCHEMA = "drhw-workload/1"


@dataclass(frozen=True)
class Subtask:
    """One node of a task graph.

    ``slot`` names the processing element the initial schedule assigned the
    subtask to: a virtual tile for DRHW subtasks, an ISP name otherwise.
    DRHW subtasks require a configuration identified as (task id, subtask id).
    """

    id: int
    exec_time: float
    target: str = DRHW
    slot: str = ""


@dataclass(frozen=True)
class SubtaskGraph:
    subtasks: tuple[Subtask, ...]
    edges: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Scenario:
    """A data-dependent version of a task: graph plus initial schedule.

    ``schedule`` holds, per processing element, the ordered subtask ids the
    design-time scheduler placed on it (reconfiguration latency neglected).
    """

    id: str
    graph: SubtaskGraph
    schedule: tuple[tuple[str, tuple[int, ...]], ...]

    @property
    def initial_schedule(self) -> dict[str, tuple[int, ...]]:
        return dict(self.schedule)


@dataclass(frozen=True)
class Task:
    id: str
    scenarios: tuple[Scenario, ...]


@dataclass(frozen=True)
class Workload:
    """An ordered set of tasks plus the feasible inter-task scenarios.

    ``feasible_combinations`` lists the allowed per-task scenario tuples as
    ((task id, scenario id), ...) covering every task; ``None`` means every
    combination is feasible.
    """

    tasks: tuple[Task, ...]
    feasible_combinations: Optional[tuple[tuple[tuple[str, str], ...], ...]] = None
    default_latency: float = 4.0


def make_scenario(scenario_id: str, subtasks: Iterable[Subtask],
                  edges: Iterable[tuple[int, int]],
                  schedule: Mapping[str, Sequence[int]]) -> Scenario:
    """Convenience constructor turning mappings/sequences into value tuples."""
    return Scenario(
        id=str(scenario_id),
        graph=SubtaskGraph(tuple(subtasks), tuple((int(u), int(v)) for u, v in edges)),
        schedule=tuple((str(pe), tuple(int(s) for s in order))
                       for pe, order in schedule.items()),
    )


# ---------------------------------------------------------------------------
# Structural index (internal): adjacency, per-PE chains, combined topo order.
# ---------------------------------------------------------------------------

class ScenarioIndex:
    """Precomputed adjacency and orderings for one (valid) scenario.

    The combined order interleaves graph precedence with the per-PE
    sequencing implied by the initial schedule, so a single forward pass can
    compute all start/end times.
    """

    def __init__(self, scenario: Scenario):
        g = scenario.graph
        self.scenario = scenario
        self.subs = {s.id: s for s in g.subtasks}
        self.exec = {s.id: s.exec_time for s in g.subtasks}
        self.preds: dict[int, list[int]] = {s.id: [] for s in g.subtasks}
        self.succs: dict[int, list[int]] = {s.id: [] for s in g.subtasks}
        for u, v in g.edges:
            self.succs[u].append(v)
            self.preds[v].append(u)
        self.pe_of: dict[int, str] = {}
        self.prev_pe: dict[int, Optional[int]] = {}
        for pe, seq in scenario.schedule:
            prev = None
            for sid in seq:
                self.pe_of[sid] = pe
                self.prev_pe[sid] = prev
                prev = sid
        self.drhw: tuple[int, ...] = tuple(sorted(
            s.id for s in g.subtasks if s.target == DRHW))
        self.slot_of = {sid: self.subs[sid].slot for sid in self.drhw}
        self.order = self._combined_topo()
        self.weights = alap_weights(g)
        self._ancestors: dict[int, frozenset[int]] | None = None

    def _combined_topo(self) -> tuple[int, ...]:
        indeg = {sid: len(self.preds[sid]) for sid in self.subs}
        for sid, prev in self.prev_pe.items():
            if prev is not None:
                indeg[sid] += 1
        import heapq
        heap = [sid for sid, d in indeg.items() if d == 0]
        heapq.heapify(heap)
        out = []
        next_pe = {prev: sid for sid, prev in self.prev_pe.items() if prev is not None}
        while heap:
            sid = heapq.heappop(heap)
            out.append(sid)
            followers = list(self.succs[sid])
            if sid in next_pe:
                followers.append(next_pe[sid])
            for w in followers:
                indeg[w] -= 1
                if indeg[w] == 0:
                    heapq.heappush(heap, w)
        if len(out) != len(self.subs):
            raise GraphError(
                "initial schedule and precedence edges form a cycle "
                f"({len(out)}/{len(self.subs)} subtasks orderable)")
        return tuple(out)

    def ancestors(self, sid: int) -> frozenset[int]:
        """Ancestor set of ``sid`` in the combined (graph + per-PE) order."""
        if self._ancestors is None:
            anc: dict[int, frozenset[int]] = {}
            for node in self.order:
                deps = list(self.preds[node])
                prev = self.prev_pe.get(node)
                if prev is not None:
                    deps.append(prev)
                acc: set[int] = set(deps)
                for d in deps:
                    acc |= anc[d]
                anc[node] = frozenset(acc)
            self._ancestors = anc
        return self._ancestors[sid]


@lru_cache(maxsize=None)
def index_of(scenario: Scenario) -> ScenarioIndex:
    return ScenarioIndex(scenario)


# ---------------------------------------------------------------------------
# Analyses
# ---------------------------------------------------------------------------

def validate(scenario: Scenario) -> list[str]:
    """Check every scenario invariant; return one message per violation.

    An empty report means the scenario is valid.
    """
    report: list[str] = []
    g = scenario.graph
    seen: set[int] = set()
    for s in g.subtasks:
        if s.id in seen:
            report.append(f"duplicate subtask id {s.id}")
        seen.add(s.id)
        if s.exec_time < 0:
            report.append(f"subtask {s.id}: negative exec time {s.exec_time}")
        if s.target not in (ISP, DRHW):
            report.append(f"subtask {s.id}: unknown target {s.target!r}")
        if s.target == DRHW and not s.slot:
            report.append(f"subtask {s.id}: DRHW subtask without a slot")
    ids = {s.id for s in g.subtasks}
    for u, v in g.edges:
        if u not in ids or v not in ids:
            report.append(f"edge ({u},{v}) references a missing subtask")

    # Cycle check on graph edges alone.
    indeg = {i: 0 for i in ids}
    for u, v in g.edges:
        if u in ids and v in ids:
            indeg[v] += 1
    frontier = [i for i, d in indeg.items() if d == 0]
    reached = 0
    succs: dict[int, list[int]] = {i: [] for i in ids}
    for u, v in g.edges:
        if u in ids and v in ids:
            succs[u].append(v)
    while frontier:
        n = frontier.pop()
        reached += 1
        for w in succs[n]:
            indeg[w] -= 1
            if indeg[w] == 0:
                frontier.append(w)
    cyclic = reached != len(ids)
    if cyclic:
        report.append("precedence edges contain a cycle")

    # Schedule coverage and placement.
    placed: dict[int, str] = {}
    for pe, seq in scenario.schedule:
        for sid in seq:
            if sid in placed:
                report.append(f"subtask {sid} scheduled more than once")
            placed[sid] = pe
    for s in g.subtasks:
        if s.id not in placed:
            report.append(f"subtask {s.id} missing from the initial schedule")
        elif s.slot and placed[s.id] != s.slot:
            report.append(
                f"subtask {s.id} scheduled on {placed[s.id]!r}, assigned to {s.slot!r}")
    for sid in placed:
        if sid not in ids:
            report.append(f"schedule names unknown subtask {sid}")

    # Per-PE order must not put a subtask before one of its graph ancestors.
    if not cyclic and not report:
        try:
            index_of.__wrapped__(scenario)  # type: ignore[attr-defined]
        except GraphError as exc:
            report.append(str(exc))
    return report


def alap_weights(graph: SubtaskGraph) -> dict[int, float]:
    """Longest execution-time path from each subtask's start to graph end.

    weight(s) = exec(s) + max over successors of weight, computed in one
    reverse-topological pass over the precedence edges.
    """
    ids = [s.id for s in graph.subtasks]
    execs = {s.id: s.exec_time for s in graph.subtasks}
    succs: dict[int, list[int]] = {i: [] for i in ids}
    outdeg = {i: 0 for i in ids}
    preds: dict[int, list[int]] = {i: [] for i in ids}
    for u, v in graph.edges:
        if u not in execs or v not in execs:
            raise GraphError(f"edge ({u},{v}) references a missing subtask")
        succs[u].append(v)
        preds[v].append(u)
        outdeg[u] += 1
    frontier = [i for i in ids if outdeg[i] == 0]
    weights: dict[int, float] = {}
    remaining = dict(outdeg)
    while frontier:
        n = frontier.pop()
        weights[n] = execs[n] + max((weights[s] for s in succs[n]), default=0.0)
        for p in preds[n]:
            remaining[p] -= 1
            if remaining[p] == 0:
                frontier.append(p)
    if len(weights) != len(ids):
        raise GraphError("cannot compute weights: precedence edges contain a cycle")
    return weights


def zero_latency_times(scenario: Scenario) -> dict[int, tuple[float, float]]:
    """Start/end of every subtask when reconfiguration latency is zero."""
    idx = index_of(scenario)
    times: dict[int, tuple[float, float]] = {}
    for sid in idx.order:
        t = 0.0
        for p in idx.preds[sid]:
            t = max(t, times[p][1])
        prev = idx.prev_pe.get(sid)
        if prev is not None:
            t = max(t, times[prev][1])
        times[sid] = (t, t + idx.exec[sid])
    return times


def ideal_makespan(scenario: Scenario) -> float:
    """Makespan of the zero-reconfiguration-latency timing."""
    times = zero_latency_times(scenario)
    return max((e for _, e in times.values()), default=0.0)


# ---------------------------------------------------------------------------
# Workload document I/O
#
# Schema (JSON, versioned):
# {
#   "schema": "drhw-workload/1",
#   "default_latency_ms": 4.0,
#   "tasks": [
#     {"id": "t1",
#      "scenarios": [
#        {"id": "a",
#         "subtasks": [{"id": 1, "exec_ms": 10.0, "target": "DRHW", "slot": "A"}],
#         "edges": [[1, 2]],
#         "schedule": {"A": [1, 3], "B": [2, 4]}}]}],
#   "feasible_combinations": [[["t1", "a"], ["t2", "b"]], ...] | null
# }
# ---------------------------------------------------------------------------

def workload_to_dict(workload: Workload) -> dict:
    return {
        "schema": WORKLOAD_SCHEMA,
        "default_latency_ms": workload.default_latency,
        "tasks": [
            {
                "id": t.id,
                "scenarios": [
                    {
                        "id": sc.id,
                        "subtasks": [
                            {"id": s.id, "exec_ms": s.exec_time,
                             "target": s.target, "slot": s.slot}
                            for s in sc.graph.subtasks
                        ],
                        "edges": [[u, v] for u, v in sc.graph.edges],
                        "schedule": {pe: list(seq) for pe, seq in sc.schedule},
                    }
                    for sc in t.scenarios
                ],
            }
            for t in workload.tasks
        ],
        "feasible_combinations": (
            None if workload.feasible_combinations is None
            else [[[tid, sid] for tid, sid in combo]
                  for combo in workload.feasible_combinations]
        ),
    }


def save_workload(workload: Workload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(workload_to_dict(workload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def workload_from_dict(doc: dict) -> Workload:
    if not isinstance(doc, dict) or doc.get("schema") != WORKLOAD_SCHEMA:
        raise WorkloadFormatError(
            f"not a {WORKLOAD_SCHEMA} document (schema={doc.get('schema')!r})")
    violations: list[str] = []
    tasks: list[Task] = []
    task_ids: set[str] = set()
    for tdoc in doc.get("tasks", []):
        tid = str(tdoc["id"])
        if tid in task_ids:
            violations.append(f"task {tid}: duplicate task id")
        task_ids.add(tid)
        scenarios: list[Scenario] = []
        scn_ids: set[str] = set()
        for sdoc in tdoc.get("scenarios", []):
            sid = str(sdoc["id"])
            if sid in scn_ids:
                violations.append(f"task {tid} scenario {sid}: duplicate scenario id")
            scn_ids.add(sid)
            try:
                scn = make_scenario(
                    sid,
                    [Subtask(int(d["id"]), float(d["exec_ms"]),
                             str(d.get("target", DRHW)), str(d.get("slot", "")))
                     for d in sdoc.get("subtasks", [])],
                    [(e[0], e[1]) for e in sdoc.get("edges", [])],
                    sdoc.get("schedule", {}),
                )
            except (KeyError, TypeError, ValueError) as exc:
                violations.append(f"task {tid} scenario {sid}: malformed entry ({exc})")
                continue
            for msg in validate(scn):
                violations.append(f"task {tid} scenario {sid}: {msg}")
            scenarios.append(scn)
        if not scenarios:
            violations.append(f"task {tid}: no scenarios")
        tasks.append(Task(tid, tuple(scenarios)))

    feasible = None
    raw_feasible = doc.get("feasible_combinations")
    if raw_feasible is not None:
        combos = []
        known = {t.id: {sc.id for sc in t.scenarios} for t in tasks}
        for i, combo in enumerate(raw_feasible):
            pairs = tuple((str(tid), str(sid)) for tid, sid in combo)
            named = {tid for tid, _ in pairs}
            if named != set(known):
                violations.append(
                    f"feasible combination {i}: must name one scenario per task")
            for tid, sid in pairs:
                if sid not in known.get(tid, set()):
                    violations.append(
                        f"feasible combination {i}: unknown scenario ({tid},{sid})")
            combos.append(pairs)
        feasible = tuple(combos)
        if not combos:
            violations.append("feasible_combinations is present but empty")

    if violations:
        raise WorkloadFormatError("; ".join(violations))
    return Workload(tuple(tasks), feasible,
                    float(doc.get("default_latency_ms", 4.0)))


def load_workload(path: str) -> Workload:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WorkloadFormatError(
                f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return workload_from_dict(doc)


def scenario_map(workload: Workload) -> dict[tuple[str, str], Scenario]:
    return {(t.id, sc.id): sc for t in workload.tasks for sc in t.scenarios}
