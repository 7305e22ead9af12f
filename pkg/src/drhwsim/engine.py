"""Timeline model and load schedulers.

A single reconfiguration controller serializes all loads; every load lasts
exactly the latency R.  The controller takes loads strictly in the given
order and blocks behind an ineligible head: a load is eligible once its
target tile's previous subtask (in the per-PE order) has finished, or at t0
if it is the tile's first.  Subtask order per PE is never altered; only
loads are inserted.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .errors import OrderError, SearchLimitExceeded, DrhwError
from .model import (TIME_TOL, Scenario, ScenarioIndex, ideal_makespan,
                    index_of, zero_latency_times)

CONTROLLER = "RC"
DEFAULT_BB_LIMIT = 12
ORACLE_LIMIT = 8


@dataclass(frozen=True)
class TimedSchedule:
    """Exec intervals per PE plus load intervals on the controller.

    ``makespan`` is the duration from ``origin`` to the last exec end.
    Event times are absolute.
    """

    origin: float
    makespan: float
    execs: tuple[tuple[int, str, float, float], ...]   # (subtask, pe, start, end)
    loads: tuple[tuple[int, str, float, float], ...]   # (subtask, slot, start, end)

    def events(self) -> list[tuple[str, str, int, float, float]]:
        """Flat event stream: (resource, kind, subtask, start, end).

        Loads appear on the controller resource; field order is fixed.
        """
        out = [(pe, "exec", sid, s, e) for sid, pe, s, e in self.execs]
        out += [(CONTROLLER, "load", sid, s, e) for sid, slot, s, e in self.loads]
        out.sort(key=lambda ev: (ev[3], ev[4], ev[1], ev[2]))
        return out

    def shifted(self, dt: float) -> "TimedSchedule":
        return TimedSchedule(
            self.origin + dt, self.makespan,
            tuple((sid, pe, s + dt, e + dt) for sid, pe, s, e in self.execs),
            tuple((sid, slot, s + dt, e + dt) for sid, slot, s, e in self.loads),
        )

    def exec_end(self, sid: int) -> float:
        for s in self.execs:
            if s[0] == sid:
                return s[3]
        raise KeyError(sid)


@dataclass(frozen=True)
class PenaltyReport:
    penalty: float
    delayed: frozenset[int]
    order: tuple[int, ...]
    schedule: TimedSchedule


# ---------------------------------------------------------------------------
# Core placement
# ---------------------------------------------------------------------------

def _finish_times(idx: ScenarioIndex, load_end: Mapping[int, Optional[float]],
                  t0: float, min_start: Optional[Mapping[int, float]] = None):
    """One forward pass over the combined order.

    ``load_end`` maps loaded subtasks to their load end, or None while the
    load is still unplaced; times depending on an unplaced load are None.
    Returns (starts, ends) keyed by subtask id.
    """
    starts: dict[int, Optional[float]] = {}
    ends: dict[int, Optional[float]] = {}
    for sid in idx.order:
        t: Optional[float] = t0
        if sid in load_end:
            le = load_end[sid]
            t = None if le is None else max(t, le)
        if t is not None and min_start and sid in min_start:
            t = max(t, min_start[sid])
        if t is not None:
            deps = idx.preds[sid]
            prev = idx.prev_pe.get(sid)
            for d in deps if prev is None else itertools.chain(deps, (prev,)):
                e = ends[d]
                if e is None:
                    t = None
                    break
                if e > t:
                    t = e
        starts[sid] = t
        ends[sid] = None if t is None else t + idx.exec[sid]
    return starts, ends


def _check_load_set(idx: ScenarioIndex, load_set: Iterable[int]) -> frozenset[int]:
    ls = frozenset(load_set)
    bad = ls - set(idx.drhw)
    if bad:
        raise OrderError(f"load set contains non-DRHW subtasks: {sorted(bad)}")
    return ls


def _try_place(idx: ScenarioIndex, order, load_set, R, t0,
               ctrl_start=None, min_start=None) -> Optional[TimedSchedule]:
    """Place loads head-of-line; None if the head can never become eligible."""
    load_end: dict[int, Optional[float]] = {sid: None for sid in load_set}
    rc = t0 if ctrl_start is None else max(t0, ctrl_start)
    loads = []
    for sid in order:
        prev = idx.prev_pe.get(sid)
        if prev is None:
            elig = t0
        else:
            _, ends = _finish_times(idx, load_end, t0, min_start)
            e = ends[prev]
            if e is None:
                return None
            elig = e
        start = max(rc, elig)
        rc = start + R
        load_end[sid] = rc
        loads.append((sid, idx.slot_of[sid], start, rc))
    starts, ends = _finish_times(idx, load_end, t0, min_start)
    makespan = max((e for e in ends.values()), default=t0) - t0
    execs = tuple((sid, idx.pe_of[sid], starts[sid], ends[sid]) for sid in idx.order)
    return TimedSchedule(t0, makespan, execs, tuple(loads))


def place_loads(scenario: Scenario, load_set, order, R: float,
                t0: float = 0.0, *, ctrl_start: Optional[float] = None,
                min_start: Optional[Mapping[int, float]] = None) -> TimedSchedule:
    """Insert loads into the initial schedule following ``order`` strictly."""
    if R < 0:
        raise OrderError(f"negative latency {R}")
    idx = index_of(scenario)
    ls = _check_load_set(idx, load_set)
    order = tuple(order)
    if len(order) != len(ls) or set(order) != ls:
        raise OrderError(f"order {order} is not a permutation of the load set")
    ts = _try_place(idx, order, ls, R, t0, ctrl_start, min_start)
    if ts is None:
        raise OrderError(f"order {order} deadlocks behind an ineligible head load")
    return ts


def schedule_no_prefetch(scenario: Scenario, load_set, R: float,
                         t0: float = 0.0) -> TimedSchedule:
    """Baseline: every load is issued on demand, never in advance.

    A load becomes eligible only once all of its subtask's precedence and
    per-PE predecessors have finished; ties resolve to the lower subtask id.
    """
    if R < 0:
        raise OrderError(f"negative latency {R}")
    idx = index_of(scenario)
    ls = _check_load_set(idx, load_set)
    load_end: dict[int, Optional[float]] = {sid: None for sid in ls}
    rc = t0
    loads = []
    remaining = set(ls)
    while remaining:
        _, ends = _finish_times(idx, load_end, t0)
        best = None
        for sid in sorted(remaining):
            ready = t0
            deps = list(idx.preds[sid])
            prev = idx.prev_pe.get(sid)
            if prev is not None:
                deps.append(prev)
            ok = True
            for d in deps:
                e = ends[d]
                if e is None:
                    ok = False
                    break
                ready = max(ready, e)
            if ok and (best is None or ready < best[0] - TIME_TOL):
                best = (ready, sid)
        if best is None:
            raise OrderError("on-demand loading deadlocked (invalid scenario?)")
        ready, sid = best
        start = max(rc, ready)
        rc = start + R
        load_end[sid] = rc
        remaining.discard(sid)
        loads.append((sid, idx.slot_of[sid], start, rc))
    starts, ends = _finish_times(idx, load_end, t0)
    makespan = max((e for e in ends.values()), default=t0) - t0
    execs = tuple((sid, idx.pe_of[sid], starts[sid], ends[sid]) for sid in idx.order)
    return TimedSchedule(t0, makespan, execs, tuple(loads))


# ---------------------------------------------------------------------------
# Order construction
# ---------------------------------------------------------------------------

def _order_constraints(idx: ScenarioIndex, load_set: frozenset[int]):
    """Precedence between loads forced by head-of-line controller semantics.

    The load of s waits for its tile's previous subtask, which cannot finish
    until the loads of that subtask and of its combined ancestors are done;
    those loads must therefore be issued before s's.
    """
    before: dict[int, set[int]] = {sid: set() for sid in load_set}
    for sid in load_set:
        prev = idx.prev_pe.get(sid)
        if prev is None:
            continue
        blockers = (idx.ancestors(prev) | {prev}) & load_set
        before[sid] |= blockers
    return before


def priority_order(scenario: Scenario, load_set,
                   weights: Optional[Mapping[int, float]] = None) -> tuple[int, ...]:
    """Deadlock-free load order by descending weight (ties: lower id)."""
    idx = index_of(scenario)
    ls = _check_load_set(idx, load_set)
    w = weights if weights is not None else idx.weights
    before = _order_constraints(idx, ls)
    pending = {sid: set(b) for sid, b in before.items()}
    after: dict[int, list[int]] = {sid: [] for sid in ls}
    for sid, b in before.items():
        for x in b:
            after[x].append(sid)
    heap = [(-w[sid], sid) for sid in ls if not pending[sid]]
    heapq.heapify(heap)
    out = []
    while heap:
        _, sid = heapq.heappop(heap)
        out.append(sid)
        for nxt in after[sid]:
            pending[nxt].discard(sid)
            if not pending[nxt]:
                heapq.heappush(heap, (-w[nxt], nxt))
    if len(out) != len(ls):
        raise OrderError("load ordering constraints are cyclic (invalid scenario?)")
    return tuple(out)


def schedule_list_heuristic(scenario: Scenario, load_set, R: float,
                            t0: float = 0.0, *,
                            weights: Optional[Mapping[int, float]] = None,
                            ctrl_start: Optional[float] = None,
                            min_start: Optional[Mapping[int, float]] = None):
    """List scheduler: descending-weight order, O(N log N) in the load count."""
    order = priority_order(scenario, load_set, weights)
    ts = place_loads(scenario, load_set, order, R, t0,
                     ctrl_start=ctrl_start, min_start=min_start)
    return order, ts


def _search_orders(idx, ls, R, t0, incumbent, lex_phase, best_known=None):
    """DFS over load permutations with an admissible lower bound.

    The bound of a partial order is the makespan with only the placed prefix
    loaded and the remaining loads treated as zero-latency; adding real loads
    never shortens the timeline.
    """
    n = len(ls)
    best = incumbent if best_known is None else best_known

    # Iterative DFS; each frame: (prefix, load_end of prefix, controller time).
    result_order = None
    w = idx.weights

    def children(prefix_set):
        rest = [sid for sid in ls if sid not in prefix_set]
        if lex_phase:
            rest.sort()
        else:
            rest.sort(key=lambda sid: (-w[sid], sid))
        return rest

    def dfs(prefix, load_end, rc):
        nonlocal best, result_order
        if len(prefix) == n:
            _, ends = _finish_times(idx, load_end, t0)
            mk = max((e for e in ends.values()), default=t0) - t0
            if lex_phase:
                if mk <= best + TIME_TOL:
                    result_order = tuple(prefix)
                    return True
            elif mk < best - TIME_TOL:
                best = mk
            return False
        prefix_set = set(prefix)
        for sid in children(prefix_set):
            prev = idx.prev_pe.get(sid)
            if prev is None:
                elig = t0
            else:
                _, ends = _finish_times(idx, load_end, t0)
                e = ends[prev]
                if e is None:
                    continue        # ineligible head forever: infeasible branch
                elig = e
            start = max(rc, elig)
            le = dict(load_end)
            le[sid] = start + R
            # Lower bound: prefix placed, remaining loads free.
            partial = {k: v for k, v in le.items() if v is not None}
            _, ends = _finish_times(idx, partial, t0)
            bound = max((e for e in ends.values()), default=t0) - t0
            if lex_phase:
                if bound > best + TIME_TOL:
                    continue
            elif bound >= best - TIME_TOL:
                continue
            prefix.append(sid)
            if dfs(prefix, le, start + R):
                return True
            prefix.pop()
        return False

    dfs([], {sid: None for sid in ls}, t0)
    return best, result_order


def schedule_optimal_bb(scenario: Scenario, load_set, R: float, t0: float = 0.0,
                        bb_limit: int = DEFAULT_BB_LIMIT, *,
                        weights: Optional[Mapping[int, float]] = None):
    """Branch & bound over load orders; minimal makespan, lex-smallest ties."""
    idx = index_of(scenario)
    ls = _check_load_set(idx, load_set)
    if len(ls) > bb_limit:
        raise SearchLimitExceeded(
            f"{len(ls)} loads exceed the branch&bound limit of {bb_limit}")
    if not ls:
        return (), place_loads(scenario, (), (), R, t0)
    # Seed the incumbent with the (always feasible) list order.
    order0 = priority_order(scenario, ls, weights)
    ts0 = _try_place(idx, order0, ls, R, t0)
    assert ts0 is not None
    best, _ = _search_orders(idx, ls, R, t0, ts0.makespan, lex_phase=False)
    _, order = _search_orders(idx, ls, R, t0, best, lex_phase=True)
    assert order is not None
    ts = _try_place(idx, order, ls, R, t0)
    assert ts is not None
    return order, ts


def brute_force_oracle(scenario: Scenario, load_set, R: float, t0: float = 0.0,
                       guard: int = ORACLE_LIMIT):
    """Exhaustive minimum over all permutations; the independent test oracle."""
    idx = index_of(scenario)
    ls = _check_load_set(idx, load_set)
    if len(ls) > guard:
        raise SearchLimitExceeded(f"{len(ls)} loads exceed the oracle guard of {guard}")
    best_ts = None
    best_order: tuple[int, ...] = ()
    for perm in itertools.permutations(sorted(ls)):
        ts = _try_place(idx, perm, ls, R, t0)
        if ts is None:
            continue
        if best_ts is None or ts.makespan < best_ts.makespan - TIME_TOL:
            best_ts, best_order = ts, perm
    if best_ts is None:
        best_ts = place_loads(scenario, (), (), R, t0) if not ls else None
    if best_ts is None:
        raise OrderError("no feasible load order exists (invalid scenario?)")
    return best_order, best_ts


# ---------------------------------------------------------------------------
# Penalty
# ---------------------------------------------------------------------------

def _binding_delays(idx: ScenarioIndex, ts: TimedSchedule, load_set,
                    t0: float) -> frozenset[int]:
    """Subtasks whose own load end is the binding start constraint."""
    ends = {sid: e for sid, _, _, e in ts.execs}
    load_end = {sid: e for sid, _, _, e in ts.loads}
    delayed = set()
    for sid in load_set:
        other = t0
        deps = list(idx.preds[sid])
        prev = idx.prev_pe.get(sid)
        if prev is not None:
            deps.append(prev)
        for d in deps:
            other = max(other, ends[d])
        if load_end[sid] > other + TIME_TOL:
            delayed.add(sid)
    return frozenset(delayed)


def _late_start_delays(idx: ScenarioIndex, ts: TimedSchedule, load_set,
                       t0: float) -> frozenset[int]:
    """Alternative reading: loaded subtasks starting later than the ideal."""
    ideal = zero_latency_times(idx.scenario)
    starts = {sid: s for sid, _, s, _ in ts.execs}
    return frozenset(sid for sid in load_set
                     if starts[sid] - t0 > ideal[sid][0] + TIME_TOL)


def compute_penalty(scenario: Scenario, assumed_reused, R: float, *,
                    bb_limit: int = DEFAULT_BB_LIMIT,
                    delayed_mode: str = "binding") -> PenaltyReport:
    """Schedule loads assuming ``assumed_reused`` configurations are resident.

    Everything assigned to DRHW and not assumed reused must be loaded; the
    branch&bound scheduler is used up to ``bb_limit`` loads, the list
    heuristic beyond it.  ``delayed_mode`` selects how "subtasks that
    generate delays" is read: "binding" (the load is the binding start
    constraint, the default) or "late_start" (started later than ideal).
    """
    idx = index_of(scenario)
    reused = frozenset(assumed_reused)
    bad = reused - set(idx.drhw)
    if bad:
        raise OrderError(f"assumed_reused contains non-DRHW subtasks: {sorted(bad)}")
    load_set = frozenset(idx.drhw) - reused
    try:
        order, ts = schedule_optimal_bb(scenario, load_set, R, 0.0, bb_limit)
    except SearchLimitExceeded:
        order, ts = schedule_list_heuristic(scenario, load_set, R, 0.0)
    penalty = ts.makespan - ideal_makespan(scenario)
    if penalty < 0:
        if penalty < -TIME_TOL:
            raise DrhwError(f"makespan below ideal by {-penalty} (internal error)")
        penalty = 0.0
    if delayed_mode == "binding":
        delayed = _binding_delays(idx, ts, load_set, 0.0)
    elif delayed_mode == "late_start":
        delayed = _late_start_delays(idx, ts, load_set, 0.0)
    else:
        raise ValueError(f"unknown delayed_mode {delayed_mode!r}")
    if penalty <= TIME_TOL:
        delayed = frozenset()
    return PenaltyReport(penalty, delayed, tuple(order), ts)
