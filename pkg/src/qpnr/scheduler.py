"""Greedy priority-driven online scheduler over a macroblock layout.

Event-driven simulation with exact timestamps: each round attempts ready
instructions in descending priority, reserving gate locations and moving
operand qubits hop by hop (a qubit holds both blocks while crossing an
interface). When nothing can be scheduled, time advances to the next
event; if no event is pending and work remains, the run deadlocks and the
highest-priority unscheduled instruction is reported.

Occupancy is one ion per macroblock, except that the two operands of a
two-qubit gate co-occupy its gate location from the second arrival until
one of them is dispersed after the gate completes. A hop is charged
t_turn when it changes the ion's direction relative to its previous hop;
the first hop after a gate (or from the initial placement) is straight.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

from .circuit import InstructionSequence
from .dataflow import build_dataflow, gate_latency, is_input
from .fabric import (
    DIR_VECTORS,
    Layout,
    TechnologyParams,
    shortest_costs,
    shortest_path,
)

# Planning-time penalty (in t_straight units) added per occupied block.
CONGESTION_PENALTY_STRAIGHTS = 5
# Reserved gate locations are strongly avoided but not excluded in planning.
RESERVED_PENALTY_STRAIGHTS = 20


@dataclass(frozen=True)
class ScheduleEvent:
    time: float
    kind: str  # "move-hop" | "gate-start" | "gate-end"
    qubits: tuple[str, ...]
    block: int
    depart: float | None = None     # move-hop: when the hop began
    instruction: int | None = None  # gate events


@dataclass(frozen=True)
class StallRecord:
    ready_at: float
    started_at: float | None
    wait: float
    contested: str | None


@dataclass(frozen=True)
class Schedule:
    events: tuple[ScheduleEvent, ...]
    total_latency: float
    stalls: dict[int, StallRecord]
    initial: dict[str, int]
    assignment: dict[int, str] | None = None

    @property
    def deadlocked(self) -> bool:
        return False


@dataclass(frozen=True)
class DeadlockReport:
    time: float
    blocked_instruction: int
    qubit_positions: dict[str, int]
    stalls: dict[int, StallRecord] = field(default_factory=dict)

    @property
    def deadlocked(self) -> bool:
        return True


class PlacementError(ValueError):
    pass


def schedule(seq: InstructionSequence, layout: Layout,
             initial: dict[str, int], priorities: dict[int, float],
             assignment: dict[int, str] | None = None,
             tech: TechnologyParams = TechnologyParams()
             ) -> Schedule | DeadlockReport:
    """Simulate seq on layout from the given placement.

    In annotated mode every instruction must be assigned a gate location by
    name; otherwise gate locations are chosen online by assign_gate.
    """
    return _Sim(seq, layout, initial, priorities, assignment, tech).run()


def assign_gate(instr, qubit_loc: dict[str, int], layout: Layout,
                tech: TechnologyParams,
                free_gates: list[str] | None = None,
                penalty: dict[int, float] | None = None) -> str | None:
    """Exhaustive scan over free gate locations.

    Minimizes the summed congestion-penalized shortest-path latency of the
    operand qubits; ties break on the lowest block id. Returns None when no
    free gate is reachable by every operand.
    """
    graph = layout.movement_graph(tech)
    if free_gates is None:
        free_gates = sorted(layout.gate_locations)
    per_operand = [shortest_costs(graph, qubit_loc[q], penalty)
                   for q in instr.operands]
    best: tuple[float, int, str] | None = None
    for name in free_gates:
        block = layout.gate_locations[name].block_id
        total = 0.0
        feasible = True
        for costs in per_operand:
            c = costs.get(block)
            if c is None:
                feasible = False
                break
            total += c
        if feasible:
            key = (total, block, name)
            if best is None or key < best:
                best = key
    return best[2] if best else None


class _QubitState:
    __slots__ = ("name", "loc", "heading", "path", "flight_src", "depart",
                 "arrival", "purpose", "blocked_since")

    def __init__(self, name: str, loc: int):
        self.name = name
        self.loc = loc                # current block (destination while in flight)
        self.heading: int | None = None
        self.path: list[int] = []     # remaining blocks to visit
        self.flight_src: int | None = None
        self.depart: float | None = None
        self.arrival: float | None = None
        self.purpose: tuple | None = None  # ("instr", id) | ("park", block)
        self.blocked_since: float | None = None

    @property
    def in_flight(self) -> bool:
        return self.arrival is not None


class _InstrState:
    __slots__ = ("deps_left", "ready_at", "gate_block", "gate_name",
                 "started_at", "done", "contested", "suspended")

    def __init__(self, deps_left: int):
        self.deps_left = deps_left
        self.ready_at: float | None = None
        self.gate_block: int | None = None
        self.gate_name: str | None = None
        self.started_at: float | None = None
        self.done = False
        self.contested: str | None = None
        self.suspended = False


class _Sim:
    def __init__(self, seq, layout, initial, priorities, assignment, tech):
        self.seq = seq
        self.layout = layout
        self.tech = tech
        self.assignment = assignment
        self.priorities = priorities
        self.graph = layout.movement_graph(tech)
        self.initial = dict(initial)
        self.events: list[ScheduleEvent] = []
        self.heap: list = []
        self.counter = itertools.count()
        self.time = 0.0

        if set(initial) != set(seq.qubits):
            raise PlacementError("initial placement must cover exactly the "
                                 "qubits used by the sequence")
        if len(set(initial.values())) != len(initial):
            raise PlacementError("initial placement puts two qubits on one block")
        for q, b in initial.items():
            if b not in layout.by_id:
                raise PlacementError(f"initial block {b} not in layout")
        if assignment is not None:
            for ins in seq.instructions:
                name = assignment.get(ins.id)
                if name is None:
                    raise PlacementError(f"instruction {ins.id} unassigned")
                if name not in layout.gate_locations:
                    raise PlacementError(f"unknown gate location {name!r}")

        self.qubits = {q: _QubitState(q, b) for q, b in sorted(initial.items())}
        self.occupants: dict[int, set[str]] = {}
        for q, b in initial.items():
            self.occupants.setdefault(b, set()).add(q)

        df = build_dataflow(seq)
        self.consumers: dict[int, list[int]] = {
            ins.id: [] for ins in seq.instructions}
        self.instr: dict[int, _InstrState] = {}
        for ins in seq.instructions:
            deps = {a.src for a in df.predecessors(ins.id) if not is_input(a.src)}
            self.instr[ins.id] = _InstrState(len(deps))
            for d in deps:
                self.consumers[d].append(ins.id)
        self.next_use: dict[tuple[str, int], int | None] = {}
        last: dict[str, int | None] = {q: None for q in seq.qubits}
        for ins in reversed(seq.instructions):
            for q in ins.operands:
                self.next_use[(q, ins.id)] = last[q]
                last[q] = ins.id

        self.gate_holder: dict[int, int] = {}  # gate block -> instruction id
        self.done_count = 0
        self.sidesteps = 0
        self.preemptions = 0
        self.preempt_counts: dict[int, int] = {}
        for ins in seq.instructions:
            if self.instr[ins.id].deps_left == 0:
                self.instr[ins.id].ready_at = 0.0

    # ------------------------------------------------------------------ util

    def _prio(self, i: int) -> tuple[float, int]:
        return (-self.priorities.get(i, 0.0), i)

    def _ready(self) -> list[int]:
        return sorted(
            (i for i, st in self.instr.items()
             if st.ready_at is not None and not st.done
             and st.started_at is None),
            key=self._prio)

    def _penalty(self, exclude: frozenset[str]) -> dict[int, float]:
        pen: dict[int, float] = {}
        base = CONGESTION_PENALTY_STRAIGHTS * self.tech.t_straight
        for b, occ in self.occupants.items():
            if occ and not occ <= exclude:
                pen[b] = base
        reserved = RESERVED_PENALTY_STRAIGHTS * self.tech.t_straight
        for b, holder in self.gate_holder.items():
            if not exclude <= set(self.seq.instructions[holder].operands):
                pen[b] = pen.get(b, 0.0) + reserved
        return pen

    def _may_enter(self, q: str, block: int) -> bool:
        holder = self.gate_holder.get(block)
        occ = self.occupants.get(block, set())
        if holder is not None:
            ops = set(self.seq.instructions[holder].operands)
            return q in ops and (occ - {q}) <= ops
        return not (occ - {q})

    def _plan(self, qs: _QubitState, target: int) -> bool:
        """Plan a route to target, routing around gates held by others.

        A gate location reserved by another instruction stays blocked for an
        unbounded time, so entering a corridor through one just wedges the
        fabric; prefer a (possibly longer) route avoiding them and only fall
        back to crossing a reserved gate when no such route exists.
        """
        pen = self._penalty(frozenset({qs.name}))
        holder = self.qubits[qs.name].purpose
        held = {b for b, i in self.gate_holder.items()
                if b != target and holder != ("instr", i)}
        path, _ = shortest_path(self.graph, qs.loc, target, pen,
                                forbidden=held)
        if path is None:
            # Only unreachable-by-structure counts as failure; a route that
            # exists but crosses a reserved gate is deferred (wait in place
            # until the reservation clears rather than wedge the corridor).
            structural, _ = shortest_path(self.graph, qs.loc, target)
            qs.path = []
            return structural is not None
        qs.path = path[1:]
        return True

    # ------------------------------------------------------------- main loop

    def run(self) -> Schedule | DeadlockReport:
        while True:
            self._rounds()
            if self.done_count == len(self.seq.instructions):
                return self._finish()
            if not self.heap:
                if self._last_chance():
                    continue
                if self._clear_suspensions():
                    continue
                return self._deadlock()
            self.time = self.heap[0][0]
            self._clear_suspensions()
            while self.heap and self.heap[0][0] == self.time:
                _, _, fn, args = heapq.heappop(self.heap)
                fn(*args)

    def _clear_suspensions(self) -> bool:
        any_set = False
        for st in self.instr.values():
            if st.suspended:
                st.suspended = False
                any_set = True
        return any_set

    def _schedule_event(self, time: float, fn, args) -> None:
        heapq.heappush(self.heap, (time, next(self.counter), fn, args))

    def _rounds(self) -> None:
        progress = True
        while progress:
            progress = False
            progress |= self._acquire_gates()
            self._plan_movements()
            progress |= self._execute_hops()
            progress |= self._start_gates()

    # --------------------------------------------------------------- phases

    def _acquire_gates(self) -> bool:
        changed = False
        for i in self._ready():
            st = self.instr[i]
            if st.gate_block is not None or st.suspended:
                continue
            ins = self.seq.instructions[i]
            if self.assignment is not None:
                name = self.assignment[i]
                block = self.layout.gate_locations[name].block_id
                if block in self.gate_holder:
                    st.contested = f"gate:{name}"
                    continue
            else:
                free = [n for n, b in sorted(self.layout.gate_locations.items())
                        if b.block_id not in self.gate_holder]
                if not free:
                    st.contested = "gate:none-free"
                    continue
                qubit_loc = {q: self.qubits[q].loc for q in ins.operands}
                pen = self._penalty(frozenset(ins.operands))
                name = assign_gate(ins, qubit_loc, self.layout, self.tech,
                                   free, pen)
                if name is None:
                    st.contested = "gate:unreachable"
                    continue
                block = self.layout.gate_locations[name].block_id
            st.gate_name, st.gate_block = name, block
            self.gate_holder[block] = i
            for q in ins.operands:
                self.qubits[q].purpose = ("instr", i)
                self.qubits[q].path = []
            changed = True
        return changed

    def _plan_movements(self) -> None:
        # Operands head for their instruction's gate; idle residents of a
        # claimed gate are parked out of the way.
        for i in sorted(self.instr, key=self._prio):
            st = self.instr[i]
            if st.gate_block is None or st.done or st.started_at is not None:
                continue
            ins = self.seq.instructions[i]
            for q in ins.operands:
                qs = self.qubits[q]
                if qs.in_flight or qs.loc == st.gate_block:
                    continue
                if not qs.path or qs.path[-1] != st.gate_block:
                    if not self._plan(qs, st.gate_block):
                        st.contested = "path:unreachable"
            for resident in sorted(self.occupants.get(st.gate_block, ())):
                if resident not in ins.operands:
                    self._park(resident, exclude=st.gate_block)

    def _park(self, q: str, exclude: int) -> None:
        qs = self.qubits[q]
        if qs.in_flight or (qs.purpose is not None and qs.purpose[0] == "instr"):
            return
        if qs.purpose is not None and qs.purpose[0] == "park" and qs.path:
            return
        claimed = {s.purpose[1] for s in self.qubits.values()
                   if s.purpose is not None and s.purpose[0] == "park"}
        targets = [b.block_id for b in self.layout.trap_blocks()
                   if b.block_id != exclude
                   and b.block_id not in self.gate_holder
                   and not self.occupants.get(b.block_id)
                   and b.block_id not in claimed]
        if not targets:
            return
        costs = shortest_costs(self.graph, qs.loc, self._penalty(frozenset({q})))
        best = min(((costs[b], b) for b in targets if b in costs), default=None)
        if best is None:
            return
        qs.purpose = ("park", best[1])
        self._plan(qs, best[1])

    def _move_order(self) -> list[_QubitState]:
        def key(qs: _QubitState):
            if qs.purpose is not None and qs.purpose[0] == "instr":
                return (0, *self._prio(qs.purpose[1]), qs.name)
            return (1, 0.0, 0, qs.name)

        return sorted((qs for qs in self.qubits.values()
                       if qs.path and not qs.in_flight), key=key)

    def _execute_hops(self) -> bool:
        moved = False
        for qs in self._move_order():
            nxt = qs.path[0]
            if not self._may_enter(qs.name, nxt):
                # Blocked past an event boundary: re-path around congestion.
                if qs.blocked_since is not None and qs.blocked_since < self.time:
                    self._plan(qs, qs.path[-1])
                    if not qs.path:
                        continue
                    nxt = qs.path[0]
                if not self._may_enter(qs.name, nxt):
                    qs.blocked_since = self.time
                    if qs.purpose is not None and qs.purpose[0] == "instr":
                        self.instr[qs.purpose[1]].contested = f"block:{nxt}"
                    continue
            qs.blocked_since = None
            d = self._direction(qs.loc, nxt)
            charge = (self.tech.t_straight
                      if qs.heading is None or qs.heading == d
                      else self.tech.t_turn)
            qs.flight_src = qs.loc
            qs.depart = self.time
            qs.arrival = self.time + charge
            qs.heading = d
            qs.path.pop(0)
            self.occupants.setdefault(nxt, set()).add(qs.name)
            qs.loc = nxt
            self._schedule_event(qs.arrival, self._arrive, (qs.name,))
            moved = True
        return moved

    def _direction(self, a: int, b: int) -> int:
        ba, bb = self.layout.by_id[a], self.layout.by_id[b]
        delta = (bb.col - ba.col, bb.row - ba.row)
        for d, vec in DIR_VECTORS.items():
            if vec == delta:
                return d
        raise ValueError(f"blocks {a},{b} not adjacent")

    def _forbidden_for(self, q: str, target: int) -> set[int]:
        return {b for b in self.graph.vertices
                if b != target and not self._may_enter(q, b)}

    def _last_chance(self) -> bool:
        """Avert a looming deadlock.

        First try strict re-paths that treat every currently untraversable
        block as a wall; failing that, park an idle qubit resting in a
        blocked mover's way. Any change lets the simulation continue.
        """
        changed = False
        # Re-target parked qubits whose destination was claimed since.
        for qs in sorted(self.qubits.values(), key=lambda s: s.name):
            if qs.in_flight or qs.purpose is None or qs.purpose[0] != "park":
                continue
            target = qs.purpose[1]
            stale = (target in self.gate_holder
                     or bool(self.occupants.get(target, set()) - {qs.name})
                     or (not qs.path and qs.loc != target))
            if stale:
                qs.purpose = None
                qs.path = []
                if self._park_strict(qs.name, avoid=set()):
                    changed = True
        if changed:
            return True
        movers = self._move_order()
        for qs in movers:
            if self._may_enter(qs.name, qs.path[0]):
                continue
            target = qs.path[-1]
            path, _ = shortest_path(self.graph, qs.loc, target,
                                    forbidden=self._forbidden_for(qs.name,
                                                                  target))
            # Only a route whose first hop is actually open counts as relief.
            if path is not None and len(path) > 1 \
                    and self._may_enter(qs.name, path[1]):
                qs.path = path[1:]
                changed = True
        if changed:
            return True
        for qs in movers:
            avoid = set(qs.path) | {qs.loc}
            for resident in sorted(self.occupants.get(qs.path[0], ())):
                rs = self.qubits[resident]
                if rs.purpose is None and not rs.in_flight and not rs.path:
                    if self._park_strict(resident, avoid):
                        return True
        if self._preempt():
            return True
        return self._sidestep(movers)

    def _preempt(self) -> bool:
        """Release the least urgent waiting gate hold (deadlock recovery).

        The released instruction is suspended until the next state change,
        so blocked ions can traverse or claim the freed gate location.
        """
        waiting = [i for i in self.gate_holder.values()
                   if self.instr[i].started_at is None
                   and not self.instr[i].suspended
                   and self.preempt_counts.get(i, 0) < 2]
        waiting.sort(key=self._prio, reverse=True)  # least urgent first
        for i in waiting:
            st = self.instr[i]
            ins = self.seq.instructions[i]
            residents = self.occupants.get(st.gate_block, set())
            if len(residents & set(ins.operands)) > 1:
                continue
            del self.gate_holder[st.gate_block]
            st.gate_block = None
            st.gate_name = None
            st.suspended = True
            st.contested = "gate:preempted"
            for q in ins.operands:
                qs = self.qubits[q]
                if qs.purpose == ("instr", i):
                    qs.purpose = None
                    qs.path = []
            self.preemptions += 1
            self.preempt_counts[i] = self.preempt_counts.get(i, 0) + 1
            return True
        return False

    def _sidestep(self, movers) -> bool:
        """Break a gridlock: the least urgent blocked qubit steps aside."""
        if self.sidesteps >= 8 * max(len(self.qubits), 1):
            return False
        wanted = {qs.path[0] for qs in movers}
        fringe = set(wanted)
        for b in wanted:
            fringe.update(nbr for _, nbr in self.graph.neighbors[b])
        idle = [qs for qs in sorted(self.qubits.values(), key=lambda s: s.name)
                if not qs.path and not qs.in_flight and qs.purpose is None]
        candidates = (list(reversed(movers))
                      + [qs for qs in idle if qs.loc in wanted]
                      + [qs for qs in idle if qs.loc in fringe])
        seen = set()
        for qs in candidates:
            if qs.name in seen:
                continue
            seen.add(qs.name)
            options = []
            for d, nbr in self.graph.neighbors[qs.loc]:
                if self._may_enter(qs.name, nbr):
                    options.append((nbr in wanted, nbr))
            if options:
                target = min(options)[1]
                qs.path = [target]
                self.sidesteps += 1
                return True
        return False

    def _park_strict(self, q: str, avoid: set[int]) -> bool:
        qs = self.qubits[q]
        claimed = {s.purpose[1] for s in self.qubits.values()
                   if s.purpose is not None and s.purpose[0] == "park"}
        targets = [b.block_id for b in self.layout.trap_blocks()
                   if b.block_id not in self.gate_holder
                   and not self.occupants.get(b.block_id)
                   and b.block_id not in claimed]
        preferred = [b for b in targets if b not in avoid] or targets
        if not preferred:
            return False
        costs = shortest_costs(self.graph, qs.loc,
                               forbidden=self._forbidden_for(q, -1))
        best = min(((costs[b], b) for b in preferred if b in costs),
                   default=None)
        if best is None:
            return False
        qs.purpose = ("park", best[1])
        path, _ = shortest_path(self.graph, qs.loc, best[1],
                                forbidden=self._forbidden_for(q, best[1]))
        if path is None:
            qs.purpose = None
            return False
        qs.path = path[1:]
        return True

    def _arrive(self, name: str) -> None:
        qs = self.qubits[name]
        self.events.append(ScheduleEvent(
            self.time, "move-hop", (name,), qs.loc, depart=qs.depart))
        self.occupants[qs.flight_src].discard(name)
        if not self.occupants[qs.flight_src]:
            del self.occupants[qs.flight_src]
        qs.flight_src = None
        qs.depart = None
        qs.arrival = None
        if qs.purpose is not None and qs.purpose[0] == "park" and not qs.path:
            qs.purpose = None

    def _start_gates(self) -> bool:
        started = False
        for i in sorted(self.instr, key=self._prio):
            st = self.instr[i]
            if st.gate_block is None or st.started_at is not None or st.done:
                continue
            ins = self.seq.instructions[i]
            if any(self.qubits[q].loc != st.gate_block or self.qubits[q].in_flight
                   for q in ins.operands):
                continue
            if self.occupants.get(st.gate_block, set()) - set(ins.operands):
                continue
            st.started_at = self.time
            self.events.append(ScheduleEvent(
                self.time, "gate-start", ins.operands, st.gate_block,
                instruction=i))
            self._schedule_event(self.time + gate_latency(ins.gate, self.tech),
                                 self._gate_end, (i,))
            started = True
        return started

    def _gate_end(self, i: int) -> None:
        st = self.instr[i]
        ins = self.seq.instructions[i]
        st.done = True
        self.done_count += 1
        del self.gate_holder[st.gate_block]
        self.events.append(ScheduleEvent(
            self.time, "gate-end", ins.operands, st.gate_block, instruction=i))
        for q in ins.operands:
            qs = self.qubits[q]
            qs.purpose = None
            qs.heading = None
            qs.path = []
        for c in self.consumers[i]:
            cst = self.instr[c]
            cst.deps_left -= 1
            if cst.deps_left == 0:
                cst.ready_at = self.time
        self._disperse(ins, st.gate_block)

    def _disperse(self, ins, block: int) -> None:
        if len(ins.operands) < 2:
            return
        q1, q2 = ins.operands
        nu1 = self.next_use.get((q1, ins.id))
        nu2 = self.next_use.get((q2, ins.id))
        if nu1 == nu2:
            leaver = q2 if nu1 is None else None
        elif nu1 is None:
            leaver = q1
        elif nu2 is None:
            leaver = q2
        else:
            leaver = q1 if nu1 > nu2 else q2
        if leaver is not None:
            self._park(leaver, exclude=block)

    # -------------------------------------------------------------- results

    def _stall_report(self, end_time: float) -> dict[int, StallRecord]:
        report = {}
        for i, st in sorted(self.instr.items()):
            if st.ready_at is None:
                continue
            started = st.started_at
            wait = (started if started is not None else end_time) - st.ready_at
            report[i] = StallRecord(st.ready_at, started, wait,
                                    st.contested if wait > 0 else None)
        return report

    def _finish(self) -> Schedule:
        total = max((e.time for e in self.events if e.kind == "gate-end"),
                    default=0.0)
        return Schedule(tuple(self.events), total, self._stall_report(total),
                        self.initial,
                        dict(self.assignment) if self.assignment else None)

    def _deadlock(self) -> DeadlockReport:
        blocked = min(
            (i for i, st in self.instr.items() if st.started_at is None),
            key=self._prio)
        return DeadlockReport(
            self.time, blocked,
            {q: qs.loc for q, qs in sorted(self.qubits.items())},
            self._stall_report(self.time))
