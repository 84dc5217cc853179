"""Independent schedule validator.

Reconstructs qubit trails and occupancy intervals from the event list
alone and re-checks every contract: dependency order, one-ion-per-block
exclusivity (with the two-operand gate co-occupancy carve-out), path
contiguity over the movement graph, exact per-hop latency arithmetic, and
gate duration/location correctness. Kept deliberately separate from the
simulator's bookkeeping.
"""

from __future__ import annotations

from .circuit import InstructionSequence
from .dataflow import build_dataflow, gate_latency, is_input
from .fabric import DIR_VECTORS, Layout, TechnologyParams
from .scheduler import Schedule


def validate_schedule(sched: Schedule, seq: InstructionSequence,
                      layout: Layout, tech: TechnologyParams) -> list[str]:
    """Return a list of violations; an empty list means the schedule is valid."""
    v: list[str] = []
    graph = layout.movement_graph(tech)
    events = sched.events

    times = [e.time for e in events]
    if times != sorted(times):
        v.append("events are not in chronological order")

    # Gate bookkeeping -----------------------------------------------------
    starts: dict[int, tuple[float, int]] = {}
    ends: dict[int, tuple[float, int]] = {}
    for e in events:
        if e.kind == "gate-start":
            if e.instruction in starts:
                v.append(f"instruction {e.instruction} started twice")
            starts[e.instruction] = (e.time, e.block)
        elif e.kind == "gate-end":
            if e.instruction in ends:
                v.append(f"instruction {e.instruction} ended twice")
            ends[e.instruction] = (e.time, e.block)

    for ins in seq.instructions:
        if ins.id not in starts or ins.id not in ends:
            v.append(f"instruction {ins.id} missing gate events")
            continue
        (t0, b0), (t1, b1) = starts[ins.id], ends[ins.id]
        if b0 != b1:
            v.append(f"instruction {ins.id} starts and ends at different blocks")
        if t1 - t0 != gate_latency(ins.gate, tech):
            v.append(f"instruction {ins.id} duration {t1 - t0} wrong")
        block = layout.by_id.get(b0)
        if block is None or not block.is_gate:
            v.append(f"instruction {ins.id} executed off gate location")
        if sched.assignment is not None:
            want = sched.assignment.get(ins.id)
            if block is not None and block.gate_name != want:
                v.append(f"instruction {ins.id} ran at {block.gate_name}, "
                         f"assigned {want}")

    # Dependency order ------------------------------------------------------
    df = build_dataflow(seq)
    for arc in df.arcs:
        if is_input(arc.src):
            continue
        if arc.src in ends and arc.dst in starts:
            if starts[arc.dst][0] < ends[arc.src][0]:
                v.append(f"instruction {arc.dst} started before producer "
                         f"{arc.src} finished")

    # Gate-location exclusivity --------------------------------------------
    per_block_gates: dict[int, list[tuple[float, float, int]]] = {}
    for i in starts:
        if i in ends:
            per_block_gates.setdefault(starts[i][1], []).append(
                (starts[i][0], ends[i][0], i))
    for block, spans in per_block_gates.items():
        spans.sort()
        for (s0, e0, i0), (s1, e1, i1) in zip(spans, spans[1:]):
            if s1 < e0:
                v.append(f"gates {i0} and {i1} overlap at block {block}")

    # Qubit trails ----------------------------------------------------------
    trails: dict[str, list[tuple[float, float, int]]] = {
        q: [(0.0, 0.0, b)] for q, b in sched.initial.items()}
    hops: dict[str, list] = {q: [] for q in sched.initial}
    gate_marks: dict[str, list[tuple[float, float, int]]] = {
        q: [] for q in sched.initial}
    for ins in seq.instructions:
        if ins.id in starts and ins.id in ends:
            for q in ins.operands:
                gate_marks[q].append(
                    (starts[ins.id][0], ends[ins.id][0], starts[ins.id][1]))
    for e in events:
        if e.kind == "move-hop":
            hops[e.qubits[0]].append(e)

    for q, qhops in hops.items():
        at = sched.initial[q]
        prev_arrive = 0.0
        heading = None
        resets = sorted(t1 for (t0, t1, b) in gate_marks[q])
        ri = 0
        for e in qhops:
            if e.depart is None:
                v.append(f"{q} hop missing departure time")
                break
            while ri < len(resets) and resets[ri] <= e.depart:
                heading = None
                ri += 1
            nxt = e.block
            edge = (at, nxt)
            if edge not in graph.edges:
                v.append(f"{q} hops over non-edge {edge}")
                break
            d = _direction(layout, at, nxt)
            expect = tech.t_straight if heading is None or heading == d \
                else tech.t_turn
            if e.time - e.depart != expect:
                v.append(f"{q} hop into {nxt} took {e.time - e.depart}, "
                         f"expected {expect}")
            if e.depart < prev_arrive:
                v.append(f"{q} departed block {at} before arriving")
            trails[q].append((e.depart, e.time, nxt))
            heading = d
            prev_arrive = e.time
            at = nxt

    # Gates must run where (and while) their operands rest ------------------
    for q, marks in gate_marks.items():
        for (t0, t1, block) in marks:
            if not _resting_at(trails[q], t0, t1, block):
                v.append(f"{q} not resting at block {block} during "
                         f"[{t0},{t1}] gate")

    # Block occupancy (one ion per block, gate-pair carve-out) --------------
    end_time = max(times, default=0.0)
    intervals: dict[int, list[tuple[float, float, str]]] = {}
    for q, trail in trails.items():
        for idx, (depart, arrive, block) in enumerate(trail):
            vac = trail[idx + 1][1] if idx + 1 < len(trail) else end_time
            intervals.setdefault(block, []).append((depart, vac, q))
    pair_gates: dict[tuple[int, frozenset[str]], list[tuple[float, float]]] = {}
    for ins in seq.instructions:
        if len(ins.operands) == 2 and ins.id in starts and ins.id in ends:
            key = (starts[ins.id][1], frozenset(ins.operands))
            pair_gates.setdefault(key, []).append(
                (starts[ins.id][0], ends[ins.id][0]))
    for block, spans in intervals.items():
        spans.sort()
        for a in range(len(spans)):
            s0, e0, q0 = spans[a]
            for b in range(a + 1, len(spans)):
                s1, e1, q1 = spans[b]
                if s1 >= e0:
                    break
                if q0 == q1:
                    continue
                ov = (max(s0, s1), min(e0, e1))
                covered = any(ov[0] <= gs and ge <= ov[1]
                              for gs, ge in pair_gates.get(
                                  (block, frozenset({q0, q1})), ()))
                if not covered:
                    v.append(f"{q0} and {q1} share block {block} over {ov} "
                             "without a joint gate")

    # Triple occupancy sweep -----------------------------------------------
    for block, spans in intervals.items():
        marks = sorted([(s, 1) for s, _, _ in spans] +
                       [(e, -1) for _, e, _ in spans])
        depth = 0
        for _, delta in marks:
            depth += delta
            if depth > 2:
                v.append(f"more than two ions at block {block}")
                break

    # Reported latency ------------------------------------------------------
    want = max((ends[i][0] for i in ends), default=0.0)
    if sched.total_latency != want:
        v.append(f"total latency {sched.total_latency} != last gate end {want}")
    return v


def _resting_at(trail, t0: float, t1: float, block: int) -> bool:
    for idx, (depart, arrive, b) in enumerate(trail):
        if b != block:
            continue
        vacated = trail[idx + 1][0] if idx + 1 < len(trail) else float("inf")
        if arrive <= t0 and t1 <= vacated:
            return True
    return False


def _direction(layout: Layout, a: int, b: int) -> int:
    ba, bb = layout.by_id[a], layout.by_id[b]
    delta = (bb.col - ba.col, bb.row - ba.row)
    for d, vec in DIR_VECTORS.items():
        if vec == delta:
            return d
    raise ValueError(f"blocks {a},{b} not adjacent")
