"""Greedy iterative place-and-route.

Starts with one gate location per qubit (seeded center-outward on a
spacing-2 lattice) and no channels, then alternates with the scheduler:
each deadlock names a blocked instruction, whose operand locations get
connected by a straight or L-shaped corridor; crossings become
intersections. When the blocked pair is already connected (a congestion
deadlock rather than a reachability one), a fresh parallel corridor is
routed instead. Iteration ends when the circuit schedules to completion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .circuit import InstructionSequence
from .dataflow import build_dataflow, critical_path_priorities
from .fabric import Layout, TechnologyParams
from .painter import PortGrid, RouteError
from .scheduler import DeadlockReport, Schedule, schedule


class GreedyError(RuntimeError):
    pass


@dataclass(frozen=True)
class GreedyResult:
    layout: Layout
    initial: dict[str, int]
    schedule: Schedule
    iterations: int
    connects: int


def spiral_positions():
    """Lattice positions (2i, 2j) from the center outward."""
    yield (0, 0)
    for ring in itertools.count(1):
        cells = [(i, j) for i in range(-ring, ring + 1)
                 for j in range(-ring, ring + 1)
                 if max(abs(i), abs(j)) == ring]
        for i, j in sorted(cells, key=lambda c: (c[1], c[0])):
            yield (2 * i, 2 * j)


def gate_name(qubit: str) -> str:
    return f"g_{qubit}"


def seed_grid(seq: InstructionSequence) -> PortGrid:
    grid = PortGrid()
    for q, pos in zip(seq.qubit_order(), spiral_positions()):
        grid.add_trap(pos, gate_name(q))
    return grid


def greedy_layout(seq: InstructionSequence,
                  tech: TechnologyParams = TechnologyParams(),
                  max_iterations: int | None = None
                  ) -> GreedyResult:
    """Iterate schedule/connect until the circuit completes."""
    if not seq.instructions:
        raise ValueError("empty instruction sequence")
    grid = seed_grid(seq)
    priorities = critical_path_priorities(build_dataflow(seq), seq, tech)
    cap = max_iterations if max_iterations is not None \
        else max(10 * len(seq.instructions), 8)
    connects = 0
    for iteration in range(1, cap + 1):
        layout = grid.realize()
        initial = {q: layout.gate_locations[gate_name(q)].block_id
                   for q in seq.qubits}
        result = schedule(seq, layout, initial, priorities, None, tech)
        if isinstance(result, Schedule):
            return GreedyResult(layout, initial, result, iteration, connects)
        before = _snapshot(grid)
        if not _repair(grid, seq, priorities, result, layout) \
                or _snapshot(grid) == before:
            raise GreedyError(
                f"cannot repair deadlock on instruction "
                f"{result.blocked_instruction}")
        connects += 1
    raise GreedyError(f"no completing layout within {cap} iterations")


def _snapshot(grid: PortGrid):
    return (tuple(sorted((p, tuple(sorted(s))) for p, s in grid.ports.items())),
            tuple(sorted(grid.traps.items(), key=str)))


def _repair(grid: PortGrid, seq, priorities, report: DeadlockReport,
            layout: Layout) -> bool:
    """Connect the blocking pair; fall back to a fresh parallel corridor."""
    pos_of = {b.block_id: b.position for b in layout.blocks}
    unstarted = [i for i, rec in sorted(report.stalls.items())
                 if rec.started_at is None]
    unstarted.sort(key=lambda i: (-priorities.get(i, 0.0), i))
    for i in unstarted:
        ins = seq.instructions[i]
        if len(ins.operands) != 2:
            continue
        pa = pos_of[report.qubit_positions[ins.operands[0]]]
        pb = pos_of[report.qubit_positions[ins.operands[1]]]
        if grid.connected(pa, pb):
            continue
        pa, pb = _maybe_relocate(grid, pa, pb)
        try:
            grid.route(pa, pb)
            return True
        except RouteError:
            continue
    # Every blocked pair already communicates: congestion deadlock. Bypass
    # gate locations sitting astride the pair's corridor, then add fresh
    # bandwidth or at least storage to pull aside into.
    ins = seq.instructions[report.blocked_instruction]
    qpos = [pos_of[report.qubit_positions[q]] for q in ins.operands]
    if len(qpos) == 2 and qpos[0] != qpos[1]:
        src, dst = qpos
    else:
        src = qpos[0]
        gates = sorted(
            (abs(b.col - src[0]) + abs(b.row - src[1]), b.position)
            for b in layout.blocks if b.is_gate and b.position != src)
        if not gates:
            return False
        dst = gates[0][1]
    corridor = _corridor_positions(grid, src, dst)
    full = [src] + corridor + [dst]
    for k in range(1, len(full) - 1):
        if grid.is_trap(full[k]):
            try:
                grid.route(full[k - 1], full[k + 1], fresh=True)
                return True
            except RouteError:
                continue
    try:
        grid.route(src, dst, fresh=True)
        return True
    except RouteError:
        pass
    contested = report.stalls.get(report.blocked_instruction)
    if contested and contested.contested and \
            contested.contested.startswith("block:"):
        block = int(contested.contested.split(":", 1)[1])
        for pos in _channels_near(grid, pos_of[block]):
            if grid.add_storage_spur(pos) is not None:
                return True
    for pos in corridor:
        if grid.add_storage_spur(pos) is not None:
            return True
    return False


def _corridor_positions(grid: PortGrid, src, dst):
    """Interior positions of one existing corridor between two blocks."""
    from .fabric import DIR_VECTORS, opposite

    prev = {src: None}
    queue = [src]
    while queue:
        pos = queue.pop(0)
        if pos == dst:
            break
        for d in sorted(grid.ports.get(pos, ())):
            dx, dy = DIR_VECTORS[d]
            nxt = (pos[0] + dx, pos[1] + dy)
            if nxt in prev or opposite(d) not in grid.ports.get(nxt, ()):
                continue
            prev[nxt] = pos
            queue.append(nxt)
    if dst not in prev:
        return []
    path = []
    cur = dst
    while cur is not None:
        path.append(cur)
        cur = prev[cur]
    return list(reversed(path))[1:-1]


def _channels_near(grid: PortGrid, center, limit: int = 20):
    """Channel positions by breadth-first distance from a block."""
    from .fabric import DIR_VECTORS, opposite

    seen = {center}
    queue = [center]
    out = []
    while queue and len(out) < limit:
        pos = queue.pop(0)
        if not grid.is_trap(pos):
            out.append(pos)
        for d in sorted(grid.ports.get(pos, ())):
            dx, dy = DIR_VECTORS[d]
            nxt = (pos[0] + dx, pos[1] + dy)
            if nxt not in seen and opposite(d) in grid.ports.get(nxt, ()):
                seen.add(nxt)
                queue.append(nxt)
    return out


def _maybe_relocate(grid: PortGrid, pa, pb):
    """Pull an unconnected endpoint next to its partner before routing."""
    def dist(u, v):
        return abs(u[0] - v[0]) + abs(u[1] - v[1])

    if grid.is_trap(pb) and not grid.ports[pb]:
        spot = _free_slot_near(grid, pa)
        if spot is not None and dist(pa, spot) < dist(pa, pb):
            grid.move_trap(pb, spot)
            return pa, spot
    elif grid.is_trap(pa) and not grid.ports[pa]:
        spot = _free_slot_near(grid, pb)
        if spot is not None and dist(pb, spot) < dist(pa, pb):
            grid.move_trap(pa, spot)
            return spot, pb
    return pa, pb


def _free_slot_near(grid: PortGrid, center):
    for ring in range(1, 12):
        cells = [(i, j) for i in range(-ring, ring + 1)
                 for j in range(-ring, ring + 1)
                 if max(abs(i), abs(j)) == ring]
        for i, j in sorted(cells, key=lambda c: (c[1], c[0])):
            pos = (center[0] + 2 * i, center[1] + 2 * j)
            between = (center[0] + i, center[1] + j)
            if not grid.occupied(pos) and (ring > 1 or
                                           not grid.is_trap(between)):
                return pos
    return None


def connect(layout: Layout, loc_a: str, loc_b: str) -> Layout:
    """Join two gate locations with a straight or L-shaped channel.

    No-op when a path already exists. Crossings of existing channels are
    upgraded to intersections.
    """
    for name in (loc_a, loc_b):
        if name not in layout.gate_locations:
            raise KeyError(f"unknown gate location {name!r}")
    grid = _grid_from_layout(layout)
    pa = layout.gate_locations[loc_a].position
    pb = layout.gate_locations[loc_b].position
    if grid.connected(pa, pb):
        return layout
    grid.route(pa, pb)
    return grid.realize()


def _grid_from_layout(layout: Layout) -> PortGrid:
    from .fabric import DIR_VECTORS, opposite

    grid = PortGrid()
    for b in layout.blocks:
        if b.is_trap:
            grid.add_trap(b.position, b.gate_name)
            # Dangling trap ports are uncommitted: an unconnected dead end
            # may be re-rotated by the router.
            kept = set()
            for d in b.ports:
                dx, dy = DIR_VECTORS[d]
                other = layout.by_position.get((b.col + dx, b.row + dy))
                if other is not None and opposite(d) in other.ports:
                    kept.add(d)
            grid.ports[b.position] = kept
        else:
            grid.ports[b.position] = set(b.ports)
    return grid
