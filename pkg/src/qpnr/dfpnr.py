"""Dataflow-driven place and route.

Every dataflow node (instruction or dummy qubit input) starts in its own
node group; groups map one-to-one onto gate locations. The layout places
groups in dependency-depth columns (optionally folded to square the
bounding box, barycenter-sorted to keep connected groups level), routes
short local channels plus full-length global channels, and schedules with
per-instruction gate annotations. Each iteration merges the two groups
joined by the heaviest edge on the heaviest per-qubit path, eliminating
that move; storage dead-ends are grown next to congested groups, and the
best iterate seen is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import InstructionSequence
from .dataflow import (
    DataflowGraph,
    Node,
    build_dataflow,
    gate_latency,
    input_node,
    is_input,
    movement_aware_priorities,
    qubit_chain,
)
from .fabric import Layout, TechnologyParams
from .painter import PortGrid
from .scheduler import DeadlockReport, Schedule, schedule


class DataflowError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeGroup:
    id: int
    members: frozenset
    storage: int = 0

    def input_count(self) -> int:
        return sum(1 for m in self.members if is_input(m))

    def min_instruction(self) -> int:
        ids = [m for m in self.members if not is_input(m)]
        return min(ids) if ids else -1

    def max_instruction(self) -> int:
        ids = [m for m in self.members if not is_input(m)]
        return max(ids) if ids else -1


@dataclass
class GroupGraph:
    df: DataflowGraph
    groups: dict[int, NodeGroup]
    node_group: dict[Node, int]
    weights: dict[tuple[int, int], float] = field(default_factory=dict)

    def group_of(self, node: Node) -> int:
        return self.node_group[node]

    def edges(self) -> list[tuple[int, int]]:
        """Directed inter-group dependency edges, deduplicated and sorted."""
        seen = set()
        for arc in self.df.arcs:
            gu, gv = self.node_group[arc.src], self.node_group[arc.dst]
            if gu != gv:
                seen.add((gu, gv))
        return sorted(seen)

    def weight(self, gu: int, gv: int) -> float:
        if gu == gv:
            return 0.0
        return self.weights.get((gu, gv), 0.0)

    def qubit_group_path(self, qubit: str) -> list[int]:
        path = []
        for node in qubit_chain(self.df, qubit):
            gid = self.node_group[node]
            if not path or path[-1] != gid:
                path.append(gid)
        return path

    def qubits(self) -> list[str]:
        return sorted(a.qubit for a in self.df.arcs
                      if is_input(a.src))


def init_group_graph(df: DataflowGraph) -> GroupGraph:
    groups = {}
    node_group = {}
    for gid, node in enumerate(df.nodes):
        groups[gid] = NodeGroup(gid, frozenset({node}))
        node_group[node] = gid
    return GroupGraph(df, groups, node_group)


def merge_groups(gg: GroupGraph, keep: int, absorb: int) -> GroupGraph:
    """Join two groups; the kept group id (and thus position) survives."""
    a, b = gg.groups[keep], gg.groups[absorb]
    if a.input_count() + b.input_count() > 1:
        raise ValueError("a node group may hold at most one input node")
    merged = NodeGroup(keep, a.members | b.members,
                       max(a.storage, b.storage))
    groups = {gid: g for gid, g in gg.groups.items() if gid != absorb}
    groups[keep] = merged
    node_group = {n: (keep if g == absorb else g)
                  for n, g in gg.node_group.items()}
    return GroupGraph(gg.df, groups, node_group, dict(gg.weights))


def _edge_order_key(gg: GroupGraph, gu: int, gv: int):
    """Earlier instruction pairs win ties between equal-weight edges."""
    pairs = []
    for arc in gg.df.arcs:
        if gg.node_group[arc.src] == gu and gg.node_group[arc.dst] == gv:
            src = arc.src if not is_input(arc.src) else -1
            pairs.append((arc.dst, src))
    return min(pairs) if pairs else (1 << 30, 1 << 30)


def select_merge(gg: GroupGraph,
                 forbidden: set[frozenset] | None = None
                 ) -> tuple[int, int] | None:
    """Pick the heaviest edge on the heaviest per-qubit group path.

    Qubit paths are weighted by the current edge weights; the winning
    qubit's maximum-weight edge is returned as (src group, dst group).
    Merges that would put two qubit input nodes in one group are skipped
    in favor of the next-heaviest edge. Returns None at convergence (no
    positive-weight candidate remains).
    """
    forbidden = forbidden or set()
    paths = []
    for q in gg.qubits():
        path = gg.qubit_group_path(q)
        total = sum(gg.weight(u, v) for u, v in zip(path, path[1:]))
        paths.append((-total, q, path))
    paths.sort()
    for neg_total, _q, path in paths:
        if neg_total == 0:
            continue
        edges = [(u, v) for u, v in zip(path, path[1:]) if gg.weight(u, v) > 0]
        edges.sort(key=lambda e: (-gg.weight(*e), _edge_order_key(gg, *e)))
        for u, v in edges:
            if frozenset({u, v}) in forbidden:
                continue
            if gg.groups[u].input_count() + gg.groups[v].input_count() > 1:
                continue
            return (u, v)
    return None


def weights_from_layout(gg: GroupGraph, layout: Layout,
                        locations: dict[int, str],
                        tech: TechnologyParams) -> dict[tuple[int, int], float]:
    """Uncongested shortest-path movement latency per inter-group edge."""
    from .fabric import shortest_path

    graph = layout.movement_graph(tech)
    out = {}
    for gu, gv in gg.edges():
        a = layout.gate_locations[locations[gu]].block_id
        b = layout.gate_locations[locations[gv]].block_id
        _, cost = shortest_path(graph, a, b)
        out[(gu, gv)] = cost
    return out


def weights_from_schedule(gg: GroupGraph, seq: InstructionSequence,
                          sched: Schedule) -> dict[tuple[int, int], float]:
    """Observed move latency (movement plus waiting) per inter-group edge."""
    starts = {e.instruction: e.time for e in sched.events
              if e.kind == "gate-start"}
    ends = {e.instruction: e.time for e in sched.events
            if e.kind == "gate-end"}
    out: dict[tuple[int, int], float] = {}
    for arc in gg.df.arcs:
        gu, gv = gg.node_group[arc.src], gg.node_group[arc.dst]
        if gu == gv:
            continue
        dep = 0.0 if is_input(arc.src) else ends.get(arc.src, 0.0)
        w = max(0.0, starts.get(arc.dst, 0.0) - dep)
        key = (gu, gv)
        out[key] = max(out.get(key, 0.0), w)
    return out


# --------------------------------------------------------------- placement

@dataclass(frozen=True)
class GroupPlacement:
    layout: Layout
    locations: dict[int, str]          # group id -> gate location name
    assignment: dict[int, str]         # instruction id -> location name
    initial: dict[str, int]            # qubit -> block id
    grid_pos: dict[int, tuple[int, int]]


def _group_depths(gg: GroupGraph) -> dict[int, int]:
    """Column index per group: deepest member node in the dataflow graph.

    Merging along a critical path may tie groups into a dependency cycle,
    so depths come from the (always acyclic) node-level graph instead of a
    group-level topological order.
    """
    from .dataflow import _topo_order

    ndepth: dict[Node, int] = {}
    for node in _topo_order(gg.df):
        preds = gg.df.predecessors(node)
        ndepth[node] = max((ndepth[a.src] + 1 for a in preds), default=0)
    return {gid: max(ndepth[m] for m in g.members)
            for gid, g in gg.groups.items()}


def _barycenter_sort(columns: list[list[int]], gg: GroupGraph,
                     sweeps: int = 3) -> list[list[int]]:
    pred: dict[int, set[int]] = {}
    succ: dict[int, set[int]] = {}
    for u, v in gg.edges():
        pred.setdefault(v, set()).add(u)
        succ.setdefault(u, set()).add(v)
    cols = [sorted(c) for c in columns]

    def rows_of(col: list[int]) -> dict[int, int]:
        return {g: r for r, g in enumerate(col)}

    for sweep in range(sweeps):
        forward = sweep % 2 == 0
        rng = range(1, len(cols)) if forward else range(len(cols) - 2, -1, -1)
        for c in rng:
            ref = rows_of(cols[c - 1] if forward else cols[c + 1])
            nbrs = pred if forward else succ
            def center(g: int) -> float:
                rs = [ref[n] for n in nbrs.get(g, ()) if n in ref]
                return sum(rs) / len(rs) if rs else float(cols[c].index(g))
            cols[c] = sorted(cols[c], key=lambda g: (center(g), g))
    return cols


def _fold(columns: list[list[int]]) -> list[list[int]]:
    cols = [list(c) for c in columns]
    i = 1
    while i < len(cols):
        height = max(len(c) for c in cols)
        if len(cols[i - 1]) + len(cols[i]) <= height:
            cols[i - 1].extend(cols[i])
            del cols[i]
        else:
            i += 1
    return cols


def place_groups(gg: GroupGraph, fold: bool = False,
                 global_channels: int = 1) -> GroupPlacement:
    """Column placement: gate locations by dependency depth.

    Column index equals the group's longest dependency depth; columns are
    barycenter-sorted so connected groups sit roughly level, and folding
    joins short columns into their predecessor when the combined height
    still fits the bounding box.
    """
    depth = _group_depths(gg)
    used = sorted(set(depth.values()))
    level = {d: i for i, d in enumerate(used)}  # drop empty depth levels
    columns: list[list[int]] = [[] for _ in used]
    for gid in sorted(gg.groups):
        columns[level[depth[gid]]].append(gid)
    columns = _barycenter_sort(columns, gg)
    if fold:
        columns = _fold(columns)
    px = 2 + global_channels
    py = 1 + global_channels
    grid_pos = {}
    for c, col in enumerate(columns):
        for r, gid in enumerate(col):
            grid_pos[gid] = (c * px, r * py)
    blocks = []
    locations = {}
    from .fabric import MacroblockKind, PlacedMacroblock

    for gid, (x, y) in sorted(grid_pos.items()):
        name = f"ng{gid}"
        locations[gid] = name
        blocks.append(PlacedMacroblock(
            MacroblockKind.GATE_CHANNEL, x, y, 0, gate_name=name))
    layout = Layout(blocks)
    assignment = {}
    for gid, group in gg.groups.items():
        for m in group.members:
            if not is_input(m):
                assignment[m] = locations[gid]
    initial = {}
    for q in gg.qubits():
        gid = gg.node_group[input_node(q)]
        initial[q] = layout.gate_locations[locations[gid]].block_id
    return GroupPlacement(layout, locations, assignment, initial, grid_pos)


# ----------------------------------------------------------------- routing

def route_groups(placement: GroupPlacement, gg: GroupGraph,
                 global_channels: int = 1) -> GroupPlacement:
    """Paint local channels per edge plus full-length global channels.

    Local channels run on a track hugging the east side of each column;
    edges spanning several columns ride a horizontal global channel.
    Crossings become intersections by construction.
    """
    G = global_channels
    px, py = 2 + G, 1 + G
    grid = PortGrid()
    pos = placement.grid_pos
    for gid, (x, y) in sorted(pos.items()):
        grid.add_trap((x, y), placement.locations[gid])
    if pos:
        max_x = max(x for x, _ in pos.values())
        max_y = max(y for _, y in pos.values())
    else:
        max_x = max_y = 0
    ncols = max_x // px + 1
    nrows = max_y // py + 1

    # Global channels: G verticals per column gap, G horizontals per row gap.
    for c in range(ncols - 1):
        for k in range(G):
            x = c * px + 2 + k
            _paint_run(grid, [(x, y) for y in range(0, max_y + 1)])
    for r in range(nrows - 1):
        for k in range(G):
            y = r * py + 1 + k
            _paint_run(grid, [(x, y) for x in range(0, max_x + 1)])

    for gu, gv in gg.edges():
        # Channels are direction-free; route left-to-right geometrically.
        a, b = sorted((pos[gu], pos[gv]))
        _route_edge(grid, a, b, px, py, max_y, nrows)

    for gid in sorted(gg.groups):
        for _ in range(min(gg.groups[gid].storage, 4)):
            x, y = pos[gid]
            spot = None
            for track in ((x + 1, y), (x - 1, y)):
                if track in grid.ports and not grid.is_trap(track):
                    spot = grid.add_storage_spur(track)
                    if spot is not None:
                        break
            if spot is None:
                break
    layout = grid.realize()
    initial = {q: layout.gate_locations[placement.locations[
        gg.node_group[input_node(q)]]].block_id for q in gg.qubits()}
    return GroupPlacement(layout, placement.locations, placement.assignment,
                          initial, placement.grid_pos)


def _paint_run(grid: PortGrid, cells: list[tuple[int, int]]) -> None:
    for a, b in zip(cells, cells[1:]):
        grid.paint_step(a, grid._step_dir(a, b))


def _route_edge(grid: PortGrid, upos, vpos, px: int, py: int,
                max_y: int, nrows: int) -> None:
    (ux, uy), (vx, vy) = upos, vpos
    track_x = ux + 1
    if ux == vx:
        # Same column: east spurs joined by a track segment.
        grid.paint_step((ux, uy), 1)
        grid.paint_step((vx, vy), 1)
        _paint_run(grid, _span((track_x, uy), (track_x, vy)))
        return
    if vx - ux == px:
        # Adjacent column: track down/up to the target row, then across.
        grid.paint_step((ux, uy), 1)
        _paint_run(grid, _span((track_x, uy), (track_x, vy)))
        _paint_run(grid, _span((track_x, vy), (vx, vy)))
        return
    # Distant column: ride a horizontal global channel.
    if nrows > 1:
        gap = min(uy // py, vy // py, nrows - 2)
        gy = gap * py + 1
    else:
        gy = max_y + 1  # single-row graphs get one outer channel
    grid.paint_step((ux, uy), 1)
    _paint_run(grid, _span((track_x, uy), (track_x, gy)))
    _paint_run(grid, _span((track_x, gy), (vx - 1, gy)))
    _paint_run(grid, _span((vx - 1, gy), (vx - 1, vy)))
    _paint_run(grid, _span((vx - 1, vy), (vx, vy)))


def _span(a, b) -> list[tuple[int, int]]:
    (ax, ay), (bx, by) = a, b
    if ax == bx:
        step = 1 if by >= ay else -1
        return [(ax, y) for y in range(ay, by + step, step)]
    if ay == by:
        step = 1 if bx >= ax else -1
        return [(x, ay) for x in range(ax, bx + step, step)]
    raise ValueError("span must be axis-aligned")


# -------------------------------------------------------------- main loop

@dataclass(frozen=True)
class DataflowResult:
    layout: Layout
    assignment: dict[int, str]
    initial: dict[str, int]
    schedule: Schedule
    group_graph: GroupGraph
    merges: int
    iterations: int


def dataflow_layout(seq: InstructionSequence,
                    tech: TechnologyParams = TechnologyParams(),
                    fold: bool = False,
                    global_channels: int = 1,
                    max_merges: int | None = None,
                    congestion_threshold: float = 2.0,
                    stale_limit: int = 5) -> DataflowResult:
    """Iterate place, route, annotated-schedule, merge; return the best seen.

    A deadlocking merge is rolled back and never retried. Congested groups
    (waiting longer than congestion_threshold times their gate time) grow
    storage dead-ends, up to four; persisting congestion halts the loop.
    """
    if max_merges is None:
        max_merges = len(seq.instructions)
    df = build_dataflow(seq)
    gg = init_group_graph(df)
    best: DataflowResult | None = None
    forbidden: set[frozenset] = set()
    undo: list[tuple[GroupGraph, tuple[int, int]]] = []
    merges = 0
    iterations = 0
    stale = 0
    while True:
        iterations += 1
        placement = route_groups(place_groups(gg, fold, global_channels),
                                 gg, global_channels)
        node_assign = {n: placement.locations[gg.node_group[n]]
                       for n in gg.node_group}
        priorities = movement_aware_priorities(
            df, seq, placement.layout, node_assign, tech)
        result = schedule(seq, placement.layout, placement.initial,
                          priorities, placement.assignment, tech)
        if isinstance(result, DeadlockReport):
            if merges == 0:
                raise DataflowError(
                    f"unmerged group graph deadlocks on instruction "
                    f"{result.blocked_instruction}")
            gg, undone = undo.pop()
            forbidden.add(frozenset(undone))
            merges -= 1
            continue
        current = DataflowResult(placement.layout, placement.assignment,
                                 placement.initial, result, gg, merges,
                                 iterations)
        if best is None or result.total_latency < best.schedule.total_latency:
            best = current
            stale = 0
        else:
            stale += 1
        # Congestion relief: grow storage next to over-waiting groups.
        congested = _congested_groups(gg, seq, result, congestion_threshold)
        if congested:
            unrelievable = [g for g in congested
                            if gg.groups[g].storage >= 4]
            if unrelievable:
                break  # persisting congestion: halt and emit best seen
            groups = dict(gg.groups)
            for g in congested:
                groups[g] = NodeGroup(g, groups[g].members,
                                      groups[g].storage + 1)
            gg = GroupGraph(gg.df, groups, dict(gg.node_group),
                            dict(gg.weights))
            continue
        if merges >= max_merges or stale >= stale_limit:
            break
        gg.weights = weights_from_schedule(gg, seq, result)
        sel = select_merge(gg, forbidden)
        if sel is None:
            break
        keep = _keep_side(gg, seq, result, *sel)
        absorb = sel[0] if keep == sel[1] else sel[1]
        undo.append((gg, sel))
        gg = merge_groups(gg, keep, absorb)
        merges += 1
    assert best is not None
    return best


def _congested_groups(gg: GroupGraph, seq, sched: Schedule,
                      threshold: float) -> list[int]:
    waits: dict[int, float] = {}
    gates: dict[int, float] = {}
    for ins in seq.instructions:
        gid = gg.node_group[ins.id]
        rec = sched.stalls.get(ins.id)
        if rec is not None:
            waits[gid] = waits.get(gid, 0.0) + rec.wait
    starts = {e.instruction: e.time for e in sched.events
              if e.kind == "gate-start"}
    ends = {e.instruction: e.time for e in sched.events
            if e.kind == "gate-end"}
    for ins in seq.instructions:
        gid = gg.node_group[ins.id]
        gates[gid] = gates.get(gid, 0.0) + ends[ins.id] - starts[ins.id]
    out = []
    for gid in sorted(gg.groups):
        if len([m for m in gg.groups[gid].members if not is_input(m)]) < 2:
            continue  # only merged groups accumulate contention worth relief
        if waits.get(gid, 0.0) > threshold * gates.get(gid, 0.0) > 0:
            out.append(gid)
    return out


def _keep_side(gg: GroupGraph, seq, sched: Schedule, gu: int, gv: int) -> int:
    """Higher scheduler utilization keeps its position; ties keep the
    group holding the later instruction."""
    starts = {e.instruction: e.time for e in sched.events
              if e.kind == "gate-start"}
    ends = {e.instruction: e.time for e in sched.events
            if e.kind == "gate-end"}

    def busy(gid: int) -> float:
        return sum(ends[m] - starts[m]
                   for m in gg.groups[gid].members
                   if not is_input(m) and m in starts)

    bu, bv = busy(gu), busy(gv)
    if bu != bv:
        return gu if bu > bv else gv
    return gu if gg.groups[gu].max_instruction() > \
        gg.groups[gv].max_instruction() else gv
