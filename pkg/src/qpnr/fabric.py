"""Macroblock library, planar layouts, and the derived movement graph.

Blocks sit on an integer (col, row) grid; row grows southward. A block's
open ports are its base ports rotated clockwise by its rotation. Ions hop
between blocks through matched open ports; a hop is charged t_turn when
the ion changes direction relative to its previous hop, else t_straight
(the first hop of a journey from rest is always straight).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

N, E, S, W = 0, 1, 2, 3
DIR_VECTORS = {N: (0, -1), E: (1, 0), S: (0, 1), W: (-1, 0)}
DIR_NAMES = {N: "N", E: "E", S: "S", W: "W"}
DIR_BY_NAME = {v: k for k, v in DIR_NAMES.items()}


def opposite(direction: int) -> int:
    return (direction + 2) % 4


class MacroblockKind(Enum):
    STRAIGHT_CHANNEL = "StraightChannel"
    GATE_CHANNEL = "GateChannel"
    TURN = "Turn"
    THREE_WAY = "ThreeWayIntersection"
    FOUR_WAY = "FourWayIntersection"
    DEAD_END = "DeadEnd"

    @property
    def base_ports(self) -> frozenset[int]:
        return _BASE_PORTS[self]

    @property
    def has_trap(self) -> bool:
        """True for kinds with a trap region (gates or storage)."""
        return self in (MacroblockKind.GATE_CHANNEL, MacroblockKind.DEAD_END)

    @property
    def canonical_rotations(self) -> tuple[int, ...]:
        return _CANONICAL_ROTATIONS[self]


_BASE_PORTS = {
    MacroblockKind.STRAIGHT_CHANNEL: frozenset({E, W}),
    MacroblockKind.GATE_CHANNEL: frozenset({E, W}),
    MacroblockKind.TURN: frozenset({N, E}),
    MacroblockKind.THREE_WAY: frozenset({N, E, W}),
    MacroblockKind.FOUR_WAY: frozenset({N, E, S, W}),
    MacroblockKind.DEAD_END: frozenset({N}),
}

_CANONICAL_ROTATIONS = {
    MacroblockKind.STRAIGHT_CHANNEL: (0, 90),
    MacroblockKind.GATE_CHANNEL: (0, 90),
    MacroblockKind.TURN: (0, 90, 180, 270),
    MacroblockKind.THREE_WAY: (0, 90, 180, 270),
    MacroblockKind.FOUR_WAY: (0,),
    MacroblockKind.DEAD_END: (0, 90, 180, 270),
}

KIND_BY_NAME = {k.value: k for k in MacroblockKind}

# Port sets reachable by rotating each kind, keyed for fast selection.
def rotated_ports(kind: MacroblockKind, rotation: int) -> frozenset[int]:
    step = (rotation // 90) % 4
    return frozenset((p + step) % 4 for p in kind.base_ports)


def rotation_for_ports(kind: MacroblockKind, ports: frozenset[int]) -> int | None:
    """The smallest rotation giving the kind exactly these open ports."""
    for rot in (0, 90, 180, 270):
        if rotated_ports(kind, rot) == ports:
            return rot
    return None


def kind_for_ports(ports: frozenset[int], trap: bool) -> tuple[MacroblockKind, int]:
    """Pick the minimal macroblock kind realizing a port set.

    Trap blocks (gate/storage) only exist with 1 or 2-opposite ports; channel
    blocks cover every other realizable port set.
    """
    n = len(ports)
    if n == 0:
        raise ValueError("a macroblock needs at least one open port")
    if trap:
        if n == 1:
            kind = MacroblockKind.DEAD_END
        elif n == 2 and opposite(min(ports)) in ports:
            kind = MacroblockKind.GATE_CHANNEL
        else:
            raise ValueError(f"no trap-capable kind with ports {sorted(ports)}")
    elif n == 1:
        kind = MacroblockKind.DEAD_END
    elif n == 2:
        kind = (MacroblockKind.STRAIGHT_CHANNEL
                if opposite(min(ports)) in ports else MacroblockKind.TURN)
    elif n == 3:
        kind = MacroblockKind.THREE_WAY
    else:
        kind = MacroblockKind.FOUR_WAY
    rot = rotation_for_ports(kind, ports)
    assert rot is not None
    return kind, rot


@dataclass(frozen=True)
class TechnologyParams:
    """Gate and movement latencies in microseconds."""

    t_one_qubit_gate: float = 1
    t_two_qubit_gate: float = 10
    t_measure: float = 50
    t_straight: float = 1
    t_turn: float = 3

    def __post_init__(self):
        vals = (self.t_one_qubit_gate, self.t_two_qubit_gate, self.t_measure,
                self.t_straight, self.t_turn)
        if any(v <= 0 for v in vals):
            raise ValueError("technology latencies must be strictly positive")
        if self.t_turn <= self.t_straight:
            raise ValueError("t_turn must exceed t_straight")


@dataclass(frozen=True)
class PlacedMacroblock:
    kind: MacroblockKind
    col: int
    row: int
    rotation: int = 0
    gate_name: str | None = None
    block_id: int = -1

    def __post_init__(self):
        if self.rotation not in (0, 90, 180, 270):
            raise ValueError(f"bad rotation {self.rotation}")
        if self.gate_name is not None and not self.kind.has_trap:
            raise ValueError(
                f"{self.kind.value} at ({self.col},{self.row}) cannot host a gate")

    @property
    def position(self) -> tuple[int, int]:
        return (self.col, self.row)

    @property
    def ports(self) -> frozenset[int]:
        return rotated_ports(self.kind, self.rotation)

    @property
    def is_gate(self) -> bool:
        return self.gate_name is not None

    @property
    def is_trap(self) -> bool:
        return self.kind.has_trap


class InvalidLayoutError(ValueError):
    def __init__(self, message: str, positions: list[tuple[int, int]] = ()):
        super().__init__(message)
        self.positions = list(positions)


class Layout:
    """An immutable planar composition of placed macroblocks.

    Block ids are assigned deterministically in (col, row) order. Open ports
    may face the exterior or an empty grid position; a port facing a
    neighboring block must be matched by an open port on the other side.
    """

    def __init__(self, blocks):
        ordered = sorted(blocks, key=lambda b: (b.col, b.row))
        positions: dict[tuple[int, int], PlacedMacroblock] = {}
        final = []
        for i, b in enumerate(ordered):
            if b.position in positions:
                raise InvalidLayoutError(
                    f"two macroblocks at {b.position}", [b.position])
            nb = PlacedMacroblock(b.kind, b.col, b.row, b.rotation,
                                  b.gate_name, block_id=i)
            positions[nb.position] = nb
            final.append(nb)
        self.blocks: tuple[PlacedMacroblock, ...] = tuple(final)
        self.by_position = positions
        self.by_id = {b.block_id: b for b in final}
        names = [b.gate_name for b in final if b.gate_name is not None]
        if len(names) != len(set(names)):
            raise InvalidLayoutError("duplicate gate location names")
        self.gate_locations: dict[str, PlacedMacroblock] = {
            b.gate_name: b for b in final if b.gate_name is not None}
        self._graphs: dict[TechnologyParams, MovementGraph] = {}

    def __len__(self) -> int:
        return len(self.blocks)

    def trap_blocks(self) -> list[PlacedMacroblock]:
        return [b for b in self.blocks if b.is_trap]

    def port_violations(self) -> list[tuple[int, int]]:
        """Positions whose open ports face a closed side of a neighbor."""
        bad = set()
        for b in self.blocks:
            for d in b.ports:
                dx, dy = DIR_VECTORS[d]
                other = self.by_position.get((b.col + dx, b.row + dy))
                if other is not None and opposite(d) not in other.ports:
                    bad.add(b.position)
                    bad.add(other.position)
        return sorted(bad)

    def movement_graph(self, tech: TechnologyParams) -> "MovementGraph":
        if tech not in self._graphs:
            self._graphs[tech] = derive_movement_graph(self, tech)
        return self._graphs[tech]


def area(layout: Layout) -> int:
    """Bounding-box size in macroblocks (empty interior positions count)."""
    if not layout.blocks:
        raise ValueError("empty layout has no area")
    cols = [b.col for b in layout.blocks]
    rows = [b.row for b in layout.blocks]
    return (max(cols) - min(cols) + 1) * (max(rows) - min(rows) + 1)


class MovementGraph:
    """Occupancy-slot graph: one vertex per block, edges across matched ports.

    Each symmetric edge carries a summary latency: t_turn when either
    endpoint forces a direction change for any ion passing through it via
    this interface, else t_straight. Exact path costs are heading-dependent
    and are computed by shortest_path.
    """

    def __init__(self, layout: Layout, tech: TechnologyParams):
        self.layout = layout
        self.tech = tech
        self.vertices = tuple(b.block_id for b in layout.blocks)
        self.neighbors: dict[int, tuple[tuple[int, int], ...]] = {}
        self.edges: dict[tuple[int, int], float] = {}
        for b in layout.blocks:
            nbrs = []
            for d in sorted(b.ports):
                dx, dy = DIR_VECTORS[d]
                other = layout.by_position.get((b.col + dx, b.row + dy))
                if other is None or opposite(d) not in other.ports:
                    continue
                nbrs.append((d, other.block_id))
                lat = tech.t_turn if (_forces_turn(b, d) or
                                      _forces_turn(other, opposite(d))) \
                    else tech.t_straight
                self.edges[(b.block_id, other.block_id)] = lat
            self.neighbors[b.block_id] = tuple(nbrs)


def _forces_turn(block: PlacedMacroblock, port: int) -> bool:
    # Passing through this block via this port necessarily changes direction.
    return len(block.ports) >= 2 and opposite(port) not in block.ports


def derive_movement_graph(layout: Layout, tech: TechnologyParams) -> MovementGraph:
    bad = layout.port_violations()
    if bad:
        raise InvalidLayoutError(f"mismatched interior ports at {bad}", bad)
    return MovementGraph(layout, tech)


def hop_charge(tech: TechnologyParams, heading: int | None, direction: int) -> float:
    """Latency of one hop: straight from rest or along the previous heading."""
    return tech.t_straight if heading is None or heading == direction \
        else tech.t_turn


def shortest_path(g: MovementGraph, src: int, dst: int,
                  penalty: dict[int, float] | None = None,
                  forbidden: frozenset[int] | set[int] | None = None
                  ) -> tuple[list[int] | None, float]:
    """Minimum-latency path between blocks, turn-aware.

    Returns (block list including both endpoints, latency); ([], 0) when
    src == dst and (None, inf) when unreachable. Per-block penalties are
    added on entering a block; forbidden blocks are never entered. Ties
    break on the lexicographically smallest block-id sequence.
    """
    if src == dst:
        return [], 0.0
    penalty = penalty or {}
    forbidden = forbidden or frozenset()
    # State: (block, heading). Heap entries carry the path for tie-breaking.
    start = (src, -1)
    best: dict[tuple[int, int], tuple[float, tuple[int, ...]]] = {
        start: (0.0, (src,))}
    heap: list[tuple[float, tuple[int, ...], int, int]] = [(0.0, (src,), src, -1)]
    done: set[tuple[int, int]] = set()
    goal: tuple[float, tuple[int, ...]] | None = None
    while heap:
        cost, path, block, heading = heapq.heappop(heap)
        state = (block, heading)
        if state in done or (cost, path) != best.get(state, (None, None)):
            continue
        done.add(state)
        if block == dst:
            if goal is None or (cost, path) < goal:
                goal = (cost, path)
            continue
        if goal is not None and cost > goal[0]:
            break
        for d, nbr in g.neighbors[block]:
            if nbr in forbidden:
                continue
            w = hop_charge(g.tech, None if heading < 0 else heading, d)
            w += penalty.get(nbr, 0.0)
            cand = (cost + w, path + (nbr,))
            key = (nbr, d)
            if key not in done and (key not in best or cand < best[key]):
                best[key] = cand
                heapq.heappush(heap, (cand[0], cand[1], nbr, d))
    if goal is None:
        return None, float("inf")
    return list(goal[1]), goal[0]


def shortest_costs(g: MovementGraph, src: int,
                   penalty: dict[int, float] | None = None,
                   forbidden: frozenset[int] | set[int] | None = None
                   ) -> dict[int, float]:
    """Single-source minimum latencies to every reachable block."""
    penalty = penalty or {}
    forbidden = forbidden or frozenset()
    best: dict[tuple[int, int], float] = {(src, -1): 0.0}
    out: dict[int, float] = {src: 0.0}
    heap: list[tuple[float, int, int]] = [(0.0, src, -1)]
    while heap:
        cost, block, heading = heapq.heappop(heap)
        if cost > best.get((block, heading), float("inf")):
            continue
        for d, nbr in g.neighbors[block]:
            if nbr in forbidden:
                continue
            w = hop_charge(g.tech, None if heading < 0 else heading, d)
            w += penalty.get(nbr, 0.0)
            nc = cost + w
            key = (nbr, d)
            if nc < best.get(key, float("inf")):
                best[key] = nc
                if nc < out.get(nbr, float("inf")):
                    out[nbr] = nc
                heapq.heappush(heap, (nc, nbr, d))
    return out


def path_latency(g: MovementGraph, path: list[int]) -> float:
    """Recompute a path's latency from scratch (validator arithmetic)."""
    total = 0.0
    heading: int | None = None
    for a, b in zip(path, path[1:]):
        d = _direction_between(g.layout, a, b)
        total += hop_charge(g.tech, heading, d)
        heading = d
    return total


def _direction_between(layout: Layout, a: int, b: int) -> int:
    ba, bb = layout.by_id[a], layout.by_id[b]
    delta = (bb.col - ba.col, bb.row - ba.row)
    for d, vec in DIR_VECTORS.items():
        if vec == delta:
            return d
    raise ValueError(f"blocks {a} and {b} are not adjacent")


def rotate_layout(layout: Layout, quarter_turns: int = 1) -> Layout:
    """Rotate a whole layout 90° clockwise (for symmetry checks)."""
    q = quarter_turns % 4
    blocks = layout.blocks
    for _ in range(q):
        rotated = []
        for b in blocks:
            rotated.append(PlacedMacroblock(
                b.kind, -b.row, b.col, (b.rotation + 90) % 360, b.gate_name))
        min_c = min(b.col for b in rotated) if rotated else 0
        min_r = min(b.row for b in rotated) if rotated else 0
        blocks = tuple(PlacedMacroblock(b.kind, b.col - min_c, b.row - min_r,
                                        b.rotation, b.gate_name)
                       for b in rotated)
    return Layout(blocks)


def save_layout(layout: Layout) -> str:
    """One block per line, ``(col,row) kind rotation [gate-name]``, sorted."""
    lines = []
    for b in layout.blocks:
        line = f"({b.col},{b.row}) {b.kind.value} {b.rotation}"
        if b.gate_name is not None:
            line += f" {b.gate_name}"
        lines.append(line)
    return "".join(line + "\n" for line in lines)


def load_layout(text: str) -> Layout:
    blocks = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pos, rest = line.split(")", 1)
            col, row = (int(v) for v in pos.lstrip("(").split(","))
            fields = rest.split()
            kind = KIND_BY_NAME[fields[0]]
            rotation = int(fields[1])
            gate_name = fields[2] if len(fields) > 2 else None
        except (ValueError, KeyError, IndexError) as exc:
            raise InvalidLayoutError(f"layout line {line_no}: {raw!r}") from exc
        blocks.append(PlacedMacroblock(kind, col, row, rotation, gate_name))
    return Layout(blocks)
