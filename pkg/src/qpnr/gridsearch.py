"""Grid-based layout generation: cell enumeration, tiling, and search.

A primitive cell is a w x h arrangement of macroblocks (positions may be
empty). A cell is valid when every open port lines up with an open port of
the neighboring position under toroidal tiling (rule A, checked against
the cell's own opposite edge) and the resulting movement graph is a single
connected component (rule B). Valid cells are tiled to cover the circuit's
qubits, evaluated by simulated scheduling over systematic and random
placements, and the minimum-latency (cell, placement) pair wins.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from multiprocessing import Pool

from .circuit import InstructionSequence
from .dataflow import build_dataflow, critical_path_priorities
from .fabric import (
    DIR_VECTORS,
    Layout,
    MacroblockKind,
    PlacedMacroblock,
    TechnologyParams,
    area,
    opposite,
    rotated_ports,
)
from .scheduler import Schedule, schedule

_KIND_CODES = {
    MacroblockKind.STRAIGHT_CHANNEL: "S",
    MacroblockKind.GATE_CHANNEL: "G",
    MacroblockKind.TURN: "T",
    MacroblockKind.THREE_WAY: "Y",
    MacroblockKind.FOUR_WAY: "X",
    MacroblockKind.DEAD_END: "D",
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

# Entry options in canonical enumeration order: empty first, then each kind
# in library order at each of its distinct rotations.
OPTIONS: tuple[tuple[MacroblockKind, int] | None, ...] = (None,) + tuple(
    (kind, rot) for kind in MacroblockKind for rot in kind.canonical_rotations)


@dataclass(frozen=True)
class Cell:
    width: int
    height: int
    entries: tuple[tuple[MacroblockKind, int] | None, ...]  # row-major

    def entry(self, x: int, y: int):
        return self.entries[y * self.width + x]

    def encode(self) -> str:
        codes = ["-" if e is None else f"{_KIND_CODES[e[0]]}{e[1]}"
                 for e in self.entries]
        return f"{self.width}x{self.height}:" + ",".join(codes)

    def gate_count(self) -> int:
        return sum(1 for e in self.entries
                   if e is not None and e[0] is MacroblockKind.GATE_CHANNEL)

    def trap_count(self) -> int:
        return sum(1 for e in self.entries
                   if e is not None and e[0].has_trap)


def decode_cell(text: str) -> Cell:
    dims, body = text.split(":", 1)
    w, h = (int(v) for v in dims.split("x"))
    entries = []
    for code in body.split(","):
        if code == "-":
            entries.append(None)
        else:
            entries.append((_CODE_KINDS[code[0]], int(code[1:])))
    if len(entries) != w * h:
        raise ValueError(f"cell {text!r} has wrong entry count")
    return Cell(w, h, tuple(entries))


def _ports(entry) -> frozenset[int]:
    if entry is None:
        return frozenset()
    return rotated_ports(entry[0], entry[1])


def cell_is_valid(cell: Cell) -> bool:
    """Rule A (toroidal port matching) and rule B (single component)."""
    w, h = cell.width, cell.height
    occupied = []
    for y in range(h):
        for x in range(w):
            ports = _ports(cell.entry(x, y))
            if cell.entry(x, y) is not None:
                occupied.append((x, y))
            for d in (1, 2):  # E and S cover every interface once
                dx, dy = DIR_VECTORS[d]
                nports = _ports(cell.entry((x + dx) % w, (y + dy) % h))
                if (d in ports) != (opposite(d) in nports):
                    return False
    if not occupied:
        return False
    # Flood fill across matched ports under wraparound adjacency.
    seen = {occupied[0]}
    stack = [occupied[0]]
    while stack:
        x, y = stack.pop()
        for d in _ports(cell.entry(x, y)):
            dx, dy = DIR_VECTORS[d]
            nxt = ((x + dx) % w, (y + dy) % h)
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(occupied)


def enumerate_valid_cells(width: int, height: int):
    """Yield every valid cell of the given size in canonical order.

    Backtracking fill in row-major order; port constraints against already
    placed west/north neighbors (with wraparound once a row or column
    completes) prune the search long before completion.
    """
    if width < 1 or height < 1:
        raise ValueError("cell dimensions must be at least 1x1")
    total = width * height
    entries: list = [None] * total

    def compatible(idx: int, option) -> bool:
        x, y = idx % width, idx // width
        ports = _ports(option)
        # West neighbor (wraps when this is the last column).
        if width == 1:
            if (1 in ports) != (3 in ports):
                return False
        else:
            if x > 0:
                wports = _ports(entries[idx - 1])
                if (3 in ports) != (1 in wports):
                    return False
            if x == width - 1:
                eports = _ports(entries[idx - (width - 1)])
                if (1 in ports) != (3 in eports):
                    return False
        # North neighbor (wraps when this is the last row).
        if height == 1:
            if (0 in ports) != (2 in ports):
                return False
        else:
            if y > 0:
                nports = _ports(entries[idx - width])
                if (0 in ports) != (2 in nports):
                    return False
            if y == height - 1:
                sports = _ports(entries[idx % width])
                if (2 in ports) != (0 in sports):
                    return False
        return True

    def fill(idx: int):
        if idx == total:
            cell = Cell(width, height, tuple(entries))
            if cell_is_valid(cell):
                yield cell
            return
        for option in OPTIONS:
            if compatible(idx, option):
                entries[idx] = option
                yield from fill(idx + 1)
        entries[idx] = None

    yield from fill(0)


QPOS_CELL = Cell(2, 2, (
    (MacroblockKind.FOUR_WAY, 0),
    (MacroblockKind.GATE_CHANNEL, 0),
    (MacroblockKind.STRAIGHT_CHANNEL, 90),
    None,
))


@dataclass(frozen=True)
class Tiling:
    cell: Cell
    nx: int
    ny: int
    layout: Layout

    def cell_origin(self, k: int) -> tuple[int, int]:
        ty, tx = divmod(k, self.nx)
        return tx * self.cell.width, ty * self.cell.height


def tile(cell: Cell, nx: int, ny: int) -> Tiling:
    """Tile nx x ny copies of the cell into a layout.

    Gate channels become named gate locations; dead ends stay unnamed
    storage traps.
    """
    blocks = []
    for ty in range(ny):
        for tx in range(nx):
            for cy in range(cell.height):
                for cx in range(cell.width):
                    entry = cell.entry(cx, cy)
                    if entry is None:
                        continue
                    kind, rot = entry
                    x = tx * cell.width + cx
                    y = ty * cell.height + cy
                    name = (f"g{x}_{y}"
                            if kind is MacroblockKind.GATE_CHANNEL else None)
                    blocks.append(PlacedMacroblock(kind, x, y, rot, name))
    return Tiling(cell, nx, ny, Layout(blocks))


def tiling_for(cell: Cell, n_qubits: int) -> Tiling:
    """Most-square tiling with at least one cell per qubit."""
    import math

    nx = max(1, math.ceil(math.sqrt(max(n_qubits, 1))))
    ny = max(1, math.ceil(n_qubits / nx)) if n_qubits else 1
    return tile(cell, nx, ny)


def _cell_traps(tiling: Tiling, k: int) -> list[PlacedMacroblock]:
    ox, oy = tiling.cell_origin(k)
    traps = []
    for cy in range(tiling.cell.height):
        for cx in range(tiling.cell.width):
            entry = tiling.cell.entry(cx, cy)
            if entry is not None and entry[0].has_trap:
                traps.append(tiling.layout.by_position[(ox + cx, oy + cy)])
    return traps


def systematic_placement(tiling: Tiling, qubits: list[str]) -> dict[str, int]:
    """One qubit per cell, left to right then top to bottom."""
    n_cells = tiling.nx * tiling.ny
    if len(qubits) > n_cells:
        raise ValueError(f"{len(qubits)} qubits need more than "
                         f"{n_cells} cells")
    placement = {}
    for k, q in enumerate(qubits):
        traps = _cell_traps(tiling, k)
        if not traps:
            raise ValueError("cell has no gate or storage block to hold a qubit")
        placement[q] = traps[0].block_id
    return placement


def random_placements(layout: Layout, qubits: list[str], count: int,
                      seed: int) -> list[dict[str, int]]:
    """Seed-reproducible injective placements onto trap blocks."""
    traps = [b.block_id for b in layout.trap_blocks()]
    if len(traps) < len(qubits):
        raise ValueError("not enough trap blocks for all qubits")
    out = []
    for k in range(count):
        rng = random.Random(seed * 1000003 + k)
        out.append(dict(zip(qubits, rng.sample(traps, len(qubits)))))
    return out


@dataclass(frozen=True)
class CellStats:
    encoding: str
    evaluated: int
    deadlocks: int
    min_latency: float | None
    mean_latency: float | None
    max_latency: float | None


@dataclass(frozen=True)
class GridSearchResult:
    best_cell: Cell
    best_tiling: tuple[int, int]
    best_layout: Layout
    best_placement: dict[str, int]
    best_latency: float
    best_area: int
    per_cell: tuple[CellStats, ...]
    cells_tried: int
    cells_skipped: int


class GridSearchError(RuntimeError):
    pass


def evaluate_cell(cell: Cell, seq: InstructionSequence,
                  tech: TechnologyParams, placements_per_cell: int,
                  seed: int):
    """Schedule seq on the tiled cell over systematic + random placements.

    Returns (stats, best) where best is (latency, placement, tiling) for
    the cell's best placement, or None if every placement deadlocked.
    """
    qubits = seq.qubit_order()
    tiling = tiling_for(cell, len(qubits))
    placements = [systematic_placement(tiling, qubits)]
    placements += random_placements(tiling.layout, qubits,
                                    placements_per_cell, seed)
    priorities = critical_path_priorities(build_dataflow(seq), seq, tech)
    latencies = []
    best = None
    deadlocks = 0
    for placement in placements:
        result = schedule(seq, tiling.layout, placement, priorities,
                          None, tech)
        if isinstance(result, Schedule):
            latencies.append(result.total_latency)
            if best is None or result.total_latency < best[0]:
                best = (result.total_latency, placement)
        else:
            deadlocks += 1
    stats = CellStats(
        cell.encode(), len(placements), deadlocks,
        min(latencies) if latencies else None,
        sum(latencies) / len(latencies) if latencies else None,
        max(latencies) if latencies else None)
    if best is None:
        return stats, None
    return stats, (best[0], best[1], tiling)


def _search_task(args):
    index, cell, seq, tech, placements_per_cell, seed = args
    stats, best = evaluate_cell(cell, seq, tech, placements_per_cell,
                                seed + index)
    return index, cell, stats, best


def grid_search(seq: InstructionSequence,
                cell_sizes: list[tuple[int, int]],
                tech: TechnologyParams = TechnologyParams(),
                placements_per_cell: int = 10,
                seed: int = 0,
                jobs: int = 1,
                cells: list[Cell] | None = None) -> GridSearchResult:
    """Exhaustive search over valid cells of the requested sizes.

    Valid cells lacking a gate location (or any trap) cannot run the
    circuit and are skipped. The argmin over every evaluated (cell,
    placement) pair is returned; ties break on smaller layout area, then
    on the canonical cell encoding. Serial and parallel runs reduce in
    enumeration order and agree exactly.
    """
    if not cell_sizes and cells is None:
        raise ValueError("no cell sizes requested")
    candidates: list[Cell] = list(cells) if cells is not None else []
    if cells is None:
        for (w, h) in cell_sizes:
            candidates.extend(enumerate_valid_cells(w, h))
    runnable = []
    skipped = 0
    for cell in candidates:
        if cell.gate_count() >= 1 and cell.trap_count() >= 1:
            runnable.append(cell)
        else:
            skipped += 1
    tasks = [(i, cell, seq, tech, placements_per_cell, seed)
             for i, cell in enumerate(runnable)]
    if jobs > 1 and len(tasks) > 1:
        with Pool(jobs) as pool:
            outcomes = pool.map(_search_task, tasks, chunksize=8)
    else:
        outcomes = [_search_task(t) for t in tasks]

    per_cell = []
    best = None  # (latency, area, encoding, placement, tiling, cell)
    for index, cell, stats, cell_best in sorted(outcomes):
        per_cell.append(stats)
        if cell_best is None:
            continue
        latency, placement, tiling = cell_best
        key = (latency, area(tiling.layout), cell.encode())
        if best is None or key < best[:3]:
            best = (*key, placement, tiling, cell)
    if best is None:
        raise GridSearchError(
            f"circuit deadlocks on all {len(runnable)} candidate cells")
    latency, best_area, _, placement, tiling, cell = best
    return GridSearchResult(
        best_cell=cell, best_tiling=(tiling.nx, tiling.ny),
        best_layout=tiling.layout, best_placement=placement,
        best_latency=latency, best_area=best_area,
        per_cell=tuple(per_cell), cells_tried=len(runnable),
        cells_skipped=skipped)


def per_cell_csv(result: GridSearchResult) -> str:
    """CSV of per-cell latency spread for variance plots."""
    lines = ["cell,evaluated,deadlocks,min,mean,max"]
    def fmt(x):
        return "" if x is None else f"{x:.6g}"
    for st in result.per_cell:
        lines.append(f"{st.encoding},{st.evaluated},{st.deadlocks},"
                     f"{fmt(st.min_latency)},{fmt(st.mean_latency)},"
                     f"{fmt(st.max_latency)}")
    return "".join(line + "\n" for line in lines)
