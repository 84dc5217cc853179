import pytest

from qpnr.circuit import parse_qasm
from qpnr.fabric import MacroblockKind as MK, TechnologyParams, area
from qpnr.gridsearch import (
    QPOS_CELL,
    Cell,
    cell_is_valid,
    decode_cell,
    enumerate_valid_cells,
    evaluate_cell,
    grid_search,
    per_cell_csv,
    random_placements,
    systematic_placement,
    tile,
    tiling_for,
)

TECH = TechnologyParams()


def test_1x1_fourway_valid():
    assert cell_is_valid(Cell(1, 1, ((MK.FOUR_WAY, 0),)))


def test_1x1_deadend_invalid():
    assert not cell_is_valid(Cell(1, 1, ((MK.DEAD_END, 0),)))


def test_1x1_enumeration():
    cells = list(enumerate_valid_cells(1, 1))
    assert [c.encode() for c in cells] == \
        ["1x1:S0", "1x1:S90", "1x1:G0", "1x1:G90", "1x1:X0"]


def test_empty_cell_invalid():
    assert not cell_is_valid(Cell(2, 2, (None,) * 4))


def test_qpos_cell_is_enumerated():
    cells = list(enumerate_valid_cells(2, 2))
    assert QPOS_CELL in cells
    # Deterministic, duplicate-free canonical order.
    encodings = [c.encode() for c in cells]
    assert len(set(encodings)) == len(encodings)
    assert encodings == sorted(encodings, key=encodings.index)


def test_3x2_enumeration_order_of_magnitude():
    # Soft bound: the library admits a few thousand valid 3x2 cells.
    count = sum(1 for _ in enumerate_valid_cells(3, 2))
    assert 100 <= count <= 20000


def test_enumerated_cells_tile_to_valid_layouts():
    for i, cell in enumerate(enumerate_valid_cells(2, 2)):
        if i % 7:  # sample for speed; order is deterministic
            continue
        tiling = tile(cell, 2, 2)
        assert tiling.layout.port_violations() == []


def test_tile_identity_and_area():
    tiling = tile(QPOS_CELL, 1, 1)
    assert len(tiling.layout) == 3
    t22 = tile(QPOS_CELL, 2, 2)
    assert area(t22.layout) == 4 * 4
    graph = t22.layout.movement_graph(TECH)
    # Flood fill: the tiled movement graph is one connected component.
    seen = {0}
    stack = [0]
    while stack:
        for _, nbr in graph.neighbors[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    assert seen == set(graph.vertices)


def test_systematic_placement():
    tiling = tile(QPOS_CELL, 3, 3)
    placement = systematic_placement(tiling, [f"Q{i}" for i in range(7)])
    assert len(set(placement.values())) == 7
    # Qubit k sits in cell k, row-major: first cell's gate is at (1,0).
    assert tiling.layout.by_id[placement["Q0"]].position == (1, 0)
    assert tiling.layout.by_id[placement["Q1"]].position == (3, 0)
    assert tiling.layout.by_id[placement["Q3"]].position == (1, 2)
    with pytest.raises(ValueError, match="cells"):
        systematic_placement(tile(QPOS_CELL, 2, 2), [f"Q{i}" for i in range(5)])


def test_random_placements():
    tiling = tile(QPOS_CELL, 3, 3)
    qubits = [f"Q{i}" for i in range(5)]
    assert random_placements(tiling.layout, qubits, 0, 7) == []
    a = random_placements(tiling.layout, qubits, 5, 7)
    b = random_placements(tiling.layout, qubits, 5, 7)
    assert a == b
    for pl in a:
        assert len(set(pl.values())) == len(qubits)
    assert random_placements(tiling.layout, qubits, 5, 8) != a


def test_cell_encode_roundtrip():
    assert decode_cell(QPOS_CELL.encode()) == QPOS_CELL


SMALL = parse_qasm("H Q0\nCX Q0,Q1\nH Q1\nCX Q1,Q2\nH Q2")


def test_singleton_search_equals_direct_evaluation():
    stats, best = evaluate_cell(QPOS_CELL, SMALL, TECH, 2, seed=3)
    res = grid_search(SMALL, [], TECH, placements_per_cell=2, seed=3,
                      cells=[QPOS_CELL])
    assert best is not None
    assert res.best_latency == best[0]
    assert res.best_cell == QPOS_CELL


def test_search_superset_dominates():
    cells = list(enumerate_valid_cells(2, 2))
    res_all = grid_search(SMALL, [(2, 2)], TECH, placements_per_cell=1, seed=0)
    res_qpos = grid_search(SMALL, [], TECH, placements_per_cell=1, seed=0,
                           cells=[QPOS_CELL])
    assert QPOS_CELL in cells
    assert res_all.best_latency <= res_qpos.best_latency


def test_parallel_matches_serial():
    kw = dict(placements_per_cell=1, seed=5)
    serial = grid_search(SMALL, [(2, 2)], TECH, jobs=1, **kw)
    parallel = grid_search(SMALL, [(2, 2)], TECH, jobs=2, **kw)
    assert serial.best_latency == parallel.best_latency
    assert serial.best_cell == parallel.best_cell
    assert serial.best_placement == parallel.best_placement
    assert per_cell_csv(serial) == per_cell_csv(parallel)


def test_per_cell_stats_spread():
    stats, _ = evaluate_cell(QPOS_CELL, SMALL, TECH, 8, seed=1)
    assert stats.evaluated == 9
    assert stats.min_latency is not None
    assert stats.min_latency <= stats.mean_latency <= stats.max_latency


def test_tiling_for_squareness():
    t = tiling_for(QPOS_CELL, 7)
    assert (t.nx, t.ny) == (3, 3)
    t = tiling_for(QPOS_CELL, 23)
    assert (t.nx, t.ny) == (5, 5)
    t = tiling_for(QPOS_CELL, 49)
    assert (t.nx, t.ny) == (7, 7)
