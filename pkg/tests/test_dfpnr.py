import random

import pytest

from qpnr.circuit import make_sequence, parse_qasm
from qpnr.dataflow import build_dataflow, input_node, is_input
from qpnr.dfpnr import (
    DataflowError,
    GroupGraph,
    dataflow_layout,
    init_group_graph,
    merge_groups,
    place_groups,
    route_groups,
    select_merge,
    weights_from_layout,
)
from qpnr.fabric import MacroblockKind as MK, TechnologyParams
from qpnr.validate import validate_schedule

TECH = TechnologyParams()


def fig_shaped_sequence():
    """Nine H/CX instructions on Q0..Q3 with chains A-E-I and C-F-G-H-I."""
    return make_sequence(
        [("H", ("Q0",)), ("H", ("Q1",)), ("H", ("Q2",)), ("H", ("Q3",)),
         ("CX", ("Q0", "Q1")), ("CX", ("Q2", "Q3")), ("CX", ("Q1", "Q2")),
         ("CX", ("Q2", "Q3")), ("CX", ("Q0", "Q2"))],
        labels=list("ABCDEFGHI"))


def test_init_groups_partition():
    seq = fig_shaped_sequence()
    gg = init_group_graph(build_dataflow(seq))
    # Nine instruction groups plus four input groups.
    assert len(gg.groups) == 13
    members = [m for g in gg.groups.values() for m in g.members]
    assert len(members) == len(set(members)) == 13


def test_init_groups_empty_circuit():
    seq = parse_qasm("")
    gg = init_group_graph(build_dataflow(seq))
    assert len(gg.groups) == 0


def printed_weight_graph():
    """The worked merge example: hand-assigned edge weights.

    Q0's chain A-E-I weighs 6+8=14; Q2's chain C-F-G-H-I weighs
    4+4+5+2=15 with the 5-weight G-H edge as its heaviest.
    """
    seq = fig_shaped_sequence()
    gg = init_group_graph(build_dataflow(seq))
    gid = {m: g for g, grp in gg.groups.items() for m in grp.members}
    A, B, C, D, E, F, G, H, I = (gid[i] for i in range(9))
    weights = {
        (gid[input_node(q)], gid[first]): 0.0
        for q, first in (("Q0", 0), ("Q1", 1), ("Q2", 2), ("Q3", 3))}
    weights.update({
        (A, E): 6.0, (E, I): 8.0,
        (B, E): 3.0, (E, G): 1.0,
        (C, F): 4.0, (F, G): 4.0, (G, H): 5.0, (H, I): 2.0,
        (D, F): 2.0, (F, H): 1.0,
    })
    gg.weights = weights
    return seq, gg, (A, B, C, D, E, F, G, H, I)


def test_select_merge_follows_worked_example():
    seq, gg, ids = printed_weight_graph()
    A, B, C, D, E, F, G, H, I = ids
    # First pick: Q2's path is longest (15 > 14); its heaviest edge is G-H.
    assert select_merge(gg) == (G, H)
    gg2 = merge_groups(gg, H, G)  # merged at H's location
    # Reweight as stated: F-G drops to match F-H, E-G absorbs former G-H.
    gg2.weights[(F, H)] = 1.0
    gg2.weights[(E, H)] = 6.0
    for k in ((F, G), (G, H), (E, G)):
        gg2.weights.pop(k, None)
    # Now A-E-I (14) is critical and its weight-8 E-I edge merges NG5/NG9.
    assert select_merge(gg2) == (E, I)


def test_select_merge_convergence_and_input_rule():
    seq = parse_qasm("CX Q0,Q1")
    gg = init_group_graph(build_dataflow(seq))
    assert select_merge(gg) is None  # all weights zero
    in0 = gg.node_group[input_node("Q0")]
    in1 = gg.node_group[input_node("Q1")]
    instr = gg.node_group[0]
    gg.weights = {(in0, instr): 5.0, (in1, instr): 3.0}
    first = select_merge(gg)
    assert first == (in0, instr)
    merged = merge_groups(gg, instr, in0)
    merged.weights = {(in1, instr): 3.0}
    # Merging the other input in as well would put two input nodes in one
    # group; the candidate is skipped and the search converges.
    assert select_merge(merged) is None


def test_merge_rejects_double_inputs():
    seq = parse_qasm("CX Q0,Q1")
    gg = init_group_graph(build_dataflow(seq))
    in0 = gg.node_group[input_node("Q0")]
    in1 = gg.node_group[input_node("Q1")]
    with pytest.raises(ValueError):
        merge_groups(gg, in0, in1)


def test_random_merges_keep_partition_invariants():
    rng = random.Random(4)
    seq = fig_shaped_sequence()
    for _ in range(30):
        gg = init_group_graph(build_dataflow(seq))
        for _ in range(rng.randint(1, 8)):
            gids = sorted(gg.groups)
            a, b = rng.sample(gids, 2)
            try:
                gg = merge_groups(gg, a, b)
            except ValueError:
                continue
        nodes = [m for g in gg.groups.values() for m in g.members]
        assert len(nodes) == len(set(nodes)) == 13
        for g in gg.groups.values():
            assert g.input_count() <= 1
        for node, gid in gg.node_group.items():
            assert node in gg.groups[gid].members


def test_place_columns_by_depth():
    seq = parse_qasm("H Q0\nH Q0\nH Q0")
    gg = init_group_graph(build_dataflow(seq))
    placement = place_groups(gg, fold=False, global_channels=1)
    xs = sorted(x for x, _ in placement.grid_pos.values())
    assert xs == [0, 3, 6, 9]  # input, then one column per chain step
    # Column index strictly exceeds every dependency predecessor's.
    depthx = {gid: x for gid, (x, _) in placement.grid_pos.items()}
    for u, v in gg.edges():
        assert depthx[u] < depthx[v]


def test_fold_rule():
    from qpnr.dfpnr import _fold

    assert _fold([[1, 2, 3, 4], [5]]) == [[1, 2, 3, 4], [5]]
    assert _fold([[1, 2, 3, 4], [5], [6, 7, 8, 9, 10]]) == \
        [[1, 2, 3, 4, 5], [6, 7, 8, 9, 10]]
    assert _fold([[1], [2], [3]]) == [[1], [2], [3]]


def test_route_globals_count():
    # Four independent one-qubit instructions: a 2x2 group grid once the
    # four input groups are merged away; use four distinct qubits so the
    # placement is 2 columns (input, gate) x 4 rows, then check a crafted
    # 2x2 case directly.
    seq = make_sequence([("H", ("Q0",)), ("H", ("Q1",))])
    gg = init_group_graph(build_dataflow(seq))
    gg = merge_groups(gg, gg.node_group[0], gg.node_group[input_node("Q0")])
    gg = merge_groups(gg, gg.node_group[1], gg.node_group[input_node("Q1")])
    # Two groups, same depth -> one column of height 2: no gaps, no globals.
    placement = route_groups(place_groups(gg, False, 1), gg, 1)
    assert len(placement.layout.gate_locations) == 2
    assert MK.FOUR_WAY not in [b.kind for b in placement.layout.blocks]

    seq = make_sequence([("H", ("Q0",)), ("H", ("Q1",)),
                         ("X", ("Q0",)), ("X", ("Q1",))])
    gg = init_group_graph(build_dataflow(seq))
    for q, first in (("Q0", 0), ("Q1", 1)):
        gg = merge_groups(gg, gg.node_group[first],
                          gg.node_group[input_node(q)])
    placement = place_groups(gg, False, 1)
    routed = route_groups(placement, gg, 1)
    # 2x2 group grid with one global channel per gap: one vertical global
    # (x=2) and one horizontal global (y=1), meeting at one intersection.
    crossing = routed.layout.by_position[(2, 1)]
    assert crossing.kind is MK.FOUR_WAY
    horizontals = [b for b in routed.layout.blocks if b.row == 1]
    verticals = [b for b in routed.layout.blocks if b.col == 2]
    assert {b.col for b in horizontals} == {0, 1, 2, 3}
    assert {b.row for b in verticals} == {0, 1, 2}
    assert routed.layout.port_violations() == []


def test_weights_from_layout_match_distances():
    seq = parse_qasm("H Q0\nH Q0")
    gg = init_group_graph(build_dataflow(seq))
    placement = route_groups(place_groups(gg, False, 1), gg, 1)
    w = weights_from_layout(gg, placement.layout, placement.locations, TECH)
    assert all(v > 0 for v in w.values())
    assert len(w) == len(gg.edges())


def run_dataflow(text, **kw):
    seq = parse_qasm(text)
    res = dataflow_layout(seq, TECH, **kw)
    assert validate_schedule(res.schedule, seq, res.layout, TECH) == []
    return seq, res


def test_dataflow_single_instruction():
    seq, res = run_dataflow("H Q0")
    assert res.schedule.total_latency >= TECH.t_one_qubit_gate
    assert len(res.layout.gate_locations) >= 1


def test_dataflow_small_circuits_complete():
    for text in ("H Q0\nCX Q0,Q1\nH Q1",
                 "CX Q0,Q1\nCX Q1,Q2\nCX Q0,Q2",
                 "H A\nH B\nCX A,B\nMEASURE A"):
        run_dataflow(text)
        run_dataflow(text, fold=True)
        run_dataflow(text, global_channels=2)


def test_dataflow_single_location_guarantee():
    seq, res = run_dataflow(
        "H Q0\nH Q1\nH Q2\nH Q3\nCX Q0,Q1\nCX Q2,Q3\nCX Q1,Q2\n"
        "CX Q2,Q3\nCX Q0,Q2")
    starts = {e.instruction: e.block for e in res.schedule.events
              if e.kind == "gate-start"}
    for group in res.group_graph.groups.values():
        blocks = {starts[m] for m in group.members if not is_input(m)}
        assert len(blocks) <= 1
