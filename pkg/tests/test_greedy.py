import pytest

from qpnr.circuit import make_sequence, parse_qasm
from qpnr.fabric import (
    Layout,
    MacroblockKind as MK,
    PlacedMacroblock as PMB,
    TechnologyParams,
    area,
    save_layout,
)
from qpnr.greedy import GreedyResult, connect, greedy_layout
from qpnr.validate import validate_schedule

TECH = TechnologyParams()


def test_single_qubit_circuit():
    res = greedy_layout(parse_qasm("H Q0"), TECH)
    assert len(res.layout) == 1
    assert area(res.layout) == 1
    assert res.connects == 0
    assert res.schedule.total_latency == TECH.t_one_qubit_gate


def test_empty_sequence_rejected():
    with pytest.raises(ValueError):
        greedy_layout(parse_qasm(""), TECH)


def test_single_cx_connects_pair():
    seq = parse_qasm("CX Q0,Q1")
    res = greedy_layout(seq, TECH)
    assert isinstance(res, GreedyResult)
    # Two gate locations joined by one straight channel.
    assert len(res.layout.gate_locations) == 2
    assert sum(1 for b in res.layout.blocks
               if b.kind is MK.STRAIGHT_CHANNEL) == 1
    assert res.connects == 1
    assert validate_schedule(res.schedule, seq, res.layout, TECH) == []


def test_connect_straight_no_intersections():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 0, gate_name="a"),
                     PMB(MK.DEAD_END, 2, 0, 0, gate_name="b")])
    out = connect(layout, "a", "b")
    assert len(out) == 3
    center = out.by_position[(1, 0)]
    assert center.kind is MK.STRAIGHT_CHANNEL
    assert not any(b.kind in (MK.THREE_WAY, MK.FOUR_WAY) for b in out.blocks)


def test_connect_idempotent_when_path_exists():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 90, gate_name="a"),
                     PMB(MK.STRAIGHT_CHANNEL, 1, 0, 0),
                     PMB(MK.DEAD_END, 2, 0, 270, gate_name="b")])
    out = connect(layout, "a", "b")
    assert save_layout(out) == save_layout(layout)


def test_connect_crossing_inserts_one_fourway():
    # A vertical channel between two dead ends; connecting two gates across
    # it horizontally must upgrade exactly one straight to a four-way.
    layout = Layout([
        PMB(MK.DEAD_END, 2, -2, 180),            # top cap, port S
        PMB(MK.STRAIGHT_CHANNEL, 2, -1, 90),
        PMB(MK.STRAIGHT_CHANNEL, 2, 1, 90),
        PMB(MK.DEAD_END, 2, 2, 0),               # bottom cap, port N
        PMB(MK.STRAIGHT_CHANNEL, 2, 0, 90),      # the crossing cell
        PMB(MK.DEAD_END, 0, 0, 90, gate_name="a"),
        PMB(MK.DEAD_END, 4, 0, 270, gate_name="b"),
    ])
    out = connect(layout, "a", "b")
    fourways = [b for b in out.blocks if b.kind is MK.FOUR_WAY]
    assert len(fourways) == 1
    assert fourways[0].position == (2, 0)
    straights_before = sum(1 for b in layout.blocks
                           if b.kind is MK.STRAIGHT_CHANNEL)
    straights_after = sum(1 for b in out.blocks
                          if b.kind is MK.STRAIGHT_CHANNEL)
    # The crossing straight was replaced; two new straights were laid.
    assert straights_after == straights_before - 1 + 2
    assert out.port_violations() == []


def test_connect_unknown_location():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 0, gate_name="a")])
    with pytest.raises(KeyError):
        connect(layout, "a", "zz")


def test_greedy_small_circuits_complete_and_validate():
    circuits = [
        "H Q0\nCX Q0,Q1\nH Q1",
        "CX Q0,Q1\nCX Q1,Q2\nCX Q2,Q0",
        "H A\nH B\nCX A,B\nCX B,C\nMEASURE C",
        "CX Q0,Q1\nCX Q2,Q3\nCX Q0,Q2\nCX Q1,Q3",
    ]
    for text in circuits:
        seq = parse_qasm(text)
        res = greedy_layout(seq, TECH)
        assert validate_schedule(res.schedule, seq, res.layout, TECH) == []
        assert res.layout.port_violations() == []


def test_greedy_monotone_connectivity():
    # Re-run a multi-connect circuit and check pairs only accumulate.
    seq = parse_qasm("CX Q0,Q1\nCX Q1,Q2\nCX Q0,Q2")
    res = greedy_layout(seq, TECH)
    g = res.layout.movement_graph(TECH)
    # All three gates end up mutually reachable.
    ids = [res.layout.gate_locations[f"g_{q}"].block_id
           for q in ("Q0", "Q1", "Q2")]
    from qpnr.fabric import shortest_path
    for a in ids:
        for b in ids:
            path, cost = shortest_path(g, a, b)
            assert path is not None
