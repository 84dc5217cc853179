import random

import pytest

from qpnr.fabric import (
    E,
    N,
    S,
    W,
    InvalidLayoutError,
    Layout,
    MacroblockKind as MK,
    PlacedMacroblock as PMB,
    TechnologyParams,
    area,
    derive_movement_graph,
    hop_charge,
    load_layout,
    path_latency,
    rotate_layout,
    save_layout,
    shortest_costs,
    shortest_path,
)

TECH = TechnologyParams()


def straight_row(n, gate_at=()):
    """n horizontally-ported blocks in a row; positions in gate_at get traps."""
    blocks = []
    for i in range(n):
        if i in gate_at:
            blocks.append(PMB(MK.GATE_CHANNEL, i, 0, 0, gate_name=f"g{i}"))
        else:
            blocks.append(PMB(MK.STRAIGHT_CHANNEL, i, 0, 0))
    return Layout(blocks)


def test_technology_params_validation():
    with pytest.raises(ValueError):
        TechnologyParams(t_turn=1, t_straight=1)
    with pytest.raises(ValueError):
        TechnologyParams(t_one_qubit_gate=0)


def test_gate_on_turn_rejected():
    with pytest.raises(ValueError):
        PMB(MK.TURN, 0, 0, 0, gate_name="g")
    with pytest.raises(ValueError):
        PMB(MK.FOUR_WAY, 0, 0, 0, gate_name="g")


def test_rotation_maps_ports():
    assert PMB(MK.TURN, 0, 0, 0).ports == {N, E}
    assert PMB(MK.TURN, 0, 0, 90).ports == {E, S}
    assert PMB(MK.DEAD_END, 0, 0, 180).ports == {S}
    assert PMB(MK.STRAIGHT_CHANNEL, 0, 0, 90).ports == \
        PMB(MK.STRAIGHT_CHANNEL, 0, 0, 270).ports == {N, S}


def test_single_dead_end_graph():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 0, gate_name="g")])
    g = derive_movement_graph(layout, TECH)
    assert g.vertices == (0,)
    assert g.edges == {}


def test_three_straights_path_graph():
    g = derive_movement_graph(straight_row(3), TECH)
    assert g.edges == {(0, 1): TECH.t_straight, (1, 0): TECH.t_straight,
                       (1, 2): TECH.t_straight, (2, 1): TECH.t_straight}


def test_turn_block_edge_costs_more():
    # L shape: horizontal straight, a turn facing W+S, a vertical straight.
    layout = Layout([
        PMB(MK.STRAIGHT_CHANNEL, 0, 0, 0),
        PMB(MK.TURN, 1, 0, 180),           # ports S,W
        PMB(MK.STRAIGHT_CHANNEL, 1, 1, 90),
    ])
    g = derive_movement_graph(layout, TECH)
    ids = {b.position: b.block_id for b in layout.blocks}
    a, t, b = ids[(0, 0)], ids[(1, 0)], ids[(1, 1)]
    assert g.edges[(a, t)] == TECH.t_turn
    assert g.edges[(t, b)] == TECH.t_turn
    # Exact traversal cost: straight into the turn, then a turning hop out.
    path, cost = shortest_path(g, a, b)
    assert path == [a, t, b]
    assert cost == TECH.t_straight + TECH.t_turn
    assert cost > 2 * TECH.t_straight


def test_port_mismatch_reports_positions():
    # Vertical straight's N/S ports face the horizontal row: mismatch.
    layout = Layout([PMB(MK.STRAIGHT_CHANNEL, 0, 0, 0),
                     PMB(MK.STRAIGHT_CHANNEL, 1, 0, 90)])
    with pytest.raises(InvalidLayoutError) as err:
        derive_movement_graph(layout, TECH)
    assert (0, 0) in err.value.positions and (1, 0) in err.value.positions


def test_open_port_to_empty_is_allowed():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 90)])  # port E faces nothing
    assert layout.port_violations() == []


def test_area_examples():
    assert area(Layout([PMB(MK.DEAD_END, 0, 0)])) == 1
    assert area(Layout([PMB(MK.DEAD_END, 0, 0),
                        PMB(MK.DEAD_END, 2, 1)])) == 6
    with pytest.raises(ValueError):
        area(Layout([]))


def test_shortest_path_trivia():
    g = derive_movement_graph(straight_row(3), TECH)
    assert shortest_path(g, 1, 1) == ([], 0.0)
    path, cost = shortest_path(g, 0, 2)
    assert path == [0, 1, 2]
    assert cost == 2 * TECH.t_straight


def test_disconnected_no_path():
    layout = Layout([PMB(MK.DEAD_END, 0, 0, 90),
                     PMB(MK.DEAD_END, 5, 0, 90)])
    g = derive_movement_graph(layout, TECH)
    path, cost = shortest_path(g, 0, 1)
    assert path is None and cost == float("inf")


def test_congestion_penalty_reroutes():
    # A 2x3 ring of four-ways: two equal routes; penalizing one forces the other.
    blocks = [PMB(MK.FOUR_WAY, c, r, 0) for c in range(3) for r in range(2)]
    g = derive_movement_graph(Layout(blocks), TECH)
    ids = {b.position: b.block_id for b in Layout(blocks).blocks}
    src, dst = ids[(0, 0)], ids[(2, 0)]
    path, _ = shortest_path(g, src, dst)
    assert path == [ids[(0, 0)], ids[(1, 0)], ids[(2, 0)]]
    penal = {ids[(1, 0)]: 100.0}
    path2, cost2 = shortest_path(g, src, dst, penal)
    assert ids[(1, 0)] not in path2
    assert cost2 == path_latency(g, path2)


def test_movement_graph_symmetric():
    rng = random.Random(3)
    for _ in range(20):
        layout = random_connected_layout(rng)
        g = derive_movement_graph(layout, TECH)
        for (a, b), lat in g.edges.items():
            assert g.edges[(b, a)] == lat


def brute_force_shortest(g, src, dst):
    """Oracle: enumerate all simple paths, recompute each latency."""
    if src == dst:
        return [], 0.0
    best = (float("inf"), None)
    stack = [(src, [src])]
    while stack:
        node, path = stack.pop()
        for _, nbr in g.neighbors[node]:
            if nbr in path:
                continue
            cand = path + [nbr]
            if nbr == dst:
                cost = path_latency(g, cand)
                if (cost, cand) < (best[0], best[1] or [float("inf")]):
                    best = (cost, cand)
            else:
                stack.append((nbr, cand))
    return best[1], best[0]


def random_connected_layout(rng, max_blocks=10):
    """Grow a random valid layout by port-painting a connected tree of cells."""
    from qpnr.fabric import DIR_VECTORS, kind_for_ports, opposite

    ports: dict[tuple[int, int], set[int]] = {(0, 0): set()}
    for _ in range(rng.randint(1, max_blocks - 1)):
        origin = rng.choice(sorted(ports))
        d = rng.randrange(4)
        dx, dy = DIR_VECTORS[d]
        target = (origin[0] + dx, origin[1] + dy)
        ports[origin].add(d)
        ports.setdefault(target, set()).add(opposite(d))
    blocks = []
    for (c, r), ps in sorted(ports.items()):
        if not ps:
            ps = {N}
        kind, rot = kind_for_ports(frozenset(ps), trap=False)
        blocks.append(PMB(kind, c, r, rot))
    return Layout(blocks)


def test_shortest_path_matches_bruteforce():
    rng = random.Random(42)
    for _ in range(40):
        layout = random_connected_layout(rng)
        g = derive_movement_graph(layout, TECH)
        n = len(layout)
        src, dst = rng.randrange(n), rng.randrange(n)
        path, cost = shortest_path(g, src, dst)
        bpath, bcost = brute_force_shortest(g, src, dst)
        assert cost == bcost
        assert path == bpath
        if path:
            assert path_latency(g, path) == cost


def test_shortest_costs_agree_with_shortest_path():
    rng = random.Random(17)
    for _ in range(15):
        layout = random_connected_layout(rng)
        g = derive_movement_graph(layout, TECH)
        costs = shortest_costs(g, 0)
        for dst in range(len(layout)):
            _, cost = shortest_path(g, 0, dst)
            assert costs.get(dst, float("inf")) == cost


def test_rotating_layout_preserves_area_and_distances():
    rng = random.Random(5)
    for _ in range(10):
        layout = random_connected_layout(rng)
        rot = rotate_layout(layout)
        assert area(layout) == area(rot)
        g0 = derive_movement_graph(layout, TECH)
        g1 = derive_movement_graph(rot, TECH)
        # Rotation permutes positions; map block ids by rotated coordinates.
        min_c = min(-b.row for b in layout.blocks)
        min_r = min(b.col for b in layout.blocks)
        mapping = {}
        for b in layout.blocks:
            pos = (-b.row - min_c, b.col - min_r)
            mapping[b.block_id] = rot.by_position[pos].block_id
        for a_id in range(len(layout)):
            for b_id in range(len(layout)):
                _, c0 = shortest_path(g0, a_id, b_id)
                _, c1 = shortest_path(g1, mapping[a_id], mapping[b_id])
                assert c0 == c1


def test_layout_roundtrip():
    layout = Layout([
        PMB(MK.GATE_CHANNEL, 0, 0, 0, gate_name="ga"),
        PMB(MK.STRAIGHT_CHANNEL, 1, 0, 0),
        PMB(MK.TURN, 2, 0, 180),
        PMB(MK.DEAD_END, 2, 1, 0),
    ])
    text = save_layout(layout)
    again = load_layout(text)
    assert save_layout(again) == text
    assert [b.kind for b in again.blocks] == [b.kind for b in layout.blocks]
    assert again.gate_locations.keys() == {"ga"}


def test_hop_charge_rule():
    assert hop_charge(TECH, None, E) == TECH.t_straight
    assert hop_charge(TECH, E, E) == TECH.t_straight
    assert hop_charge(TECH, E, S) == TECH.t_turn
