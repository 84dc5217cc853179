"""Qubit-dependency dataflow graph and critical-path priorities.

Nodes are instruction ids (int) plus one dummy input node per qubit
(the string ``in:<qubit>``). Arcs chain each qubit through its uses in
source order, so the graph is acyclic by construction and fanout per node
is bounded by gate arity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .circuit import InstructionSequence

Node = int | str  # instruction id, or "in:<qubit>" dummy input node


def input_node(qubit: str) -> str:
    return f"in:{qubit}"


def is_input(node: Node) -> bool:
    return isinstance(node, str)


@dataclass(frozen=True)
class Arc:
    src: Node
    dst: Node
    qubit: str


@dataclass(frozen=True)
class DataflowGraph:
    nodes: tuple[Node, ...]
    arcs: tuple[Arc, ...]
    succ: dict[Node, tuple[Arc, ...]] = field(repr=False, default_factory=dict)
    pred: dict[Node, tuple[Arc, ...]] = field(repr=False, default_factory=dict)

    def successors(self, node: Node) -> tuple[Arc, ...]:
        return self.succ.get(node, ())

    def predecessors(self, node: Node) -> tuple[Arc, ...]:
        return self.pred.get(node, ())


def build_dataflow(seq: InstructionSequence) -> DataflowGraph:
    """One arc per consecutive use of a qubit, rooted at its input node."""
    last_use: dict[str, Node] = {}
    arcs: list[Arc] = []
    nodes: list[Node] = [input_node(q) for q in seq.qubit_order()]
    for ins in seq.instructions:
        nodes.append(ins.id)
        for q in ins.operands:
            src = last_use.get(q, input_node(q))
            arcs.append(Arc(src, ins.id, q))
            last_use[q] = ins.id
    succ: dict[Node, list[Arc]] = {}
    pred: dict[Node, list[Arc]] = {}
    for arc in arcs:
        succ.setdefault(arc.src, []).append(arc)
        pred.setdefault(arc.dst, []).append(arc)
    return DataflowGraph(
        tuple(nodes), tuple(arcs),
        {n: tuple(a) for n, a in succ.items()},
        {n: tuple(a) for n, a in pred.items()})


def qubit_chain(df: DataflowGraph, qubit: str) -> list[Node]:
    """The node chain a qubit passes through, starting at its input node."""
    chain: list[Node] = [input_node(qubit)]
    while True:
        nxt = [a.dst for a in df.successors(chain[-1]) if a.qubit == qubit]
        if not nxt:
            return chain
        chain.append(nxt[0])


def edge_list_text(df: DataflowGraph) -> str:
    """Deterministic sorted edge-list dump for golden tests."""
    def key(arc: Arc):
        return (_node_key(arc.src), _node_key(arc.dst), arc.qubit)

    lines = [f"{_node_str(a.src)} -> {_node_str(a.dst)} : {a.qubit}"
             for a in sorted(df.arcs, key=key)]
    return "".join(line + "\n" for line in lines)


def _node_key(node: Node):
    return (0, str(node), 0) if is_input(node) else (1, "", node)


def _node_str(node: Node) -> str:
    return str(node)


def gate_latency(gate: str, tech) -> float:
    if gate == "MEASURE":
        return tech.t_measure
    return tech.t_one_qubit_gate if gate in ("H", "X", "Z", "S", "T") \
        else tech.t_two_qubit_gate


def critical_path_priorities(df: DataflowGraph, seq: InstructionSequence,
                             tech) -> dict[int, float]:
    """Label each instruction with its gate-latency critical path to the end.

    priority(i) = latency(i) + max over successors of priority(successor);
    movement is ignored and input nodes carry zero latency.
    """
    return _priorities(df, seq, tech, arc_weight=None)


def movement_aware_priorities(df: DataflowGraph, seq: InstructionSequence,
                              layout, assignment: dict[Node, str],
                              tech) -> dict[int, float]:
    """Critical-path priorities with uncongested movement on every arc.

    Each arc is additionally weighted with the shortest-path movement
    latency between the two endpoints' assigned gate locations. Instructions
    must all be assigned; input nodes may be (arcs touching an unassigned
    input node carry no movement weight).
    """
    from .fabric import shortest_path

    missing = [i.id for i in seq.instructions if i.id not in assignment]
    if missing:
        raise ValueError(f"assignment missing instructions {missing}")
    graph = layout.movement_graph(tech)
    loc_block = {name: b.block_id for name, b in layout.gate_locations.items()}
    cache: dict[tuple[int, int], float] = {}

    def move_cost(src: Node, dst: Node) -> float:
        a = assignment.get(src)
        b = assignment.get(dst)
        if a is None or b is None:
            return 0.0
        key = (loc_block[a], loc_block[b])
        if key not in cache:
            path, cost = shortest_path(graph, key[0], key[1])
            cache[key] = float("inf") if path is None else cost
        return cache[key]

    return _priorities(df, seq, tech, arc_weight=move_cost)


def _priorities(df: DataflowGraph, seq: InstructionSequence, tech,
                arc_weight) -> dict[int, float]:
    latency = {ins.id: gate_latency(ins.gate, tech) for ins in seq.instructions}
    memo: dict[Node, float] = {}

    order = _topo_order(df)
    for node in reversed(order):
        lat = 0.0 if is_input(node) else latency[node]
        best = 0.0
        for arc in df.successors(node):
            w = memo[arc.dst]
            if arc_weight is not None:
                w += arc_weight(arc.src, arc.dst)
            best = max(best, w)
        memo[node] = lat + best
    return {ins.id: memo[ins.id] for ins in seq.instructions}


def _topo_order(df: DataflowGraph) -> list[Node]:
    indeg = {n: len(df.predecessors(n)) for n in df.nodes}
    ready = sorted((n for n, d in indeg.items() if d == 0), key=_node_key)
    order: list[Node] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for arc in df.successors(node):
            indeg[arc.dst] -= 1
            if indeg[arc.dst] == 0:
                ready.append(arc.dst)
        ready.sort(key=_node_key)
    if len(order) != len(df.nodes):
        raise ValueError("dataflow graph has a cycle")
    return order
