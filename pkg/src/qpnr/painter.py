"""Mutable port-painting grid used by the routers.

Routing is expressed as painting open ports onto grid positions; when the
grid is realized, each position's accumulated port set picks the minimal
macroblock kind (straight, turn, intersection), so crossings become
intersections automatically and the result always satisfies the fabric
port-matching rule. Trap positions (gates and storage) are constrained to
dead-end or straight-through port patterns.
"""

from __future__ import annotations

import heapq
import itertools

from .fabric import (
    DIR_VECTORS,
    Layout,
    MacroblockKind,
    PlacedMacroblock,
    kind_for_ports,
    opposite,
)


class RouteError(RuntimeError):
    pass


class PortGrid:
    def __init__(self):
        self.ports: dict[tuple[int, int], set[int]] = {}
        self.traps: dict[tuple[int, int], str | None] = {}  # pos -> gate name

    # ------------------------------------------------------------ building

    def add_trap(self, pos: tuple[int, int], gate_name: str | None) -> None:
        if pos in self.traps or pos in self.ports:
            raise ValueError(f"position {pos} already used")
        self.traps[pos] = gate_name
        self.ports[pos] = set()

    def move_trap(self, pos, new_pos) -> None:
        if self.ports.get(pos):
            raise ValueError(f"trap at {pos} is connected; cannot move")
        name = self.traps.pop(pos)
        del self.ports[pos]
        self.add_trap(new_pos, name)

    def add_storage_spur(self, pos) -> tuple[int, int] | None:
        """Hang an unnamed storage dead end off a channel block, if room."""
        if self.is_trap(pos) or pos not in self.ports:
            return None
        for d in (0, 1, 2, 3):
            dx, dy = DIR_VECTORS[d]
            spot = (pos[0] + dx, pos[1] + dy)
            if self.occupied(spot):
                continue
            self.add_trap(spot, None)
            self.paint_step(pos, d)
            return spot
        return None

    def occupied(self, pos) -> bool:
        return pos in self.ports

    def is_trap(self, pos) -> bool:
        return pos in self.traps

    def _trap_can_accept(self, pos, port: int) -> bool:
        have = self.ports[pos]
        if port in have:
            return True
        if len(have) == 0:
            return True
        return len(have) == 1 and opposite(port) in have

    def paint(self, pos, port: int) -> None:
        if self.is_trap(pos) and not self._trap_can_accept(pos, port):
            raise RouteError(f"trap at {pos} cannot open port {port}")
        self.ports.setdefault(pos, set()).add(port)

    def paint_step(self, pos, direction: int) -> None:
        """Open the interface between pos and its neighbor along direction."""
        dx, dy = DIR_VECTORS[direction]
        nxt = (pos[0] + dx, pos[1] + dy)
        self.paint(pos, direction)
        self.paint(nxt, opposite(direction))

    # -------------------------------------------------------- connectivity

    def connected(self, a, b) -> bool:
        if a == b:
            return True
        seen = {a}
        stack = [a]
        while stack:
            pos = stack.pop()
            for d in self.ports.get(pos, ()):
                dx, dy = DIR_VECTORS[d]
                nxt = (pos[0] + dx, pos[1] + dy)
                if nxt in seen or opposite(d) not in self.ports.get(nxt, ()):
                    continue
                if nxt == b:
                    return True
                seen.add(nxt)
                stack.append(nxt)
        return False

    # ------------------------------------------------------------- routing

    def route(self, start, goal, fresh: bool = False) -> list[tuple[int, int]]:
        """Paint a corridor of channel blocks joining start and goal.

        Prefers straight x-then-y style paths (turns are penalized).
        Intermediate positions may be empty or existing channel blocks;
        traps are never crossed. In fresh mode existing channels may only
        be crossed perpendicularly, which forces a genuinely new corridor.
        Returns the painted position sequence; raises RouteError if no
        corridor exists.
        """
        if start == goal:
            return [start]

        def h(pos):
            return abs(pos[0] - goal[0]) + abs(pos[1] - goal[1])

        # Corridors stay within a margin around everything already placed;
        # this bounds the search on the otherwise unbounded plane and keeps
        # the fabric compact.
        margin = 1
        anchor = set(self.ports) | {start, goal}
        lo_x = min(p[0] for p in anchor) - margin
        hi_x = max(p[0] for p in anchor) + margin
        lo_y = min(p[1] for p in anchor) - margin
        hi_y = max(p[1] for p in anchor) + margin

        def in_bounds(pos):
            return lo_x <= pos[0] <= hi_x and lo_y <= pos[1] <= hi_y

        core_lo_x = lo_x + margin
        core_hi_x = hi_x - margin
        core_lo_y = lo_y + margin
        core_hi_y = hi_y - margin

        def step_cost(pos, turned: bool) -> int:
            # Reusing an existing channel is cheaper than claiming new area;
            # stepping outside the current footprint is discouraged.
            cost = (1 if self.occupied(pos) else 2) + (1 if turned else 0)
            if not (core_lo_x <= pos[0] <= core_hi_x
                    and core_lo_y <= pos[1] <= core_hi_y):
                cost += 4
            return cost

        counter = itertools.count()
        best: dict[tuple, int] = {}
        heap = []
        for d in self._leave_dirs(start):
            dx, dy = DIR_VECTORS[d]
            nxt = (start[0] + dx, start[1] + dy)
            if not in_bounds(nxt) or not self._may_enter(nxt, d, goal, fresh):
                continue
            g = step_cost(nxt, False)
            state = (nxt, d)
            if best.get(state, 1 << 30) > g:
                best[state] = g
                heapq.heappush(heap, (g + h(nxt), next(counter), g, nxt, d,
                                      (start, nxt)))
        while heap:
            _, _, g, pos, d, path = heapq.heappop(heap)
            if g > best.get((pos, d), 1 << 30):
                continue
            if pos == goal:
                if not self._arrival_ok(goal, d):
                    continue
                for p, q in zip(path, path[1:]):
                    step = self._step_dir(p, q)
                    self.paint_step(p, step)
                return list(path)
            for nd in self._continue_dirs(pos, d, fresh):
                dx, dy = DIR_VECTORS[nd]
                nxt = (pos[0] + dx, pos[1] + dy)
                if nxt in path:
                    continue
                if not in_bounds(nxt) or not self._may_enter(nxt, nd, goal, fresh):
                    continue
                ng = g + step_cost(nxt, nd != d)
                state = (nxt, nd)
                if best.get(state, 1 << 30) > ng:
                    best[state] = ng
                    heapq.heappush(heap, (ng + h(nxt), next(counter), ng,
                                          nxt, nd, path + (nxt,)))
        raise RouteError(f"no corridor from {start} to {goal}"
                         f"{' (fresh)' if fresh else ''}")

    def _leave_dirs(self, pos) -> list[int]:
        if not self.is_trap(pos):
            return [0, 1, 2, 3]
        return [d for d in (0, 1, 2, 3) if self._trap_can_accept(pos, d)]

    def _arrival_ok(self, pos, travel_dir: int) -> bool:
        if not self.is_trap(pos):
            return True
        return self._trap_can_accept(pos, opposite(travel_dir))

    def _may_enter(self, pos, travel_dir: int, goal, fresh: bool) -> bool:
        if pos == goal:
            return True
        if self.is_trap(pos):
            return False
        have = self.ports.get(pos)
        if have is None:
            return True
        if fresh:
            # Only perpendicular crossings of existing channels.
            return travel_dir not in have and opposite(travel_dir) not in have
        return True

    def _continue_dirs(self, pos, came_dir: int, fresh: bool) -> list[int]:
        if self.ports.get(pos):
            # Inside an existing block: fresh corridors go straight through;
            # shared corridors may also branch (making an intersection).
            if fresh:
                return [came_dir]
        return [came_dir] + [d for d in (0, 1, 2, 3)
                             if d != came_dir and d != opposite(came_dir)]

    def _step_dir(self, a, b) -> int:
        delta = (b[0] - a[0], b[1] - a[1])
        for d, vec in DIR_VECTORS.items():
            if vec == delta:
                return d
        raise ValueError(f"{a} and {b} not adjacent")

    def _safe_facing(self, pos) -> int:
        """A rotation for an unconnected dead end that faces no closed side."""
        for d in (0, 1, 2, 3):
            dx, dy = DIR_VECTORS[d]
            if not self.occupied((pos[0] + dx, pos[1] + dy)):
                return d * 90
        for d in (0, 1, 2, 3):
            dx, dy = DIR_VECTORS[d]
            nbr = (pos[0] + dx, pos[1] + dy)
            if opposite(d) in self.ports.get(nbr, ()):
                return d * 90
        raise RouteError(f"trap at {pos} is walled in")

    # ------------------------------------------------------------- realize

    def realize(self) -> Layout:
        blocks = []
        for pos in sorted(set(self.ports) | set(self.traps)):
            ports = frozenset(self.ports.get(pos, set()))
            if self.is_trap(pos):
                name = self.traps[pos]
                if not ports:
                    kind, rot = MacroblockKind.DEAD_END, self._safe_facing(pos)
                else:
                    kind, rot = kind_for_ports(ports, trap=True)
                blocks.append(PlacedMacroblock(kind, pos[0], pos[1], rot, name))
            else:
                if not ports:
                    continue
                kind, rot = kind_for_ports(ports, trap=False)
                blocks.append(PlacedMacroblock(kind, pos[0], pos[1], rot))
        return Layout(blocks)
