"""Layout drawings: ASCII art for terminals, minimal SVG for reports.

Each macroblock renders as a 3x3 character tile: the center marks the
block (G gate, o storage, + intersection, corner glyph for turns), and
open ports draw as channel stubs on the tile edges.
"""

from __future__ import annotations

from .fabric import E, Layout, MacroblockKind, N, S, W

_CENTER = {
    MacroblockKind.STRAIGHT_CHANNEL: ".",
    MacroblockKind.GATE_CHANNEL: "G",
    MacroblockKind.TURN: "+",
    MacroblockKind.THREE_WAY: "+",
    MacroblockKind.FOUR_WAY: "+",
    MacroblockKind.DEAD_END: "o",
}


def ascii_art(layout: Layout, qubits: dict[str, int] | None = None) -> str:
    """Draw the layout; optionally mark qubit blocks with '*'."""
    if not layout.blocks:
        return "(empty layout)\n"
    marked = set((qubits or {}).values())
    min_c = min(b.col for b in layout.blocks)
    max_c = max(b.col for b in layout.blocks)
    min_r = min(b.row for b in layout.blocks)
    max_r = max(b.row for b in layout.blocks)
    width = (max_c - min_c + 1) * 3
    height = (max_r - min_r + 1) * 3
    canvas = [[" "] * width for _ in range(height)]
    for b in layout.blocks:
        ox = (b.col - min_c) * 3
        oy = (b.row - min_r) * 3
        for x in range(3):
            for y in range(3):
                canvas[oy + y][ox + x] = "#" if (x == 1 or y == 1) else ":"
        center = _CENTER[b.kind]
        if b.is_gate:
            center = "G"
        if b.block_id in marked:
            center = "*"
        canvas[oy + 1][ox + 1] = center
        ports = b.ports
        canvas[oy][ox + 1] = "#" if N in ports else "-"
        canvas[oy + 2][ox + 1] = "#" if S in ports else "-"
        canvas[oy + 1][ox] = "#" if W in ports else "|"
        canvas[oy + 1][ox + 2] = "#" if E in ports else "|"
    return "".join("".join(row).rstrip() + "\n" for row in canvas)


def svg(layout: Layout, qubits: dict[str, int] | None = None,
        scale: int = 24) -> str:
    if not layout.blocks:
        return "<svg xmlns='http://www.w3.org/2000/svg'/>\n"
    marked = {}
    for name, block in sorted((qubits or {}).items()):
        marked.setdefault(block, name)
    min_c = min(b.col for b in layout.blocks)
    min_r = min(b.row for b in layout.blocks)
    w = (max(b.col for b in layout.blocks) - min_c + 1) * scale
    h = (max(b.row for b in layout.blocks) - min_r + 1) * scale
    parts = [f"<svg xmlns='http://www.w3.org/2000/svg' width='{w}' "
             f"height='{h}' viewBox='0 0 {w} {h}'>"]
    for b in layout.blocks:
        x = (b.col - min_c) * scale
        y = (b.row - min_r) * scale
        fill = "#cde" if b.is_gate else ("#ddd" if b.is_trap else "#f7f7f7")
        parts.append(f"<rect x='{x}' y='{y}' width='{scale}' "
                     f"height='{scale}' fill='{fill}' stroke='#555'/>")
        cx, cy = x + scale // 2, y + scale // 2
        for d, (dx, dy) in ((N, (0, -1)), (E, (1, 0)), (S, (0, 1)),
                            (W, (-1, 0))):
            if d in b.ports:
                parts.append(
                    f"<line x1='{cx}' y1='{cy}' "
                    f"x2='{cx + dx * scale // 2}' y2='{cy + dy * scale // 2}' "
                    "stroke='#333' stroke-width='3'/>")
        if b.is_gate:
            parts.append(f"<circle cx='{cx}' cy='{cy}' r='{scale // 5}' "
                         "fill='#36c'/>")
        label = marked.get(b.block_id)
        if label:
            parts.append(f"<text x='{x + 2}' y='{y + scale - 3}' "
                         f"font-size='{scale // 3}' fill='#a00'>{label}</text>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
