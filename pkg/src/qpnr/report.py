"""Text exports: schedule event logs and structured run summaries."""

from __future__ import annotations

import json

from .fabric import Layout, area
from .scheduler import DeadlockReport, Schedule


def _num(x: float) -> str:
    return str(int(x)) if isinstance(x, (int, float)) and x == int(x) else str(x)


def event_log_text(sched: Schedule) -> str:
    """One event per line, in simulation order."""
    lines = []
    for e in sched.events:
        if e.kind == "move-hop":
            lines.append(f"{_num(e.time)} move-hop {e.qubits[0]} "
                         f"-> {e.block} depart={_num(e.depart)}")
        else:
            qs = ",".join(e.qubits)
            lines.append(f"{_num(e.time)} {e.kind} i{e.instruction} "
                         f"{qs} @ {e.block}")
    return "".join(line + "\n" for line in lines)


def summary_dict(result: Schedule | DeadlockReport, layout: Layout) -> dict:
    stalls = {
        str(i): {"wait": rec.wait, "contested": rec.contested}
        for i, rec in result.stalls.items() if rec.wait > 0}
    if result.deadlocked:
        return {
            "deadlock": True,
            "time": result.time,
            "blocked_instruction": result.blocked_instruction,
            "qubit_positions": dict(sorted(result.qubit_positions.items())),
            "stalls": stalls,
        }
    return {
        "deadlock": False,
        "latency": result.total_latency,
        "area": area(layout),
        "stalls": stalls,
    }


def summary_json(result: Schedule | DeadlockReport, layout: Layout) -> str:
    return json.dumps(summary_dict(result, layout), sort_keys=True, indent=2) + "\n"
