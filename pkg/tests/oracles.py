"""Independent checks computed from a trace's recorded trajectories.

Positions are re-derived here with numpy from the raw leg list rather than
through the simulator's mobility code.
"""

from __future__ import annotations

import numpy as np

from dhymon import metrics
from dhymon.netsim import SimConfig, run


def positions_at(trace, t: float) -> np.ndarray:
    """(n, 2) array of node positions at time ``t`` from the recorded legs."""
    init = np.asarray(trace.meta["initial_positions"], dtype=float)
    out = init.copy()
    for node, legs in enumerate(trace.meta["legs"]):
        for ox, oy, tx, ty, depart, speed in legs:
            if t < depart:
                break
            origin, target = np.array([ox, oy]), np.array([tx, ty])
            length = np.hypot(*(target - origin))
            done = speed * (t - depart) / 1000.0
            out[node] = target if done >= length or length == 0 else origin + (target - origin) * done / length
    return out


def adjacency(pos: np.ndarray, radio_range: float) -> np.ndarray:
    d = np.hypot(pos[:, None, 0] - pos[None, :, 0], pos[:, None, 1] - pos[None, :, 1])
    adj = d <= radio_range
    np.fill_diagonal(adj, False)
    return adj


def closure(adj: np.ndarray, seeds: set) -> set:
    reached = np.zeros(len(adj), dtype=bool)
    reached[list(seeds)] = True
    while True:
        grown = reached | adj[reached].any(axis=0)
        if (grown == reached).all():
            return {int(i) for i in np.flatnonzero(reached)}
        reached = grown


def reachable(trace, process) -> set:
    """Nodes joined to the root by a time-respecting path of unit-disk
    snapshots. A snapshot is taken whenever some node took up the query (and so
    re-broadcast it), which covers every instant a QUERY could be sent."""
    radio_range = trace.meta["config"]["range"]
    key = list(process)
    times = sorted(
        {process[1]}
        | {
            r.time
            for r in trace.of_kind("event")
            if r.data["layer"] == "monitor"
            and r.data["process"] == key
            and r.data["before"] == "INITIAL"
            and r.data["after"] == "Q1"
        }
    )
    reached = {process[0]}
    for t in times:
        reached = closure(adjacency(positions_at(trace, t), radio_range), reached)
    return reached


def entered_query(trace, process) -> set:
    key = list(process)
    return {
        r.node
        for r in trace.of_kind("event")
        if r.data["layer"] == "monitor" and r.data["process"] == key and r.data["after"] == "Q1" and r.data["before"] == "INITIAL"
    }


def connected_at(trace, t: float) -> bool:
    n = trace.meta["n_nodes"]
    adj = adjacency(positions_at(trace, t), trace.meta["config"]["range"])
    return len(closure(adj, {0})) == n


def audit_cycle(cfg: SimConfig):
    """Run one cycle and return its record plus oracle verdicts."""
    trace = run(cfg)
    rec = metrics.run_record(trace, 0)
    violations = 0
    for p in metrics.processes(trace):
        reach = reachable(trace, p)
        violations += len(metrics.covered_set(trace, p) - reach)
        violations += len(entered_query(trace, p) - reach)
    start = cfg.warmup
    return {
        "record": rec,
        "reach_violations": violations,
        "connected": connected_at(trace, start),
    }
