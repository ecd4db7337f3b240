"""Trace post-processing: coverage classes, accuracy, convergence, depth, routing load."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .messages import ProcessId
from .trace import Trace


class CoverageClass(str, Enum):
    NON_COVERED = "NonCovered"
    PARTIALLY_COVERED = "PartiallyCovered"
    FULLY_COVERED = "FullyCovered"


def _pkey(process) -> tuple:
    if isinstance(process, ProcessId):
        return (process.root, process.start_time)
    return tuple(process)


def processes(trace: Trace) -> list[tuple]:
    """Rounds started in ``trace``, in launch order, as ``(root, start_time)``."""
    return [tuple(r.data["process"]) for r in trace.of_kind("start")]


def verdict(trace: Trace, process) -> Optional[dict]:
    key = list(_pkey(process))
    for r in trace.of_kind("verdict"):
        if r.data["process"] == key:
            return {**r.data, "time": r.time}
    return None


def classify(trace: Trace, process) -> dict[int, CoverageClass]:
    """Coverage class of every node for one round.

    Reached: took the query (or launched the round). Fully covered: its
    aggregate report was acknowledged by the parent; for the root, the round
    produced a verdict.
    """
    key = list(_pkey(process))
    n = trace.meta["n_nodes"]
    reached: set[int] = set()
    acked: set[int] = set()
    for r in trace.of_kind("event"):
        d = r.data
        if d["layer"] != "monitor" or d["process"] != key:
            continue
        if d["before"] == "INITIAL" and d["after"] == "Q1":
            reached.add(r.node)
        elif d["ptype"] == "AGGREGATEACK" and d["before"] in ("A1", "A2", "A3") and d["after"] == "INITIAL":
            acked.add(r.node)
    if verdict(trace, process) is not None:
        acked.add(key[0])
    out = {}
    for node in range(n):
        if node not in reached:
            out[node] = CoverageClass.NON_COVERED
        elif node in acked:
            out[node] = CoverageClass.FULLY_COVERED
        else:
            out[node] = CoverageClass.PARTIALLY_COVERED
    return out


def covered_set(trace: Trace, process) -> frozenset:
    v = verdict(trace, process)
    return frozenset(v["covered"]) if v else frozenset()


def root_accuracy(trace: Trace, process, n: int) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return len(covered_set(trace, process)) / n


def joint_accuracy(covered_sets: Iterable[Iterable[int]], n: int) -> float:
    """Share of the ``n`` nodes seen by at least one root."""
    union: set = set()
    for s in covered_sets:
        union |= set(s)
    return len(union) / n


def convergence_time(trace: Trace, process) -> Optional[float]:
    v = verdict(trace, process)
    return None if v is None else v["time"] - _pkey(process)[1]


def tree_depth(trace: Trace, process) -> Optional[int]:
    v = verdict(trace, process)
    return None if v is None else v["max_depth"]


def routing_usage(trace: Trace) -> tuple[int, int]:
    """(ROUTE packets transmitted, ROUTE packets received) over the whole run."""
    sent = received = 0
    for r in trace.of_kind("event"):
        d = r.data
        if d["ptype"] == "ROUTE" and d["event"] == "deliver":
            received += 1
        for a in d["actions"]:
            if a[0] == "unicast" and a[1] == "ROUTE":
                sent += 1
    return sent, received


@dataclass
class RootResult:
    root: int
    converged: bool
    convergence_ms: Optional[float]
    accuracy: float
    tree_depth: Optional[int]
    covered: frozenset
    fully_covered: int = 0


@dataclass
class RunRecord:
    cycle: int
    roots: list[RootResult]
    joint_accuracy: float
    route_msgs_sent: int
    route_msgs_received: int
    config: dict = field(default_factory=dict)

    def row(self) -> dict:
        cfg = self.config
        out = {
            "cycle": self.cycle,
            "seed": cfg.get("seed"),
            "n_nodes": cfg.get("n_nodes"),
            "area_side": round(cfg["side"], 3) if "side" in cfg else None,
            "speed": cfg.get("speed"),
            "timeout": cfg.get("timeout"),
            "roots": len(self.roots),
        }
        for i, res in enumerate(self.roots, start=1):
            out[f"root{i}"] = res.root
            out[f"accuracy_{i}"] = res.accuracy
            out[f"converged_{i}"] = int(res.converged)
            out[f"convergence_ms_{i}"] = res.convergence_ms
            out[f"tree_depth_{i}"] = res.tree_depth
            out[f"fully_covered_{i}"] = res.fully_covered
        out["joint_accuracy"] = self.joint_accuracy
        out["route_sent"] = self.route_msgs_sent
        out["route_received"] = self.route_msgs_received
        return out


def run_record(trace: Trace, cycle: int = 0) -> RunRecord:
    """Summarize one simulated cycle."""
    n = trace.meta["n_nodes"]
    results = []
    for p in processes(trace):
        covered = covered_set(trace, p)
        classes = classify(trace, p)
        results.append(
            RootResult(
                root=p[0],
                converged=verdict(trace, p) is not None,
                convergence_ms=convergence_time(trace, p),
                accuracy=len(covered) / n,
                tree_depth=tree_depth(trace, p),
                covered=covered,
                fully_covered=sum(c is CoverageClass.FULLY_COVERED for c in classes.values()),
            )
        )
    sent, received = routing_usage(trace)
    config = dict(trace.meta.get("config", {}))
    config["side"] = trace.meta.get("side")
    return RunRecord(
        cycle=cycle,
        roots=results,
        joint_accuracy=joint_accuracy([r.covered for r in results], n),
        route_msgs_sent=sent,
        route_msgs_received=received,
        config=config,
    )


def summarize(values: Sequence[Optional[float]]) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """(mean, min, max) over the non-missing values."""
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, None
    return sum(vals) / len(vals), min(vals), max(vals)
