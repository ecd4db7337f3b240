"""Hybrid gossip/tree decentralized monitoring for mobile ad-hoc networks.

A per-node monitoring state machine (:mod:`dhymon.protocol`), a one-hop gossip
fallback router (:mod:`dhymon.router`), a deterministic MANET simulator
(:mod:`dhymon.netsim`), trace metrics (:mod:`dhymon.metrics`) and a sweep
harness (:mod:`dhymon.sweep`).
"""

from .messages import Aggregate, PacketId, Payload, PayloadType, ProcessId, make_packet_id, merge_aggregate
from .metrics import (
    CoverageClass,
    RunRecord,
    classify,
    convergence_time,
    joint_accuracy,
    root_accuracy,
    routing_usage,
    run_record,
    tree_depth,
)
from .netsim import SimConfig, area_for_nodes, run
from .protocol import MonitorState, Phase, handle_payload
from .router import RouterPhase, RouterState, route_step, select_relay
from .sweep import SweepSpec, run_sweep
from .trace import Trace, emit_trace, read_trace

__version__ = "0.1.0"
