"""The monitoring state machine run by every node for every monitoring round.

``handle_payload`` is a pure step function: it never reads a clock or touches
the network, it only maps ``(state, payload)`` to a successor state and a list
of abstract actions that the event loop realizes.

Phases::

    INITIAL --START|QUERY--> Q1 --QUERYACK--> Q2
    Q1 --TIMEOUT--> A1 (leaf report sent)      Q2 --AGGREGATE--> A1
    A1 --TIMEOUT--> A2 (fallback routing)      A2 --TIMEOUT--> A3
    A3 --TIMEOUT--> A2 (next relay) | INITIAL (error, no relay left)
    A1|A2|A3 --AGGREGATEACK--> INITIAL (done)
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .messages import (
    EMPTY_AGGREGATE,
    ROUTING_TYPES,
    Action,
    Aggregate,
    Broadcast,
    Fail,
    NodeId,
    PacketId,
    Payload,
    PayloadType,
    ProcessId,
    RequestRoute,
    StartTimer,
    Unicast,
    Verdict,
    make_packet_id,
    merge_aggregate,
)


class Phase(str, Enum):
    INITIAL = "INITIAL"
    Q1 = "Q1"
    Q2 = "Q2"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"


AGGREGATING = (Phase.A1, Phase.A2, Phase.A3)


@dataclass(frozen=True)
class MonitorState:
    """Per-node, per-round monitoring state.

    ``process`` stays set after the round finishes so that a node takes part
    in a given round at most once.
    """

    observation: float = 0.0
    phase: Phase = Phase.INITIAL
    process: Optional[ProcessId] = None
    parent: Optional[NodeId] = None
    my_depth: int = 0
    query_ack_list: frozenset = frozenset()
    relay_list: tuple = ()
    partial: Aggregate = EMPTY_AGGREGATE
    seen_queries: frozenset = frozenset()
    pending_aggregate: Optional[Payload] = None
    timer: Optional[int] = None
    timer_seq: int = 0
    seq: int = 0

    @property
    def is_root(self) -> bool:
        return self.process is not None and self.parent is None


def _new_pid(state: MonitorState, node: NodeId, now: float) -> tuple[PacketId, MonitorState]:
    return make_packet_id(node, now, state.seq), dataclasses.replace(state, seq=state.seq + 1)


def _arm(state: MonitorState, timeout: float) -> tuple[MonitorState, StartTimer]:
    token = state.timer_seq
    return dataclasses.replace(state, timer=token, timer_seq=token + 1), StartTimer(timeout, token)


def _own(state: MonitorState, node: NodeId) -> Aggregate:
    return Aggregate.of(node, state.observation, state.my_depth)


def _send_result(state: MonitorState, node: NodeId, now: float, timeout: float):
    """Fold own observation into the partial result and report it upward.

    The root has nobody to report to: it emits the verdict and is done.
    """
    result = merge_aggregate(state.partial, _own(state, node))
    if state.parent is None:
        state = dataclasses.replace(state, phase=Phase.INITIAL, partial=result, timer=None)
        return state, [Verdict(result)]
    pid, state = _new_pid(state, node, now)
    report = Payload(
        PayloadType.AGGREGATE,
        pid,
        state.process,
        node,
        dest=state.parent,
        hop_depth=state.my_depth,
        aggregate=result,
    )
    state = dataclasses.replace(state, phase=Phase.A1, partial=result, pending_aggregate=report)
    state, timer = _arm(state, timeout)
    return state, [Unicast(state.parent, report), timer]


def _route_payload(state: MonitorState, node: NodeId, now: float, relay: NodeId):
    pid, state = _new_pid(state, node, now)
    wrapped = Payload(
        PayloadType.ROUTE,
        pid,
        state.process,
        node,
        dest=relay,
        inner=state.pending_aggregate,
        ref=state.pending_aggregate.pid,
    )
    return state, Unicast(relay, wrapped)


def _forward_next(state: MonitorState, node: NodeId, now: float, timeout: float, phase: Phase):
    actions: list[Action] = []
    if state.relay_list:
        relay, rest = state.relay_list[0], state.relay_list[1:]
        state = dataclasses.replace(state, relay_list=rest)
        state, send = _route_payload(state, node, now, relay)
        actions.append(send)
    state = dataclasses.replace(state, phase=phase)
    state, timer = _arm(state, timeout)
    actions.append(timer)
    return state, actions


# Transition handlers ------------------------------------------------------


def _initial_start(state, payload, node, now, timeout):
    if state.process is not None or payload.process.root != node:
        return state, []
    state = dataclasses.replace(
        state,
        phase=Phase.Q1,
        process=payload.process,
        parent=None,
        my_depth=1,
        partial=EMPTY_AGGREGATE,
    )
    pid, state = _new_pid(state, node, now)
    query = Payload(PayloadType.QUERY, pid, state.process, node, hop_depth=1, query_attr=payload.query_attr)
    state = dataclasses.replace(state, seen_queries=state.seen_queries | {pid})
    state, timer = _arm(state, timeout)
    return state, [Broadcast(query), timer]


def _initial_query(state, payload, node, now, timeout):
    # one participation per round; the root ignores echoes of its own query
    if state.process is not None or payload.pid in state.seen_queries:
        return state, []
    if payload.process.root == node or payload.source == node:
        return state, []
    depth = payload.hop_depth + 1
    state = dataclasses.replace(
        state,
        phase=Phase.Q1,
        process=payload.process,
        parent=payload.source,
        my_depth=depth,
        partial=EMPTY_AGGREGATE,
        seen_queries=state.seen_queries | {payload.pid},
    )
    ack_pid, state = _new_pid(state, node, now)
    ack = Payload(PayloadType.QUERYACK, ack_pid, state.process, node, dest=payload.source, ref=payload.pid)
    q_pid, state = _new_pid(state, node, now)
    query = Payload(PayloadType.QUERY, q_pid, state.process, node, hop_depth=depth, query_attr=payload.query_attr)
    state, timer = _arm(state, timeout)
    return state, [Unicast(payload.source, ack), Broadcast(query), timer]


def _query_ack(state, payload, node, now, timeout):
    if payload.dest != node:
        return state, []
    return (
        dataclasses.replace(state, phase=Phase.Q2, query_ack_list=state.query_ack_list | {payload.source}),
        [],
    )


def _q1_timeout(state, payload, node, now, timeout):
    return _send_result(state, node, now, timeout)


def _aggregate(state, payload, node, now, timeout):
    if payload.dest != node:
        return state, []
    ack_pid, state = _new_pid(state, node, now)
    ack = Unicast(
        payload.source,
        Payload(PayloadType.AGGREGATEACK, ack_pid, state.process, node, dest=payload.source, ref=payload.pid),
    )
    report = payload.aggregate
    late = state.pending_aggregate is not None
    duplicate = bool(report.covered & state.partial.covered) or node in report.covered
    if late or duplicate:
        # acknowledged so the sender stops retrying; the report is not counted twice
        return state, [ack]
    state = dataclasses.replace(
        state,
        phase=Phase.A1,
        partial=merge_aggregate(state.partial, report),
        query_ack_list=state.query_ack_list - {payload.source},
    )
    if state.query_ack_list:
        return state, [ack]
    state, actions = _send_result(state, node, now, timeout)
    return state, [ack, *actions]


def _a1_timeout(state, payload, node, now, timeout):
    if state.pending_aggregate is None:
        return state, []
    state = dataclasses.replace(state, phase=Phase.A2)
    state, timer = _arm(state, timeout)
    return state, [RequestRoute(state.pending_aggregate), timer]


def _aggregate_ack(state, payload, node, now, timeout):
    pending = state.pending_aggregate
    if pending is None or payload.dest != node or (payload.ref is not None and payload.ref != pending.pid):
        return state, []
    return dataclasses.replace(state, phase=Phase.INITIAL, timer=None), []


def _a2_timeout(state, payload, node, now, timeout):
    return _forward_next(state, node, now, timeout, Phase.A3)


def _a3_timeout(state, payload, node, now, timeout):
    if state.relay_list:
        return _forward_next(state, node, now, timeout, Phase.A2)
    return dataclasses.replace(state, phase=Phase.INITIAL, timer=None), [Fail("no relay left")]


P = PayloadType
TRANSITIONS = {
    (Phase.INITIAL, P.START): _initial_start,
    (Phase.INITIAL, P.QUERY): _initial_query,
    (Phase.Q1, P.QUERYACK): _query_ack,
    (Phase.Q1, P.TIMEOUT): _q1_timeout,
    (Phase.Q2, P.QUERYACK): _query_ack,
    (Phase.Q2, P.AGGREGATE): _aggregate,
    (Phase.A1, P.AGGREGATE): _aggregate,
    (Phase.A1, P.TIMEOUT): _a1_timeout,
    (Phase.A1, P.AGGREGATEACK): _aggregate_ack,
    (Phase.A2, P.AGGREGATEACK): _aggregate_ack,
    (Phase.A2, P.TIMEOUT): _a2_timeout,
    (Phase.A3, P.AGGREGATEACK): _aggregate_ack,
    (Phase.A3, P.TIMEOUT): _a3_timeout,
}
del P


def handle_payload(
    state: MonitorState,
    payload: Payload,
    node: NodeId,
    now: float,
    timeout: float,
) -> tuple[MonitorState, list[Action]]:
    """Advance ``node``'s monitoring state by one incoming payload.

    Anything the transition table does not list (stale rounds, stale timer
    tokens, duplicate queries, routing-layer traffic) leaves the state
    untouched and yields no actions.
    """
    if payload.ptype in ROUTING_TYPES:
        return state, []
    if state.process is not None and payload.process != state.process:
        return state, []
    if payload.ptype is PayloadType.TIMEOUT and (state.timer is None or payload.token != state.timer):
        return state, []
    step = TRANSITIONS.get((state.phase, payload.ptype))
    if step is None:
        return state, []
    return step(state, payload, node, now, timeout)


def note_relay(state: MonitorState, relay: NodeId) -> MonitorState:
    """Remember a neighbour that answered a HELLO for our stranded report."""
    if state.pending_aggregate is None or state.phase not in AGGREGATING:
        return state
    if relay in state.relay_list:
        return state
    return dataclasses.replace(state, relay_list=state.relay_list + (relay,))


def start_payload(root: NodeId, now: float, query_attr: str = "load") -> Payload:
    process = ProcessId(root, now)
    return Payload(PayloadType.START, make_packet_id(root, now, -1), process, root, dest=root, query_attr=query_attr)
