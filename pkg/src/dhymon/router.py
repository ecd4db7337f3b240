"""One-hop gossip routing for aggregate reports whose tree parent moved away.

States: ``RInitial`` (idle), ``WR`` (HELLO sent, waiting for a reply) and
``DN`` (packet handed to a relay). A node that hears a HELLO while in ``DN``
answers it and drops back to ``RInitial``, so it can relay again later.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

from .config import DEFAULTS
from .messages import (
    Action,
    Broadcast,
    Deliver,
    Fail,
    NodeId,
    Payload,
    PayloadType,
    StartTimer,
    Unicast,
    make_packet_id,
)

DEFAULT_RETRY_CAP = DEFAULTS["sim"]["retry_cap"]


class RouterPhase(str, Enum):
    RINITIAL = "RInitial"
    WR = "WR"
    DN = "DN"


@dataclass(frozen=True)
class RouterState:
    phase: RouterPhase = RouterPhase.RINITIAL
    pending: Optional[Payload] = None
    chosen_relay: Optional[NodeId] = None
    hello_deadline: float = 0.0
    retries: int = 0
    # (process, packet id) of every report this node originated or relayed
    relayed: frozenset = frozenset()
    timer: Optional[int] = None
    timer_seq: int = 0
    seq: int = 0


# Inputs -------------------------------------------------------------------


@dataclass(frozen=True)
class AggregateRequest:
    payload: Payload  # the AGGREGATE to route


@dataclass(frozen=True)
class RoutePacket:
    payload: Payload  # ROUTE wire payload wrapping the AGGREGATE


@dataclass(frozen=True)
class Hello:
    payload: Payload


@dataclass(frozen=True)
class HelloReply:
    payload: Payload


@dataclass(frozen=True)
class RouteAck:
    payload: Payload


@dataclass(frozen=True)
class Timeout:
    token: int


RouteInput = Union[AggregateRequest, RoutePacket, Hello, HelloReply, RouteAck, Timeout]

_INPUT_OF = {
    PayloadType.HELLO: Hello,
    PayloadType.HELLO_REPLY: HelloReply,
    PayloadType.ROUTE: RoutePacket,
    PayloadType.ROUTE_ACK: RouteAck,
}


def input_for(payload: Payload) -> RouteInput:
    """Wrap a received routing-layer payload as a router input."""
    return _INPUT_OF[payload.ptype](payload)


def _key(report: Payload):
    return (report.process, report.pid)


def _emit(state: RouterState, node: NodeId, now: float, ptype: PayloadType, report: Payload, **kw):
    pid = make_packet_id(node, now, state.seq)
    state = dataclasses.replace(state, seq=state.seq + 1)
    return state, Payload(ptype, pid, report.process, node, **kw)


def _arm(state: RouterState, now: float, timeout: float):
    token = state.timer_seq
    state = dataclasses.replace(state, timer=token, timer_seq=token + 1, hello_deadline=now + timeout)
    return state, StartTimer(timeout, token)


def _hello(state: RouterState, node: NodeId, now: float, timeout: float) -> tuple[RouterState, list[Action]]:
    report = state.pending
    state, hello = _emit(state, node, now, PayloadType.HELLO, report, ref=report.pid, hop_depth=0)
    state, timer = _arm(state, now, timeout)
    return state, [Broadcast(hello), timer]


def _begin(state: RouterState, report: Payload, node: NodeId, now: float, timeout: float):
    state = dataclasses.replace(
        state,
        phase=RouterPhase.WR,
        pending=report,
        chosen_relay=None,
        retries=0,
        relayed=state.relayed | {_key(report)},
    )
    return _hello(state, node, now, timeout)


def _reply_to_hello(state: RouterState, hello: Payload, node: NodeId, now: float):
    state, reply = _emit(state, node, now, PayloadType.HELLO_REPLY, hello, dest=hello.source, ref=hello.ref)
    return state, Unicast(hello.source, reply)


def route_step(
    state: RouterState,
    inp: RouteInput,
    node: NodeId,
    now: float,
    timeout: float,
    retry_cap: int = DEFAULT_RETRY_CAP,
) -> tuple[RouterState, list[Action]]:
    """Advance the fallback router of ``node`` by one input."""
    phase = state.phase

    if isinstance(inp, AggregateRequest):
        if phase is RouterPhase.WR:
            return state, []
        return _begin(state, inp.payload, node, now, timeout)

    if isinstance(inp, RoutePacket):
        wire = inp.payload
        report = wire.inner
        if report is None:
            return state, []
        if report.dest == node:
            state, ack = _emit(state, node, now, PayloadType.ROUTE_ACK, wire, dest=wire.source, ref=report.pid)
            return state, [Deliver(report), Unicast(wire.source, ack)]
        if phase is RouterPhase.WR or _key(report) in state.relayed:
            return state, []
        state, ack = _emit(state, node, now, PayloadType.ROUTE_ACK, wire, dest=wire.source, ref=report.pid)
        state, actions = _begin(state, report, node, now, timeout)
        return state, [Unicast(wire.source, ack), *actions]

    if isinstance(inp, Hello):
        hello = inp.payload
        if phase is RouterPhase.WR or (hello.process, hello.ref) in state.relayed:
            return state, []
        if phase is RouterPhase.DN:
            state = dataclasses.replace(state, phase=RouterPhase.RINITIAL, pending=None, chosen_relay=None)
        state, reply = _reply_to_hello(state, hello, node, now)
        return state, [reply]

    if isinstance(inp, HelloReply):
        reply = inp.payload
        if phase is not RouterPhase.WR or reply.dest != node or reply.ref != state.pending.pid:
            return state, []
        relay = reply.source
        state, wire = _emit(
            state, node, now, PayloadType.ROUTE, state.pending, dest=relay, inner=state.pending, ref=state.pending.pid
        )
        state = dataclasses.replace(state, phase=RouterPhase.DN, chosen_relay=relay, timer=None)
        return state, [Unicast(relay, wire)]

    if isinstance(inp, RouteAck):
        # delivery acknowledged by the relay; DN is (theoretically) final
        return state, []

    if isinstance(inp, Timeout):
        if phase is not RouterPhase.WR or inp.token != state.timer:
            return state, []
        if state.retries >= retry_cap:
            state = dataclasses.replace(state, phase=RouterPhase.RINITIAL, pending=None, chosen_relay=None, timer=None)
            return state, [Fail("no hello reply")]
        state = dataclasses.replace(state, retries=state.retries + 1)
        return _hello(state, node, now, timeout)

    raise TypeError(f"unknown router input {inp!r}")


def select_relay(replies: Sequence[tuple[NodeId, float]]) -> Optional[NodeId]:
    """Pick the earliest replier; equal arrival times go to the lower node id.

    Arrival order stands in for proximity, since nearer nodes answer sooner.
    Returns None when nobody replied.
    """
    if not replies:
        return None
    return min(replies, key=lambda r: (r[1], r[0]))[0]
