"""Wire messages and the abstract action vocabulary shared by both protocol layers."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

NodeId = int


class PayloadType(str, Enum):
    START = "START"
    QUERY = "QUERY"
    QUERYACK = "QUERYACK"
    AGGREGATE = "AGGREGATE"
    AGGREGATEACK = "AGGREGATEACK"
    TIMEOUT = "TIMEOUT"
    # routing layer
    HELLO = "HELLO"
    HELLO_REPLY = "HELLO_REPLY"
    ROUTE = "ROUTE"
    ROUTE_ACK = "ROUTE_ACK"


MONITOR_TYPES = frozenset(
    {
        PayloadType.START,
        PayloadType.QUERY,
        PayloadType.QUERYACK,
        PayloadType.AGGREGATE,
        PayloadType.AGGREGATEACK,
        PayloadType.TIMEOUT,
    }
)
ROUTING_TYPES = frozenset(
    {PayloadType.HELLO, PayloadType.HELLO_REPLY, PayloadType.ROUTE, PayloadType.ROUTE_ACK}
)


@dataclass(frozen=True, order=True)
class ProcessId:
    """One monitoring round: the root that launched it and when."""

    root: NodeId
    start_time: float


@dataclass(frozen=True, order=True)
class PacketId:
    origin: NodeId
    created_at: float
    seq: int = 0


def make_packet_id(origin: NodeId, now: float, seq: int = 0) -> PacketId:
    """Build a packet id from the generating node, creation time and a per-node
    sequence number that separates packets created in the same millisecond."""
    return PacketId(origin, now, seq)


class AggregateOverlap(ValueError):
    """Raised when two partial aggregates claim the same node."""


@dataclass(frozen=True)
class Aggregate:
    sum: float = 0.0
    count: int = 0
    covered: frozenset = frozenset()
    max_depth: int = 1

    def __post_init__(self):
        if self.count != len(self.covered):
            raise ValueError(f"count {self.count} != |covered| {len(self.covered)}")

    @classmethod
    def of(cls, node: NodeId, value: float, depth: int) -> "Aggregate":
        return cls(float(value), 1, frozenset({node}), depth)


EMPTY_AGGREGATE = Aggregate()


def merge_aggregate(a: Aggregate, b: Aggregate) -> Aggregate:
    """Fold two disjoint partial aggregates together.

    Commutative and associative; ``Aggregate()`` is the identity. Overlapping
    coverage means a report was delivered twice and is rejected.
    """
    if a.covered & b.covered:
        raise AggregateOverlap(f"overlapping coverage: {sorted(a.covered & b.covered)}")
    return Aggregate(
        a.sum + b.sum,
        a.count + b.count,
        a.covered | b.covered,
        max(a.max_depth, b.max_depth),
    )


@dataclass(frozen=True)
class Payload:
    ptype: PayloadType
    pid: PacketId
    process: ProcessId
    source: NodeId
    dest: Optional[NodeId] = None  # None => local broadcast
    hop_depth: int = 0
    aggregate: Optional[Aggregate] = None
    query_attr: str = "load"
    # ROUTE carries the stranded AGGREGATE; HELLO/HELLO_REPLY reference it by id
    inner: Optional["Payload"] = None
    ref: Optional[PacketId] = None
    token: Optional[int] = None  # TIMEOUT only

    def __post_init__(self):
        if self.ptype is PayloadType.AGGREGATE and self.aggregate is None:
            raise ValueError("AGGREGATE payload without aggregate")
        if self.ptype is PayloadType.QUERY and self.hop_depth < 1:
            raise ValueError("QUERY payload needs hop_depth >= 1")
        if self.dest is None and self.ptype in (
            PayloadType.QUERYACK,
            PayloadType.AGGREGATE,
            PayloadType.AGGREGATEACK,
            PayloadType.HELLO_REPLY,
            PayloadType.ROUTE,
            PayloadType.ROUTE_ACK,
        ):
            raise ValueError(f"{self.ptype.value} payload needs a destination")


def timeout_payload(process: ProcessId, node: NodeId, now: float, token: int) -> Payload:
    """The local timer service's input to a state machine."""
    return Payload(
        PayloadType.TIMEOUT, PacketId(node, now, -1), process, node, dest=node, token=token
    )


# Actions -----------------------------------------------------------------


@dataclass(frozen=True)
class Broadcast:
    payload: Payload


@dataclass(frozen=True)
class Unicast:
    dest: NodeId
    payload: Payload


@dataclass(frozen=True)
class StartTimer:
    duration: float
    token: int


@dataclass(frozen=True)
class CancelTimer:
    token: int


@dataclass(frozen=True)
class Verdict:
    aggregate: Aggregate


@dataclass(frozen=True)
class RequestRoute:
    payload: Payload


@dataclass(frozen=True)
class Deliver:
    """Router up-call: a routed AGGREGATE reached its destination."""

    payload: Payload


@dataclass(frozen=True)
class Fail:
    reason: str = ""


Action = Union[Broadcast, Unicast, StartTimer, CancelTimer, Verdict, RequestRoute, Deliver, Fail]


def sent_payload(action: Action) -> Optional[Payload]:
    if isinstance(action, (Broadcast, Unicast)):
        return action.payload
    return None


__all__ = [
    "NodeId",
    "PayloadType",
    "ProcessId",
    "PacketId",
    "make_packet_id",
    "Aggregate",
    "AggregateOverlap",
    "EMPTY_AGGREGATE",
    "merge_aggregate",
    "Payload",
    "timeout_payload",
    "Broadcast",
    "Unicast",
    "StartTimer",
    "CancelTimer",
    "Verdict",
    "RequestRoute",
    "Deliver",
    "Fail",
    "Action",
    "sent_payload",
]
