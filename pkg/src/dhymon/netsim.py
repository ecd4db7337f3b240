"""Deterministic discrete-event simulation of a MANET running the monitor.

Times are milliseconds, distances metres, speeds metres per second. Nodes
move under random waypoint mobility with zero pause time; radio links follow
a unit-disk model with a distance-scaled per-message delay and independent
Bernoulli loss per reception.
"""

from __future__ import annotations

import dataclasses
import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import protocol, router
from .config import DEFAULTS
from .messages import (
    MONITOR_TYPES,
    Broadcast,
    CancelTimer,
    Deliver,
    Fail,
    NodeId,
    Payload,
    PayloadType,
    ProcessId,
    RequestRoute,
    StartTimer,
    Unicast,
    Verdict,
    timeout_payload,
)
from .trace import Trace, TraceRecord

Point = tuple[float, float]

MONITOR = "monitor"
ROUTER = "router"


_DENSITY = DEFAULTS["density"]
_SIM = DEFAULTS["sim"]


def area_for_nodes(
    n_nodes: int,
    nodes_per_cell: float = _DENSITY["nodes_per_cell"],
    cell_side: float = _DENSITY["cell_side"],
) -> float:
    """Side (m) of the square holding ``n_nodes`` at ``nodes_per_cell`` per cell."""
    return cell_side * math.sqrt(n_nodes / nodes_per_cell)


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = _SIM["n_nodes"]
    area_side: Optional[float] = None  # None: derived from the density rule
    speed: float = _SIM["speed"]
    range: float = _SIM["range"]
    timeout: float = _SIM["timeout"]
    roots: int = _SIM["roots"]
    warmup: float = _SIM["warmup"]
    delay_min: float = _SIM["delay_min"]
    delay_max: float = _SIM["delay_max"]
    loss_prob: float = _SIM["loss_prob"]
    unicast_retries: int = _SIM["unicast_retries"]
    max_sim_time: float = _SIM["max_sim_time"]
    seed: int = _SIM["seed"]
    retry_cap: int = _SIM["retry_cap"]
    observation_max: int = _SIM["observation_max"]
    # scripted scenarios
    positions: Optional[tuple] = None  # ((x, y), ...) initial positions
    root_ids: Optional[tuple] = None
    script: Optional[tuple] = None  # ((node, x, y, speed), ...) legs taken after warmup

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if not 1 <= self.roots <= self.n_nodes:
            raise ValueError("roots must be in [1, n_nodes]")
        if self.delay_min > self.delay_max or self.delay_min < 0:
            raise ValueError("need 0 <= delay_min <= delay_max")
        if not 0 <= self.loss_prob < 1:
            raise ValueError("loss_prob must be in [0, 1)")
        if self.unicast_retries < 0:
            raise ValueError("unicast_retries must be >= 0")
        if self.speed < 0 or self.range <= 0 or self.timeout <= 0:
            raise ValueError("speed, range and timeout must be positive")
        if self.positions is not None and len(self.positions) != self.n_nodes:
            raise ValueError("positions must list every node")
        if self.root_ids is not None and len(set(self.root_ids)) != self.roots:
            raise ValueError("root_ids must name `roots` distinct nodes")

    @property
    def side(self) -> float:
        return self.area_side if self.area_side is not None else area_for_nodes(self.n_nodes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("positions", "root_ids", "script"):
            if d[key] is not None:
                d[key] = [list(v) if isinstance(v, (tuple, list)) else v for v in d[key]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        for key in ("positions", "root_ids", "script"):
            if d.get(key) is not None:
                d[key] = tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in d[key])
        return cls(**d)


# Mobility -----------------------------------------------------------------


@dataclass(frozen=True)
class WaypointLeg:
    origin: Point
    target: Point
    depart: float
    speed: float

    @property
    def length(self) -> float:
        return math.dist(self.origin, self.target)

    @property
    def arrival(self) -> float:
        return self.depart + 1000.0 * self.length / self.speed


def position_at(leg: WaypointLeg, t: float) -> Point:
    """Position along ``leg`` at time ``t`` (ms), clamped at the target."""
    length = leg.length
    travelled = leg.speed * (t - leg.depart) / 1000.0
    if travelled <= 0 or length == 0:
        return leg.origin if travelled <= 0 else leg.target
    if travelled >= length:
        return leg.target
    f = travelled / length
    (x0, y0), (x1, y1) = leg.origin, leg.target
    return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))


def in_range(a: Point, b: Point, radio_range: float) -> bool:
    return math.dist(a, b) <= radio_range


class Mobility:
    """Lazily extended waypoint trajectories, one RNG stream per node.

    Queries must be made in nondecreasing time per node, which the event loop
    guarantees.
    """

    def __init__(self, config: SimConfig, initial: Sequence[Point], streams: Sequence[random.Random]):
        self.side = config.side
        self.speed = config.speed
        self.initial = [tuple(p) for p in initial]
        self.streams = streams
        self.legs: list[list[WaypointLeg]] = [[] for _ in initial]
        self._script: dict[int, list[tuple[float, float, float]]] = {}
        for node, x, y, speed in config.script or ():
            self._script.setdefault(int(node), []).append((float(x), float(y), float(speed)))
        self._warmup = config.warmup
        self._static = [False] * len(initial)
        for node in range(len(initial)):
            if node in self._script:
                self._next_scripted(node, self.initial[node], self._warmup)
            elif self.speed > 0:
                self._draw(node, self.initial[node], 0.0)
            else:
                self._static[node] = True

    def _draw(self, node: int, origin: Point, depart: float) -> None:
        rng = self.streams[node]
        target = (rng.uniform(0.0, self.side), rng.uniform(0.0, self.side))
        self.legs[node].append(WaypointLeg(origin, target, depart, self.speed))

    def _next_scripted(self, node: int, origin: Point, depart: float) -> bool:
        plan = self._script[node]
        done = len(self.legs[node])
        if done >= len(plan):
            return False
        x, y, speed = plan[done]
        self.legs[node].append(WaypointLeg(origin, (x, y), depart, speed))
        return True

    def position(self, node: int, t: float) -> Point:
        if self._static[node]:
            return self.initial[node]
        legs = self.legs[node]
        leg = legs[-1]
        while t >= leg.arrival:
            if node in self._script:
                if not self._next_scripted(node, leg.target, leg.arrival):
                    return leg.target
            else:
                self._draw(node, leg.target, leg.arrival)
            leg = legs[-1]
        if t < leg.depart:
            return leg.origin
        return position_at(leg, t)

    def positions(self, t: float) -> list[Point]:
        return [self.position(i, t) for i in range(len(self.initial))]


# Events -------------------------------------------------------------------


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str  # "deliver" | "timer" | "start"
    node: NodeId
    payload: Optional[Payload] = None
    layer: str = MONITOR
    process: Optional[ProcessId] = None
    token: Optional[int] = None
    sent: Optional[float] = None


def link_delay(config: SimConfig, distance: float, u: float) -> float:
    """Per-message latency: a fixed floor plus a random part that grows with distance."""
    return config.delay_min + (config.delay_max - config.delay_min) * u * min(distance / config.range, 1.0)


def dispatch(
    config: SimConfig,
    node: NodeId,
    actions: Sequence,
    now: float,
    rng: random.Random,
    position: Callable[[int], Point],
    layer: str = MONITOR,
    process: Optional[ProcessId] = None,
    log: Optional[list] = None,
) -> list[SimEvent]:
    """Turn a state machine's wire and timer actions into future events.

    Connectivity is sampled at send time. Broadcasts get one try per
    receiver; a unicast is retried up to ``unicast_retries`` times.
    ``log`` (if given) receives one summary entry per action for the trace.
    """
    events: list[SimEvent] = []
    here = None
    for action in actions:
        if isinstance(action, Broadcast):
            here = here or position(node)
            heard = []
            for other in range(config.n_nodes):
                if other == node:
                    continue
                d = math.dist(here, position(other))
                if d > config.range or rng.random() < config.loss_prob:
                    continue
                t = now + link_delay(config, d, rng.random())
                events.append(SimEvent(t, "deliver", other, action.payload, sent=now))
                heard.append(other)
            if log is not None:
                log.append(["broadcast", action.payload.ptype.value, heard])
        elif isinstance(action, Unicast):
            here = here or position(node)
            d = math.dist(here, position(action.dest))
            ok, wait = False, 0.0
            if d <= config.range:
                # acknowledged link layer: each lost try costs one more link time
                for attempt in range(config.unicast_retries + 1):
                    if attempt:
                        wait += link_delay(config, d, rng.random())
                    if not rng.random() < config.loss_prob:
                        ok = True
                        break
            if ok:
                t = now + wait + link_delay(config, d, rng.random())
                events.append(SimEvent(t, "deliver", action.dest, action.payload, sent=now))
            if log is not None:
                log.append(["unicast", action.payload.ptype.value, action.dest, ok])
        elif isinstance(action, StartTimer):
            events.append(
                SimEvent(now + action.duration, "timer", node, layer=layer, process=process, token=action.token)
            )
            if log is not None:
                log.append(["timer", action.token, action.duration])
        elif isinstance(action, CancelTimer):
            if log is not None:
                log.append(["cancel", action.token])
        elif log is not None:
            log.append([type(action).__name__.lower()])
    return events


# Engine -------------------------------------------------------------------


def _proc(process: ProcessId) -> list:
    return [process.root, process.start_time]


def _streams(seed: int, n: int) -> dict[str, object]:
    ss = np.random.SeedSequence(int(seed) % (1 << 64))
    radio, roots, obs, place, moves = ss.spawn(5)

    def rand(s: np.random.SeedSequence) -> random.Random:
        return random.Random(int.from_bytes(s.generate_state(4).tobytes(), "little"))

    return {
        "radio": rand(radio),
        "roots": rand(roots),
        "obs": rand(obs),
        "place": rand(place),
        "moves": [rand(s) for s in moves.spawn(n)],
    }


@dataclass
class Simulator:
    config: SimConfig
    trace: Trace = field(init=False)

    def __post_init__(self):
        cfg = self.config
        streams = _streams(cfg.seed, cfg.n_nodes)
        self.radio: random.Random = streams["radio"]
        side = cfg.side
        if cfg.positions is not None:
            initial = [(float(x), float(y)) for x, y in cfg.positions]
        else:
            place = streams["place"]
            initial = [(place.uniform(0, side), place.uniform(0, side)) for _ in range(cfg.n_nodes)]
        self.mobility = Mobility(cfg, initial, streams["moves"])
        obs_rng = streams["obs"]
        self.observations = [obs_rng.randint(0, cfg.observation_max) for _ in range(cfg.n_nodes)]
        if cfg.root_ids is not None:
            self.roots = [int(r) for r in cfg.root_ids]
        else:
            order = list(range(cfg.n_nodes))
            streams["roots"].shuffle(order)
            self.roots = order[: cfg.roots]
        self.monitors: list[dict[ProcessId, protocol.MonitorState]] = [{} for _ in range(cfg.n_nodes)]
        self.routers: list[dict[ProcessId, router.RouterState]] = [{} for _ in range(cfg.n_nodes)]
        self.queue: list = []
        self._seq = 0
        self.now = 0.0
        self.trace = Trace(
            meta={
                "config": cfg.to_dict(),
                "n_nodes": cfg.n_nodes,
                "side": side,
                "observations": list(self.observations),
                "roots": list(self.roots),
                "initial_positions": [list(p) for p in initial],
            }
        )

    # queue ------------------------------------------------------------

    def push(self, event: SimEvent) -> None:
        heapq.heappush(self.queue, (event.time, self._seq, event))
        self._seq += 1

    def _record(self, node, kind, data) -> None:
        self.trace.records.append(TraceRecord(self.now, node, kind, data))

    def _send(self, node, actions, layer, process) -> list:
        log: list = []
        pos = lambda i: self.mobility.position(i, self.now)  # noqa: E731
        for ev in dispatch(self.config, node, actions, self.now, self.radio, pos, layer, process, log):
            self.push(ev)
        for action in actions:
            if isinstance(action, Verdict):
                agg = action.aggregate
                self._record(
                    node,
                    "verdict",
                    {
                        "process": _proc(process),
                        "sum": agg.sum,
                        "count": agg.count,
                        "covered": sorted(agg.covered),
                        "max_depth": agg.max_depth,
                    },
                )
            elif isinstance(action, Fail):
                self._record(node, "fail", {"layer": layer, "process": _proc(process), "reason": action.reason})
        return log

    # state machine glue -----------------------------------------------

    def _monitor(self, node: int, payload: Payload, event: str, sent=None) -> None:
        process = payload.process
        states = self.monitors[node]
        before = states.get(process) or protocol.MonitorState(observation=self.observations[node])
        after, actions = protocol.handle_payload(before, payload, node, self.now, self.config.timeout)
        if after is not before:
            states[process] = after
        log = self._send(node, actions, MONITOR, process)
        self._record(
            node,
            "event",
            {
                "event": event,
                "layer": MONITOR,
                "ptype": payload.ptype.value,
                "src": payload.source,
                "sent": sent,
                "process": _proc(process),
                "before": before.phase.value,
                "after": after.phase.value,
                "parent": after.parent,
                "depth": after.my_depth,
                "actions": log,
            },
        )
        for action in actions:
            if isinstance(action, RequestRoute):
                self._route(node, process, router.AggregateRequest(action.payload), "request-route", PayloadType.AGGREGATE, node)

    def _route(self, node, process, inp, event, ptype, src, sent=None) -> None:
        states = self.routers[node]
        before = states.get(process) or router.RouterState()
        after, actions = router.route_step(
            before, inp, node, self.now, self.config.timeout, self.config.retry_cap
        )
        if after is not before:
            states[process] = after
        log = self._send(node, actions, ROUTER, process)
        self._record(
            node,
            "event",
            {
                "event": event,
                "layer": ROUTER,
                "ptype": ptype.value if ptype is not None else "TIMEOUT",
                "src": src,
                "sent": sent,
                "process": _proc(process),
                "before": before.phase.value,
                "after": after.phase.value,
                "actions": log,
            },
        )
        chosen = before.phase is router.RouterPhase.WR and after.phase is router.RouterPhase.DN
        if isinstance(inp, router.HelloReply) and not chosen:
            # later repliers become fallback relays for the monitoring layer
            mon = self.monitors[node].get(process)
            if mon is not None and mon.pending_aggregate is not None and mon.pending_aggregate.pid == inp.payload.ref:
                self.monitors[node][process] = protocol.note_relay(mon, inp.payload.source)
        for action in actions:
            if isinstance(action, Deliver):
                self._monitor(node, action.payload, "routed", sent)

    # main loop ----------------------------------------------------------

    def run(self) -> Trace:
        cfg = self.config
        start = cfg.warmup
        processes = []
        for root in self.roots:
            processes.append(ProcessId(root, start))
            self.push(SimEvent(start, "start", root, process=processes[-1]))
        reason = "quiescent"
        while self.queue:
            t, _, ev = heapq.heappop(self.queue)
            if t > cfg.max_sim_time:
                reason = "max_sim_time"
                break
            self.now = t
            if ev.kind == "start":
                self._record(ev.node, "start", {"process": _proc(ev.process)})
                self._monitor(ev.node, protocol.start_payload(ev.node, t), "start")
            elif ev.kind == "deliver":
                p = ev.payload
                if p.ptype in MONITOR_TYPES:
                    self._monitor(ev.node, p, "deliver", ev.sent)
                else:
                    self._route(ev.node, p.process, router.input_for(p), "deliver", p.ptype, p.source, ev.sent)
            elif ev.layer == MONITOR:
                self._monitor(ev.node, timeout_payload(ev.process, ev.node, t, ev.token), "timer")
            else:
                self._route(ev.node, ev.process, router.Timeout(ev.token), "timer", None, ev.node)
        end = min(self.now, cfg.max_sim_time) if reason == "quiescent" else cfg.max_sim_time
        self.now = end
        verdicts = {tuple(r.data["process"]) for r in self.trace.records if r.kind == "verdict"}
        self._record(
            None,
            "end",
            {
                "reason": reason,
                "nonconvergent": [_proc(p) for p in processes if (p.root, p.start_time) not in verdicts],
            },
        )
        # close out trajectories so positions can be replayed up to the end
        for node in range(cfg.n_nodes):
            self.mobility.position(node, end)
        self.trace.meta["legs"] = [
            [[*leg.origin, *leg.target, leg.depart, leg.speed] for leg in legs] for legs in self.mobility.legs
        ]
        return self.trace


def run(config: SimConfig) -> Trace:
    """Simulate one monitoring cycle; equal configs give identical traces."""
    return Simulator(config).run()
