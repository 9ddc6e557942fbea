"""Routing-agent abstraction, packet taxonomy, and the route-pending send buffer.

Every protocol implements RoutingAgent.  An agent only ever mutates its own
node's state; all inter-node influence flows through transmitted frames.
Data packets carry a 32-hop TTL.  Reactive protocols park data in a
SendBuffer while discovery runs (64 packets, 30 s timeout, overflow evicts
the oldest); DSDV never buffers -- an unrouteable packet drops immediately.
"""

from collections import deque
from dataclasses import dataclass

from ..engine import NS_PER_S, seconds
from ..medium import BROADCAST, Frame, KIND_DATA, KIND_ROUTING

DATA_PTYPE = "cbr"


@dataclass
class CoreParams:
    sendbuf_capacity: int = 64
    sendbuf_timeout_s: float = 30.0
    data_ttl: int = 32
    payload_bytes: int = 512


class Packet:
    __slots__ = ("uid", "kind", "ptype", "size", "app_size", "fsrc", "fdst",
                 "flow_seq", "origin_ns", "ttl", "route", "cursor", "body")

    def __init__(self, uid, kind, ptype, size, fsrc, fdst, flow_seq=0,
                 origin_ns=0, ttl=0, body=None):
        self.uid = uid
        self.kind = kind
        self.ptype = ptype
        self.size = size
        self.app_size = size
        self.fsrc = fsrc
        self.fdst = fdst
        self.flow_seq = flow_seq
        self.origin_ns = origin_ns
        self.ttl = ttl
        self.route = None  # full source route (node list) when stamped
        self.cursor = 0
        self.body = body  # protocol-specific message


class RunContext:
    """Per-run shared services handed to every agent."""

    def __init__(self, engine, medium, trace, params, stream, n):
        self.engine = engine
        self.medium = medium
        self.trace = trace
        self.params = params
        self.stream = stream
        self.n = n
        self._uid = 0
        self.route_steps = {}  # uid -> [(dest_seq, hops), ...] (AODV monitor)
        self.route_step_violations = 0

    def next_uid(self):
        uid = self._uid
        self._uid += 1
        return uid

    def note_route_step(self, uid, dest_seq, hops):
        self.route_steps.setdefault(uid, []).append((dest_seq, -hops))

    def check_route_steps(self, uid):
        steps = self.route_steps.pop(uid, None)
        if steps and any(b < a for a, b in zip(steps, steps[1:])):
            self.route_step_violations += 1


class SendBuffer:
    """FIFO buffer for data packets awaiting a route."""

    def __init__(self, capacity, timeout_s):
        self.capacity = capacity
        self.timeout_ns = seconds(timeout_s)
        self._entries = deque()  # (enqueue_ns, pkt)

    def __len__(self):
        return len(self._entries)

    def add(self, pkt, now):
        """Buffer pkt; returns the evicted oldest packet on overflow."""
        evicted = None
        if len(self._entries) >= self.capacity:
            evicted = self._entries.popleft()[1]
        self._entries.append((now, pkt))
        return evicted

    def take_for(self, dst):
        taken = [p for _, p in self._entries if p.fdst == dst]
        if taken:
            self._entries = deque(e for e in self._entries if e[1].fdst != dst)
        return taken

    def expire(self, now):
        """Remove and return every packet buffered longer than the timeout."""
        dropped = []
        while self._entries and now - self._entries[0][0] > self.timeout_ns:
            dropped.append(self._entries.popleft()[1])
        return dropped

    def has_dest(self, dst):
        return any(p.fdst == dst for _, p in self._entries)

    def packets(self):
        return [p for _, p in self._entries]


class RoutingAgent:
    """Behavioral interface every protocol implements, plus shared plumbing."""

    ptype_prefix = "?"

    def __init__(self, node, ctx: RunContext):
        self.node = node
        self.ctx = ctx
        self._forwarded_uids = set()

    # -- protocol hooks --

    def start(self):
        pass

    def on_data_from_app(self, pkt):
        raise NotImplementedError

    def on_packet_from_net(self, pkt, from_hop):
        raise NotImplementedError

    def on_link_break(self, next_hop, pkt):
        pass

    def expire_buffer(self):
        pass

    # -- shared plumbing --

    def now(self):
        return self.ctx.engine.now

    def timer(self, delay_s, fn, args=(), kind="timer"):
        return self.ctx.engine.schedule_in(seconds(delay_s), fn, args,
                                           target=self.node, kind=kind)

    def new_routing_pkt(self, ptype, size, fsrc, fdst, body=None, ttl=1):
        return Packet(self.ctx.next_uid(), KIND_ROUTING, ptype, size, fsrc, fdst,
                      origin_ns=self.now(), ttl=ttl, body=body)

    def send_routing(self, pkt, next_hop, originated):
        """Hand a routing packet to the MAC; traces the hop-wise s/f record."""
        self.ctx.trace.emit("s" if originated else "f", self.now(), self.node,
                            "RTR", pkt.uid, pkt.ptype, pkt.size, pkt.fsrc, pkt.fdst)
        frame = Frame(pkt, self.node, next_hop,
                      pkt.size + self.ctx.medium.radio.frame_overhead_bytes)
        self.ctx.medium.send(self.node, frame)

    def send_data_frame(self, pkt, next_hop):
        """Transmit a data packet one hop; traces `f` at forwarding nodes."""
        if self.node != pkt.fsrc:
            self.ctx.trace.emit("f", self.now(), self.node, "RTR", pkt.uid,
                                pkt.ptype, pkt.size, pkt.fsrc, pkt.fdst)
        frame = Frame(pkt, self.node, next_hop,
                      pkt.size + self.ctx.medium.radio.frame_overhead_bytes)
        self.ctx.medium.send(self.node, frame)

    def deliver_data(self, pkt):
        self.ctx.trace.emit("r", self.now(), self.node, "AGT", pkt.uid,
                            pkt.ptype, pkt.app_size, pkt.fsrc, pkt.fdst)
        self.ctx.check_route_steps(pkt.uid)

    def drop_data(self, pkt, reason, layer="RTR"):
        self.ctx.trace.emit("d", self.now(), self.node, layer, pkt.uid,
                            pkt.ptype, pkt.size, pkt.fsrc, pkt.fdst, reason)

    def ttl_expired(self, pkt):
        """Decrement the hop budget; drop (TTL) and return True at zero."""
        pkt.ttl -= 1
        if pkt.ttl <= 0:
            self.drop_data(pkt, "TTL")
            return True
        return False

    def loop_detected(self, pkt):
        """Routing-loop suppression for hop-by-hop data: a node that handles
        the same data packet twice drops it (routes changed under the packet
        while it sat in queues).  Returns True after tracing the drop."""
        if pkt.uid in self._forwarded_uids:
            self.drop_data(pkt, "NRTE")
            return True
        self._forwarded_uids.add(pkt.uid)
        return False
