"""Dynamic Source Routing.

Fully on-demand: no beacons, no periodic advertisements.  Discovery floods an
RREQ that accumulates the traversed node list (the route record); the target
-- or any node holding a cached route to it -- replies with the complete
source route, unicast back along the reversed record (links are symmetric in
the unit-disk medium).  Data packets carry their full route and advance a
cursor hop by hop; the header costs 4 bytes per listed node.  A failed hop
sends a route error naming the broken link back to the packet's source, and
every node on that return path prunes cached routes using the link.  Caches
are per-node, FIFO-bounded, with a per-route expiry.  Promiscuous overhearing
and salvaging are not implemented; replying from cache is.
"""

from dataclasses import dataclass

from ..engine import seconds
from ..medium import BROADCAST
from .base import RoutingAgent, SendBuffer

PT_RREQ = "dsr:rreq"
PT_RREP = "dsr:rrep"
PT_RERR = "dsr:rerr"

ROUTE_BYTES_PER_HOP = 4


@dataclass
class DsrParams:
    cache_capacity: int = 64  # routes per node, FIFO eviction
    route_expiry_s: float = 300.0
    discovery_timeout_s: float = 0.5  # doubles per attempt
    discovery_timeout_max_s: float = 10.0
    discovery_max_attempts: int = 6
    # binary exponential holdoff between consecutive failed discoveries
    discovery_holdoff_s: float = 2.0
    discovery_holdoff_max_s: float = 10.0
    seen_expiry_s: float = 30.0
    rreq_base_bytes: int = 16
    rrep_base_bytes: int = 16
    rerr_bytes: int = 20


class _Rreq:
    __slots__ = ("orig", "req_id", "target", "record")

    def __init__(self, orig, req_id, target, record):
        self.orig = orig
        self.req_id = req_id
        self.target = target
        self.record = record  # tuple of traversed nodes, originator first


class _Rerr:
    __slots__ = ("broken_a", "broken_b", "back_path", "cursor")

    def __init__(self, broken_a, broken_b, back_path, cursor):
        self.broken_a = broken_a
        self.broken_b = broken_b
        self.back_path = back_path  # node list from detector to source
        self.cursor = cursor


class RouteCache:
    """Per-destination lists of cached source routes with install times."""

    def __init__(self, capacity, expiry_ns):
        self.capacity = capacity
        self.expiry_ns = expiry_ns
        self._routes = {}  # dst -> list[(route tuple, installed_ns)]
        self._order = []  # insertion order of (dst, route) for FIFO eviction

    def add(self, route, now):
        dst = route[-1]
        routes = self._routes.setdefault(dst, [])
        if any(r == route for r, _ in routes):
            return
        routes.append((route, now))
        self._order.append((dst, route))
        if len(self._order) > self.capacity:
            old_dst, old_route = self._order.pop(0)
            entries = self._routes.get(old_dst, [])
            self._routes[old_dst] = [e for e in entries if e[0] != old_route]

    def lookup(self, dst, now):
        """Shortest unexpired route to dst (ties: freshest install)."""
        best = None
        for route, installed in self._routes.get(dst, ()):
            if now - installed > self.expiry_ns:
                continue
            if best is None or (len(route), -installed) < (len(best[0]), -best[1]):
                best = (route, installed)
        return best[0] if best else None

    def prune_link(self, a, b):
        """Delete every cached route using link a-b (either direction; the
        unit-disk medium is symmetric, so a dead link is dead both ways)."""
        for dst, entries in self._routes.items():
            kept = []
            for route, installed in entries:
                uses = any((route[i] == a and route[i + 1] == b)
                           or (route[i] == b and route[i + 1] == a)
                           for i in range(len(route) - 1))
                if uses:
                    self._order = [(d, r) for d, r in self._order if r != route or d != dst]
                else:
                    kept.append((route, installed))
            self._routes[dst] = kept

    def all_routes(self):
        return [r for entries in self._routes.values() for r, _ in entries]


class DsrAgent(RoutingAgent):
    ptype_prefix = "dsr"

    def __init__(self, node, ctx):
        super().__init__(node, ctx)
        self.p = ctx.params.dsr
        core = ctx.params.core
        self.cache = RouteCache(self.p.cache_capacity, seconds(self.p.route_expiry_s))
        self.buffer = SendBuffer(core.sendbuf_capacity, core.sendbuf_timeout_s)
        self.req_id = 0
        self.seen = {}
        self.pending = {}  # dst -> [attempt, generation]
        self.holdoff = {}  # dst -> [not-before ns, consecutive failures, timer set]

    # -- data plane --

    def on_data_from_app(self, pkt):
        route = self.cache.lookup(pkt.fdst, self.now())
        if route is not None:
            self._stamp_and_send(pkt, route)
            return
        evicted = self.buffer.add(pkt, self.now())
        if evicted is not None:
            self.drop_data(evicted, "IFQ-SB")
        self._maybe_discover(pkt.fdst)

    def _maybe_discover(self, dst):
        if dst in self.pending:
            return
        hold = self.holdoff.get(dst)
        if hold is not None and self.now() < hold[0]:
            if not hold[2]:
                hold[2] = True
                self.ctx.engine.schedule_at(hold[0], self._holdoff_expired, (dst,),
                                            target=self.node, kind="dsr-holdoff")
            return
        self._originate_discovery(dst)

    def _holdoff_expired(self, dst):
        hold = self.holdoff.get(dst)
        if hold is not None:
            hold[2] = False
        if dst not in self.pending and self.buffer.has_dest(dst):
            if self.cache.lookup(dst, self.now()) is not None:
                self._flush(dst)
            else:
                self._originate_discovery(dst)

    def _stamp_and_send(self, pkt, route):
        pkt.route = route
        pkt.cursor = 0
        pkt.size = pkt.app_size + ROUTE_BYTES_PER_HOP * len(route)
        self.send_data_frame(pkt, route[1])

    def _forward_data(self, pkt):
        route = pkt.route
        idx = pkt.cursor + 1
        if idx >= len(route) - 1 or route[idx] != self.node:
            self.drop_data(pkt, "NRTE")  # stale or corrupt source route
            return
        pkt.cursor = idx
        self.send_data_frame(pkt, route[idx + 1])

    # -- discovery --

    def _originate_discovery(self, dst):
        self.req_id += 1
        gen = self.req_id
        self.pending[dst] = [0, gen]
        self._send_rreq(dst, 0, gen)

    def _send_rreq(self, dst, attempt, gen):
        self.req_id += 1
        body = _Rreq(self.node, self.req_id, dst, (self.node,))
        size = self.p.rreq_base_bytes + ROUTE_BYTES_PER_HOP
        pkt = self.new_routing_pkt(PT_RREQ, size, self.node, dst, body=body,
                                   ttl=self.ctx.params.core.data_ttl)
        self.seen[(self.node, self.req_id)] = self.now() + seconds(self.p.seen_expiry_s)
        self.send_routing(pkt, BROADCAST, originated=True)
        wait = min(self.p.discovery_timeout_s * (2 ** attempt),
                   self.p.discovery_timeout_max_s)
        self.timer(wait, self._discovery_timeout, (dst, attempt, gen), kind="dsr-disc")

    def _discovery_timeout(self, dst, attempt, gen):
        state = self.pending.get(dst)
        if state is None or state[1] != gen or state[0] != attempt:
            return
        if self.cache.lookup(dst, self.now()) is not None:
            del self.pending[dst]
            self._flush(dst)
            return
        if not self.buffer.has_dest(dst):
            del self.pending[dst]
            return
        nxt = attempt + 1
        if nxt < self.p.discovery_max_attempts:
            state[0] = nxt
            self._send_rreq(dst, nxt, gen)
            return
        del self.pending[dst]
        fails = self.holdoff.get(dst, (0, 0, False))[1] + 1
        wait = min(self.p.discovery_holdoff_s * (2 ** (fails - 1)),
                   self.p.discovery_holdoff_max_s)
        self.holdoff[dst] = [self.now() + seconds(wait), fails, False]
        for pkt in self.buffer.take_for(dst):
            self.drop_data(pkt, "NRTE")

    def _flush(self, dst):
        route = self.cache.lookup(dst, self.now())
        if route is None:
            return
        for pkt in self.buffer.take_for(dst):
            self._stamp_and_send(pkt, route)

    def _handle_rreq(self, pkt, frm):
        rq = pkt.body
        if rq.orig == self.node or self.node in rq.record:
            return
        key = (rq.orig, rq.req_id)
        if key in self.seen:
            return
        self.seen[key] = self.now() + seconds(self.p.seen_expiry_s)
        if len(self.seen) > 4096:
            now = self.now()
            self.seen = {k: v for k, v in self.seen.items() if v > now}

        # links are symmetric: the reversed record is a route back to the originator
        self.cache.add((self.node,) + tuple(reversed(rq.record)), self.now())

        back_path = (self.node,) + tuple(reversed(rq.record))  # self ... originator
        if rq.target == self.node:
            self._reply(tuple(rq.record) + (self.node,), back_path, frm)
            return
        cached = self.cache.lookup(rq.target, self.now())
        if cached is not None:
            full = tuple(rq.record) + cached  # cached starts at self
            if len(set(full)) == len(full):
                self._reply(full, back_path, frm)
                return
        if pkt.ttl - 1 <= 0:
            return
        fwd = _Rreq(rq.orig, rq.req_id, rq.target, tuple(rq.record) + (self.node,))
        size = self.p.rreq_base_bytes + ROUTE_BYTES_PER_HOP * len(fwd.record)
        out = self.new_routing_pkt(PT_RREQ, size, rq.orig, rq.target, body=fwd,
                                   ttl=pkt.ttl - 1)
        out.uid = pkt.uid
        self.send_routing(out, BROADCAST, originated=False)

    def _reply(self, route, back_path, next_hop):
        """Send `route` to its originator, unicast along the reversed record."""
        size = self.p.rrep_base_bytes + ROUTE_BYTES_PER_HOP * len(route)
        pkt = self.new_routing_pkt(PT_RREP, size, self.node, route[0], body=route)
        pkt.route = back_path
        pkt.cursor = 0
        self.send_routing(pkt, next_hop, originated=True)

    def _handle_rrep(self, pkt, frm):
        route = pkt.body
        if route[0] == self.node:
            self.cache.add(tuple(route), self.now())
            dst = route[-1]
            self.pending.pop(dst, None)
            self.holdoff.pop(dst, None)
            self._flush(dst)
            return
        idx = pkt.cursor + 1
        back = pkt.route
        if idx >= len(back) - 1 or back[idx] != self.node:
            return
        pkt.cursor = idx
        self.send_routing(pkt, back[idx + 1], originated=False)

    # -- maintenance --

    def on_link_break(self, next_hop, pkt=None):
        self.cache.prune_link(self.node, next_hop)
        if pkt is None or pkt.route is None or pkt.ptype == PT_RERR:
            return
        route = pkt.route
        if pkt.ptype == PT_RREP:
            return  # discovery retry recovers; no nested errors
        try:
            my_idx = route.index(self.node)
        except ValueError:
            return
        if my_idx == 0:
            return  # break at the source: cache already pruned, next send rediscovers
        back_path = tuple(reversed(route[: my_idx + 1]))  # self ... source
        body = _Rerr(self.node, next_hop, back_path, 0)
        out = self.new_routing_pkt(PT_RERR, self.p.rerr_bytes, self.node,
                                   back_path[-1], body=body)
        out.route = back_path
        self.send_routing(out, back_path[1], originated=True)

    def _handle_rerr(self, pkt, frm):
        er = pkt.body
        self.cache.prune_link(er.broken_a, er.broken_b)
        idx = er.cursor + 1
        if idx >= len(er.back_path) - 1 or er.back_path[idx] != self.node:
            return  # reached the source (or a stale copy)
        er.cursor = idx
        pkt.route = er.back_path
        pkt.cursor = idx
        self.send_routing(pkt, er.back_path[idx + 1], originated=False)

    # -- demux --

    def on_packet_from_net(self, pkt, from_hop):
        ptype = pkt.ptype
        if ptype == "cbr":
            if pkt.fdst == self.node:
                self.deliver_data(pkt)
            elif not self.ttl_expired(pkt):
                self._forward_data(pkt)
        elif ptype == PT_RREQ:
            self._handle_rreq(pkt, from_hop)
        elif ptype == PT_RREP:
            self._handle_rrep(pkt, from_hop)
        elif ptype == PT_RERR:
            self._handle_rerr(pkt, from_hop)

    def expire_buffer(self):
        for pkt in self.buffer.expire(self.now()):
            self.drop_data(pkt, "TOUT")
