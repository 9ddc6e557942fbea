"""Zone Routing Protocol: proactive inside a radius-r zone, reactive beyond.

Neighbor discovery runs on 1 s beacons (3-miss timeout).  IARP floods each
node's neighbor list with ttl = r-1, so every node keeps link state for
sources within r-1 hops and computes its zone (cutoff BFS), intra-zone next
hops and the peripheral set (nodes at exactly distance r).  Data to an
in-zone destination forwards hop-by-hop with no queries.

Anything farther triggers an IERP query relayed by bordercast: one copy per
distinct first hop, each carrying its subset of peripheral targets, an
accumulated route of the nodes actually traversed, and a covered-marker set
(query detection QD1) that stops re-flooding into zones already queried.  A
node whose zone contains the target answers with the accumulated route plus
its intra-zone tail; the reply and subsequent data travel as source routes.
Inter-zone route failures send an error back along the route's prefix and
every node on the way drops stored routes using the broken link.

The radius is a config constant, never adapted at runtime.
"""

from dataclasses import dataclass

from ..engine import seconds
from ..medium import BROADCAST
from .base import RoutingAgent, SendBuffer

PT_BEACON = "zrp:beacon"
PT_IARP = "zrp:iarp"
PT_QUERY = "zrp:ierp_q"
PT_REPLY = "zrp:ierp_r"
PT_ERROR = "zrp:ierp_e"

ROUTE_BYTES_PER_HOP = 4


@dataclass
class ZrpParams:
    radius: int = 2
    beacon_interval_s: float = 1.0
    beacon_miss: int = 3
    iarp_refresh_s: float = 10.0
    iarp_min_gap_s: float = 1.0
    link_expiry_s: float = 30.0
    query_timeout_s: float = 2.0
    query_attempts: int = 3
    # binary exponential holdoff between consecutive failed queries
    query_holdoff_s: float = 2.0
    query_holdoff_max_s: float = 10.0
    seen_expiry_s: float = 30.0
    beacon_bytes: int = 28
    iarp_base_bytes: int = 16
    query_base_bytes: int = 24
    reply_base_bytes: int = 16
    error_bytes: int = 20


class _Query:
    __slots__ = ("orig", "qid", "target", "acc", "targets", "covered")

    def __init__(self, orig, qid, target, acc, targets, covered):
        self.orig = orig
        self.qid = qid
        self.target = target
        self.acc = acc  # nodes actually traversed, originator first
        self.targets = targets  # peripheral nodes this copy is aimed at
        self.covered = covered  # frozenset of nodes in already-queried zones


class _Error:
    __slots__ = ("broken_a", "broken_b", "back_path", "cursor")

    def __init__(self, broken_a, broken_b, back_path, cursor):
        self.broken_a = broken_a
        self.broken_b = broken_b
        self.back_path = back_path
        self.cursor = cursor


class ZrpAgent(RoutingAgent):
    ptype_prefix = "zrp"

    def __init__(self, node, ctx):
        super().__init__(node, ctx)
        self.p = ctx.params.zrp
        core = ctx.params.core
        self.neighbors = {}  # nh -> last beacon ns
        self.link_state = {}  # origin -> (sorted neighbor tuple, stamp ns)
        self.iarp_seen = {}  # origin -> highest seq accepted
        self.iarp_seq = 0
        self._flood_pending = False
        self._last_flood_ns = -(10 ** 12)
        self._zone_dirty = True
        self._dist = {node: 0}
        self._parent = {}
        self._peripheral = ()
        self.inter_routes = {}  # dst -> source route tuple
        self.buffer = SendBuffer(core.sendbuf_capacity, core.sendbuf_timeout_s)
        self.qid = 0
        self.seen = {}  # (orig, qid) -> expiry
        self.pending = {}  # dst -> [attempt, generation]
        self.holdoff = {}  # dst -> [not-before ns, consecutive failures, timer set]

    def start(self):
        phase = self.ctx.stream.uniform(0.0, self.p.beacon_interval_s)
        self.timer(phase, self._beacon_tick, kind="zrp-beacon")
        refresh_phase = self.ctx.stream.uniform(0.0, self.p.iarp_refresh_s)
        self.timer(refresh_phase, self._refresh_tick, kind="zrp-iarp-refresh")

    # -- neighbor discovery (beacons) --

    def _beacon_tick(self):
        now = self.now()
        limit = seconds(self.p.beacon_miss * self.p.beacon_interval_s)
        lost = [nh for nh, last in self.neighbors.items() if now - last > limit]
        for nh in lost:
            del self.neighbors[nh]
        if lost:
            self._neighbor_change()
        pkt = self.new_routing_pkt(PT_BEACON, self.p.beacon_bytes, self.node, BROADCAST)
        self.send_routing(pkt, BROADCAST, originated=True)
        self.timer(self.p.beacon_interval_s, self._beacon_tick, kind="zrp-beacon")

    def _heard_beacon(self, frm):
        known = frm in self.neighbors
        self.neighbors[frm] = self.now()
        if not known:
            self._neighbor_change()

    def _neighbor_change(self):
        self._zone_dirty = True
        if self._flood_pending:
            return
        self._flood_pending = True
        at = max(self.now(), self._last_flood_ns + seconds(self.p.iarp_min_gap_s))
        self.ctx.engine.schedule_at(at, self._fire_flood, target=self.node,
                                    kind="zrp-iarp-trigger")

    # -- IARP link-state flood --

    def _refresh_tick(self):
        self._flood_link_state()
        self.timer(self.p.iarp_refresh_s, self._refresh_tick, kind="zrp-iarp-refresh")

    def _fire_flood(self):
        self._flood_pending = False
        self._flood_link_state()

    def _flood_link_state(self):
        ttl = self.p.radius - 1
        if ttl <= 0:
            return  # r=1 zones degenerate to the neighbor table alone
        self.iarp_seq += 1
        nbrs = tuple(sorted(self.neighbors))
        size = self.p.iarp_base_bytes + ROUTE_BYTES_PER_HOP * len(nbrs)
        pkt = self.new_routing_pkt(PT_IARP, size, self.node, BROADCAST,
                                   body=(self.node, self.iarp_seq, nbrs), ttl=ttl)
        self.send_routing(pkt, BROADCAST, originated=True)
        self._last_flood_ns = self.now()

    def _handle_iarp(self, pkt, frm):
        origin, seq, nbrs = pkt.body
        if origin == self.node or self.iarp_seen.get(origin, 0) >= seq:
            return
        self.iarp_seen[origin] = seq
        old = self.link_state.get(origin)
        self.link_state[origin] = (nbrs, self.now())
        if old is None or old[0] != nbrs:
            self._zone_dirty = True
        if pkt.ttl - 1 > 0:
            out = self.new_routing_pkt(PT_IARP, pkt.size, origin, BROADCAST,
                                       body=pkt.body, ttl=pkt.ttl - 1)
            out.uid = pkt.uid
            self.send_routing(out, BROADCAST, originated=False)

    # -- zone computation (cutoff BFS over known link state) --

    def _zone(self):
        if not self._zone_dirty:
            return
        now = self.now()
        expiry = seconds(self.p.link_expiry_s)
        r = self.p.radius
        dist = {self.node: 0}
        parent = {}
        frontier = [self.node]
        for d in range(r):
            nxt = []
            for u in frontier:
                if u == self.node:
                    links = sorted(self.neighbors)
                else:
                    ls = self.link_state.get(u)
                    if ls is None or now - ls[1] > expiry:
                        continue
                    links = ls[0]
                for v in links:
                    if v not in dist:
                        dist[v] = d + 1
                        parent[v] = u
                        nxt.append(v)
            frontier = nxt
        self._dist = dist
        self._parent = parent
        self._peripheral = tuple(sorted(v for v, d in dist.items() if d == r))
        self._zone_dirty = False

    def zone_members(self):
        self._zone()
        return set(self._dist)

    def peripheral_set(self):
        self._zone()
        return set(self._peripheral)

    def _next_hop_in_zone(self, dst):
        self._zone()
        if dst not in self._dist or dst == self.node:
            return None
        v = dst
        while self._parent.get(v) != self.node:
            v = self._parent.get(v)
            if v is None:
                return None
        return v

    def _path_in_zone(self, dst):
        self._zone()
        if dst not in self._dist:
            return None
        path = [dst]
        v = dst
        while v != self.node:
            v = self._parent.get(v)
            if v is None:
                return None
            path.append(v)
        path.reverse()
        return tuple(path)

    # -- data plane --

    def on_data_from_app(self, pkt):
        self._route_data(pkt)

    def _route_data(self, pkt):
        dst = pkt.fdst
        nh = self._next_hop_in_zone(dst)
        if nh is not None:
            # intra-zone packets carry the sender's distance claim; each hop
            # must be strictly closer, so stale tables cannot loop a packet
            pkt.body = self._dist[dst]
            self.send_data_frame(pkt, nh)
            return
        route = self.inter_routes.get(dst)
        if route is not None:
            try:
                idx = route.index(self.node)
            except ValueError:
                idx = -1
            if 0 <= idx < len(route) - 1:
                pkt.route = route
                pkt.cursor = idx
                pkt.size = pkt.app_size + ROUTE_BYTES_PER_HOP * len(route)
                self.send_data_frame(pkt, route[idx + 1])
                return
            del self.inter_routes[dst]
        evicted = self.buffer.add(pkt, self.now())
        if evicted is not None:
            self.drop_data(evicted, "IFQ-SB")
        self._maybe_query(dst)

    def _maybe_query(self, dst):
        if dst in self.pending:
            return
        hold = self.holdoff.get(dst)
        if hold is not None and self.now() < hold[0]:
            if not hold[2]:
                hold[2] = True
                self.ctx.engine.schedule_at(hold[0], self._holdoff_expired, (dst,),
                                            target=self.node, kind="zrp-holdoff")
            return
        self._originate_query(dst)

    def _holdoff_expired(self, dst):
        hold = self.holdoff.get(dst)
        if hold is not None:
            hold[2] = False
        if dst not in self.pending and self.buffer.has_dest(dst):
            for data in self.buffer.take_for(dst):
                self._route_data(data)

    def _forward_data(self, pkt):
        if pkt.route is not None:
            idx = pkt.cursor + 1
            if idx >= len(pkt.route) - 1 or pkt.route[idx] != self.node:
                self.drop_data(pkt, "NRTE")
                return
            pkt.cursor = idx
            self.send_data_frame(pkt, pkt.route[idx + 1])
            return
        # in-transit intra-zone data: forward only while strictly approaching
        # the destination; anything else is a stale-table failure, not ours to
        # re-query (re-stamping mid-path could revisit earlier hops)
        dst = pkt.fdst
        nh = self._next_hop_in_zone(dst)
        claim = pkt.body
        if nh is None or (claim is not None and self._dist[dst] >= claim):
            self.drop_data(pkt, "NRTE")
            return
        pkt.body = self._dist[dst]
        self.send_data_frame(pkt, nh)

    # -- IERP query / bordercast --

    def _originate_query(self, dst):
        self.qid += 1
        self.pending[dst] = [0, self.qid]
        self._send_query(dst, 0, self.qid)

    def _send_query(self, dst, attempt, gen):
        self.qid += 1
        q = _Query(self.node, self.qid, dst, (self.node,), (), frozenset())
        self.seen[(self.node, self.qid)] = self.now() + seconds(self.p.seen_expiry_s)
        self._bordercast(q, uid=None)
        self.timer(self.p.query_timeout_s, self._query_timeout, (dst, attempt, gen),
                   kind="zrp-queryto")

    def _query_timeout(self, dst, attempt, gen):
        state = self.pending.get(dst)
        if state is None or state[1] != gen or state[0] != attempt:
            return
        if not self.buffer.has_dest(dst):
            del self.pending[dst]
            return
        nxt = attempt + 1
        if nxt < self.p.query_attempts:
            state[0] = nxt
            self._send_query(dst, nxt, gen)
            return
        del self.pending[dst]
        fails = self.holdoff.get(dst, (0, 0, False))[1] + 1
        wait = min(self.p.query_holdoff_s * (2 ** (fails - 1)),
                   self.p.query_holdoff_max_s)
        self.holdoff[dst] = [self.now() + seconds(wait), fails, False]
        for pkt in self.buffer.take_for(dst):
            self.drop_data(pkt, "NRTE")

    def _bordercast(self, q, uid):
        """Relay the query toward every uncovered peripheral, one copy per
        distinct first hop carrying that subtree's targets."""
        self._zone()
        targets = set(q.targets)
        targets.discard(self.node)
        new_targets = [p for p in self._peripheral if p not in q.covered]
        covered = q.covered | set(self._dist) | set(new_targets)
        targets.update(new_targets)
        groups = {}
        for t in sorted(targets):
            nh = self._next_hop_in_zone(t)
            if nh is not None:
                groups.setdefault(nh, []).append(t)
        for nh in sorted(groups):
            sub = tuple(groups[nh])
            body = _Query(q.orig, q.qid, q.target, q.acc, sub, covered)
            size = (self.p.query_base_bytes
                    + ROUTE_BYTES_PER_HOP * (len(q.acc) + len(sub)))
            pkt = self.new_routing_pkt(PT_QUERY, size, q.orig, q.target, body=body,
                                       ttl=self.ctx.params.core.data_ttl)
            originated = uid is None
            if uid is not None:
                pkt.uid = uid
            self.send_routing(pkt, nh, originated=originated)

    def _handle_query(self, pkt, frm):
        q = pkt.body
        key = (q.orig, q.qid)
        if key in self.seen:
            return
        self.seen[key] = self.now() + seconds(self.p.seen_expiry_s)
        if len(self.seen) > 4096:
            now = self.now()
            self.seen = {k: v for k, v in self.seen.items() if v > now}
        acc = q.acc + (self.node,)
        path = self._path_in_zone(q.target)
        if path is not None:
            full = acc + path[1:]
            if len(set(full)) == len(full):
                self._send_reply(full, acc)
            return
        cont = _Query(q.orig, q.qid, q.target, acc, q.targets, q.covered)
        self._bordercast(cont, uid=pkt.uid)

    def _send_reply(self, route, acc):
        back = tuple(reversed(acc))
        size = self.p.reply_base_bytes + ROUTE_BYTES_PER_HOP * len(route)
        pkt = self.new_routing_pkt(PT_REPLY, size, self.node, route[0], body=route)
        pkt.route = back
        pkt.cursor = 0
        self.send_routing(pkt, back[1], originated=True)

    def _handle_reply(self, pkt, frm):
        route = pkt.body
        if route[0] == self.node:
            dst = route[-1]
            self.inter_routes[dst] = tuple(route)
            self.pending.pop(dst, None)
            self.holdoff.pop(dst, None)
            for data in self.buffer.take_for(dst):
                self._route_data(data)
            return
        back = pkt.route
        idx = pkt.cursor + 1
        if idx >= len(back) - 1 or back[idx] != self.node:
            return
        pkt.cursor = idx
        self.send_routing(pkt, back[idx + 1], originated=False)

    # -- maintenance --

    def on_link_break(self, next_hop, pkt=None):
        if next_hop in self.neighbors:
            del self.neighbors[next_hop]
            self._neighbor_change()
        if pkt is None or pkt.ptype != "cbr" or pkt.route is None:
            return
        route = pkt.route
        try:
            idx = route.index(self.node)
        except ValueError:
            return
        self._prune_inter_link(self.node, next_hop)
        if idx == 0:
            return
        back_path = tuple(reversed(route[: idx + 1]))
        body = _Error(self.node, next_hop, back_path, 0)
        out = self.new_routing_pkt(PT_ERROR, self.p.error_bytes, self.node,
                                   back_path[-1], body=body)
        out.route = back_path
        self.send_routing(out, back_path[1], originated=True)

    def _prune_inter_link(self, a, b):
        dead = [dst for dst, route in self.inter_routes.items()
                if any(route[i] == a and route[i + 1] == b
                       for i in range(len(route) - 1))]
        for dst in dead:
            del self.inter_routes[dst]

    def _handle_error(self, pkt, frm):
        er = pkt.body
        self._prune_inter_link(er.broken_a, er.broken_b)
        idx = er.cursor + 1
        if idx >= len(er.back_path) - 1 or er.back_path[idx] != self.node:
            return
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
        elif ptype == PT_BEACON:
            self._heard_beacon(from_hop)
        elif ptype == PT_IARP:
            self._handle_iarp(pkt, from_hop)
        elif ptype == PT_QUERY:
            self._handle_query(pkt, from_hop)
        elif ptype == PT_REPLY:
            self._handle_reply(pkt, from_hop)
        elif ptype == PT_ERROR:
            self._handle_error(pkt, from_hop)

    def expire_buffer(self):
        for pkt in self.buffer.expire(self.now()):
            self.drop_data(pkt, "TOUT")
