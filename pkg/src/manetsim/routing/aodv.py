"""Ad-hoc On-demand Distance Vector routing.

Reactive discovery: a data packet without a route is buffered while an RREQ
flood runs with an expanding TTL ring (1, 3, 5, 7, then network diameter,
with two diameter retries); each attempt waits 2 * ttl * node_traversal_time.
Destination sequence numbers order route freshness and keep paths loop-free.
Replies travel hop-by-hop along reverse routes installed by the flood; an
intermediate node holding a route at least as fresh as the request answers
itself.  Maintenance combines link-layer failure callbacks with hello
beacons; broken links invalidate routes (sequence bumped) and fan out RERRs.
Hellos are suppressed until the node holds a valid route that did not itself
come from a hello, so an idle network stays silent.
"""

from collections import deque
from dataclasses import dataclass

from ..engine import seconds
from ..medium import BROADCAST
from .base import RoutingAgent, SendBuffer

PT_RREQ = "aodv:rreq"
PT_RREP = "aodv:rrep"
PT_RERR = "aodv:rerr"
PT_HELLO = "aodv:hello"


@dataclass
class AodvParams:
    hello_interval_s: float = 1.0
    allowed_hello_loss: int = 2
    active_route_timeout_s: float = 10.0
    node_traversal_time_s: float = 0.04
    ttl_start: int = 1
    ttl_increment: int = 2
    ttl_threshold: int = 7
    net_diameter: int = 35
    rreq_retries: int = 2  # extra attempts at net_diameter after the ring
    seen_expiry_s: float = 10.0
    use_hello: bool = True
    # binary exponential holdoff between consecutive failed discoveries for
    # one destination, so unreachable flows do not re-flood at the CBR rate
    discovery_holdoff_s: float = 2.0
    discovery_holdoff_max_s: float = 10.0
    rreq_rate_limit_per_s: float = 10.0
    rreq_bytes: int = 48
    rrep_bytes: int = 44
    hello_bytes: int = 44
    rerr_base_bytes: int = 8
    rerr_dest_bytes: int = 8

    def ring_ttls(self):
        ttls = list(range(self.ttl_start, self.ttl_threshold + 1, self.ttl_increment))
        ttls += [self.net_diameter] * (1 + self.rreq_retries)
        return ttls


class _Rreq:
    __slots__ = ("orig", "orig_seq", "rreq_id", "dest", "dest_seq", "dest_seq_known", "hops")

    def __init__(self, orig, orig_seq, rreq_id, dest, dest_seq, dest_seq_known, hops):
        self.orig = orig
        self.orig_seq = orig_seq
        self.rreq_id = rreq_id
        self.dest = dest
        self.dest_seq = dest_seq
        self.dest_seq_known = dest_seq_known
        self.hops = hops


class _Rrep:
    __slots__ = ("orig", "dest", "dest_seq", "hops")

    def __init__(self, orig, dest, dest_seq, hops):
        self.orig = orig  # discovery originator the reply travels to
        self.dest = dest  # route target the reply describes
        self.dest_seq = dest_seq
        self.hops = hops


class _Route:
    __slots__ = ("next_hop", "hops", "seq", "lifetime_ns", "valid", "from_hello", "precursors")

    def __init__(self, next_hop, hops, seq, lifetime_ns, from_hello):
        self.next_hop = next_hop
        self.hops = hops
        self.seq = seq
        self.lifetime_ns = lifetime_ns
        self.valid = True
        self.from_hello = from_hello
        self.precursors = set()


class AodvAgent(RoutingAgent):
    ptype_prefix = "aodv"

    def __init__(self, node, ctx):
        super().__init__(node, ctx)
        self.p = ctx.params.aodv
        core = ctx.params.core
        self.table = {}
        self.own_seq = 0
        self.rreq_id = 0
        self.seen = {}  # (orig, rreq_id) -> expiry ns
        self.pending = {}  # dest -> [attempt index, generation]
        self.buffer = SendBuffer(core.sendbuf_capacity, core.sendbuf_timeout_s)
        self.last_heard = {}
        self.last_hello_from = {}
        self.holdoff = {}  # dest -> (not-before ns, consecutive failures)
        self._rreq_times = deque()  # origination times in the last second
        self._art_ns = seconds(self.p.active_route_timeout_s)

    def start(self):
        if self.p.use_hello:
            phase = self.ctx.stream.uniform(0.0, self.p.hello_interval_s)
            self.timer(phase, self._hello_tick, kind="aodv-hello")

    # -- route table --

    def _route(self, dest):
        e = self.table.get(dest)
        if e is not None and e.valid and e.lifetime_ns < self.now():
            e.valid = False
        return e

    def _install(self, dest, next_hop, hops, seq, from_hello=False):
        now = self.now()
        lifetime = now + self._art_ns
        e = self.table.get(dest)
        if e is None:
            self.table[dest] = _Route(next_hop, hops, seq, lifetime, from_hello)
            return True
        if seq < e.seq:
            return False  # never accept staler information, valid or not
        if e.valid and e.lifetime_ns >= now and seq == e.seq and hops >= e.hops:
            if next_hop == e.next_hop:
                e.lifetime_ns = max(e.lifetime_ns, lifetime)
            return False
        e.next_hop, e.hops, e.seq = next_hop, hops, seq
        e.lifetime_ns = max(e.lifetime_ns, lifetime)
        e.valid = True
        e.from_hello = from_hello
        return True

    def _refresh(self, dest):
        e = self.table.get(dest)
        if e is not None and e.valid:
            e.lifetime_ns = max(e.lifetime_ns, self.now() + self._art_ns)

    def _has_active_route(self):
        now = self.now()
        return any(e.valid and not e.from_hello and e.lifetime_ns >= now
                   for e in self.table.values())

    # -- data plane --

    def on_data_from_app(self, pkt):
        e = self._route(pkt.fdst)
        if e is not None and e.valid:
            self._send_data(pkt, e)
            return
        evicted = self.buffer.add(pkt, self.now())
        if evicted is not None:
            self.drop_data(evicted, "IFQ-SB")
        self._maybe_discover(pkt.fdst)

    def _maybe_discover(self, dest):
        if dest in self.pending:
            return
        now = self.now()
        hold = self.holdoff.get(dest)
        if hold is not None and now < hold[0]:
            if not hold[2]:
                hold[2] = True
                self.ctx.engine.schedule_at(hold[0], self._holdoff_expired, (dest,),
                                            target=self.node, kind="aodv-holdoff")
            return
        self._originate_discovery(dest)

    def _holdoff_expired(self, dest):
        hold = self.holdoff.get(dest)
        if hold is not None:
            hold[2] = False
        if dest not in self.pending and self.buffer.has_dest(dest):
            e = self._route(dest)
            if e is not None and e.valid:
                for data in self.buffer.take_for(dest):
                    self._send_data(data, e)
            else:
                self._originate_discovery(dest)

    def _send_data(self, pkt, e):
        if self.loop_detected(pkt):
            return
        self.ctx.note_route_step(pkt.uid, e.seq, e.hops)
        self._refresh(pkt.fdst)
        self._refresh(e.next_hop)
        self.send_data_frame(pkt, e.next_hop)

    def _forward_data(self, pkt):
        e = self._route(pkt.fdst)
        if e is None or not e.valid:
            self.drop_data(pkt, "NRTE")
            er = self.table.get(pkt.fdst)
            seq = er.seq + 1 if er is not None else 1
            self._send_rerr([(pkt.fdst, seq)])
            return
        self._refresh(pkt.fsrc)
        self._send_data(pkt, e)

    # -- discovery --

    def _originate_discovery(self, dest):
        gen = self.rreq_id
        self.pending[dest] = [0, gen]
        self._send_rreq(dest, 0)

    def _send_rreq(self, dest, attempt):
        now = self.now()
        window = self._rreq_times
        while window and now - window[0] >= seconds(1.0):
            window.popleft()
        if len(window) >= self.p.rreq_rate_limit_per_s:
            # rate limited: try this attempt again once the window clears
            gen = self.pending[dest][1]
            self.ctx.engine.schedule_at(window[0] + seconds(1.0), self._rreq_retry,
                                        (dest, attempt, gen), target=self.node,
                                        kind="aodv-rreq-limit")
            return
        window.append(now)
        self.own_seq += 1
        self.rreq_id += 1
        er = self.table.get(dest)
        known = er is not None
        dest_seq = er.seq if known else 0
        ttl = self.p.ring_ttls()[attempt]
        body = _Rreq(self.node, self.own_seq, self.rreq_id, dest, dest_seq, known, 0)
        pkt = self.new_routing_pkt(PT_RREQ, self.p.rreq_bytes, self.node, dest,
                                   body=body, ttl=ttl)
        self.seen[(self.node, self.rreq_id)] = self.now() + seconds(self.p.seen_expiry_s)
        self.send_routing(pkt, BROADCAST, originated=True)
        wait = 2.0 * ttl * self.p.node_traversal_time_s
        gen = self.pending[dest][1]
        self.timer(wait, self._discovery_timeout, (dest, attempt, gen), kind="aodv-ringto")

    def _rreq_retry(self, dest, attempt, gen):
        state = self.pending.get(dest)
        if state is not None and state[1] == gen and state[0] == attempt:
            self._send_rreq(dest, attempt)

    def _discovery_timeout(self, dest, attempt, gen):
        state = self.pending.get(dest)
        if state is None or state[1] != gen or state[0] != attempt:
            return
        if not self.buffer.has_dest(dest):
            del self.pending[dest]
            return
        nxt = attempt + 1
        if nxt < len(self.p.ring_ttls()):
            state[0] = nxt
            self._send_rreq(dest, nxt)
            return
        del self.pending[dest]
        fails = self.holdoff.get(dest, (0, 0, False))[1] + 1
        wait = min(self.p.discovery_holdoff_s * (2 ** (fails - 1)),
                   self.p.discovery_holdoff_max_s)
        self.holdoff[dest] = [self.now() + seconds(wait), fails, False]
        for pkt in self.buffer.take_for(dest):
            self.drop_data(pkt, "NRTE")

    def _handle_rreq(self, pkt, frm):
        rq = pkt.body
        if rq.orig == self.node:
            return
        key = (rq.orig, rq.rreq_id)
        if key in self.seen:
            return
        self.seen[key] = self.now() + seconds(self.p.seen_expiry_s)
        if len(self.seen) > 4096:
            now = self.now()
            self.seen = {k: v for k, v in self.seen.items() if v > now}
        self._install(rq.orig, frm, rq.hops + 1, rq.orig_seq)

        if rq.dest == self.node:
            if rq.dest_seq_known and rq.dest_seq >= self.own_seq:
                self.own_seq = rq.dest_seq + 1
            self._reply(rq.orig, self.node, self.own_seq, 0, frm)
            return
        e = self._route(rq.dest)
        if (e is not None and e.valid
                and (not rq.dest_seq_known or e.seq >= rq.dest_seq)):
            self._reply(rq.orig, rq.dest, e.seq, e.hops, frm)
            e.precursors.add(frm)
            return
        if pkt.ttl - 1 <= 0:
            return
        fwd = _Rreq(rq.orig, rq.orig_seq, rq.rreq_id, rq.dest, rq.dest_seq,
                    rq.dest_seq_known, rq.hops + 1)
        out = self.new_routing_pkt(PT_RREQ, self.p.rreq_bytes, rq.orig, rq.dest,
                                   body=fwd, ttl=pkt.ttl - 1)
        out.uid = pkt.uid  # same flood, new hop
        self.send_routing(out, BROADCAST, originated=False)

    def _reply(self, orig, dest, dest_seq, hops, next_hop):
        body = _Rrep(orig, dest, dest_seq, hops)
        pkt = self.new_routing_pkt(PT_RREP, self.p.rrep_bytes, dest, orig, body=body)
        self.send_routing(pkt, next_hop, originated=True)

    def _handle_rrep(self, pkt, frm):
        rp = pkt.body
        self._install(rp.dest, frm, rp.hops + 1, rp.dest_seq)
        if rp.orig == self.node:
            self.pending.pop(rp.dest, None)
            self.holdoff.pop(rp.dest, None)
            e = self._route(rp.dest)
            if e is not None and e.valid:
                for data in self.buffer.take_for(rp.dest):
                    self._send_data(data, e)
            return
        rev = self._route(rp.orig)
        if rev is None or not rev.valid:
            return  # reverse path gone; the originator's ring retry recovers
        fwd = _Rrep(rp.orig, rp.dest, rp.dest_seq, rp.hops + 1)
        out = self.new_routing_pkt(PT_RREP, self.p.rrep_bytes, rp.dest, rp.orig, body=fwd)
        out.uid = pkt.uid
        e = self.table.get(rp.dest)
        if e is not None:
            e.precursors.add(rev.next_hop)
        rev.precursors.add(frm)
        self._refresh(rp.orig)
        self.send_routing(out, rev.next_hop, originated=False)

    # -- maintenance --

    def _send_rerr(self, affected):
        size = self.p.rerr_base_bytes + self.p.rerr_dest_bytes * len(affected)
        pkt = self.new_routing_pkt(PT_RERR, size, self.node, BROADCAST, body=affected)
        self.send_routing(pkt, BROADCAST, originated=True)

    def on_link_break(self, next_hop, pkt=None):
        self._invalidate_via(next_hop)

    def _invalidate_via(self, next_hop):
        affected = []
        for dest, e in self.table.items():
            if e.valid and e.next_hop == next_hop:
                e.valid = False
                e.seq += 1
                affected.append((dest, e.seq))
        self.last_hello_from.pop(next_hop, None)
        if affected:
            self._send_rerr(affected)

    def _handle_rerr(self, pkt, frm):
        affected = []
        for dest, seq in pkt.body:
            e = self.table.get(dest)
            if e is not None and e.valid and e.next_hop == frm:
                e.valid = False
                e.seq = max(e.seq + 1, seq)
                affected.append((dest, e.seq))
        if affected:
            self._send_rerr(affected)

    def _hello_tick(self):
        now = self.now()
        limit = seconds(self.p.allowed_hello_loss * self.p.hello_interval_s)
        stale = [nh for nh, last in self.last_hello_from.items()
                 if now - max(last, self.last_heard.get(nh, 0)) > limit]
        for nh in sorted(stale):
            self._invalidate_via(nh)
        if self._has_active_route():
            body = _Rrep(BROADCAST, self.node, self.own_seq, 0)
            pkt = self.new_routing_pkt(PT_HELLO, self.p.hello_bytes, self.node,
                                       BROADCAST, body=body)
            self.send_routing(pkt, BROADCAST, originated=True)
        self.timer(self.p.hello_interval_s, self._hello_tick, kind="aodv-hello")

    def _handle_hello(self, pkt, frm):
        self.last_hello_from[frm] = self.now()
        self._install(frm, frm, 1, pkt.body.dest_seq, from_hello=True)

    # -- demux --

    def on_packet_from_net(self, pkt, from_hop):
        self.last_heard[from_hop] = self.now()
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
        elif ptype == PT_HELLO:
            self._handle_hello(pkt, from_hop)

    def expire_buffer(self):
        for pkt in self.buffer.expire(self.now()):
            self.drop_data(pkt, "TOUT")

    # -- introspection --

    def routes_snapshot(self):
        return {d: (e.hops, e.next_hop, e.seq, e.valid) for d, e in self.table.items()}
