"""Destination-Sequenced Distance Vector routing.

Proactive table-driven routing with destination-generated even sequence
numbers.  Every periodic tick bumps the node's own sequence by 2 and
advertises: a full table dump every third tick, otherwise an incremental
carrying the entries changed since the last advertisement.  Link breaks
poison affected entries with an odd sequence (last even + 1) and infinite
metric, advertised by an immediate triggered incremental (rate-limited to
damp storms).  Unrouteable data is dropped at once (NRTE) -- no send buffer.

Weighted settling time (delayed advertisement of worsening routes) is not
implemented.
"""

from dataclasses import dataclass

from ..engine import seconds
from ..medium import BROADCAST
from .base import RoutingAgent

INF_METRIC = 0xFFFF

PTYPE = "dsdv"


@dataclass
class DsdvParams:
    periodic_s: float = 15.0
    fulldump_every: int = 3
    trigger_delay_s: float = 0.1
    trigger_min_gap_s: float = 1.0
    neighbor_miss: int = 3
    header_bytes: int = 12
    entry_bytes: int = 12
    # stop bumping the own sequence after this sim time (None = never);
    # lets a static network reach a quiescent, comparable table state
    seq_freeze_s: float = None


class _Entry:
    __slots__ = ("next_hop", "metric", "seq", "installed_ns")

    def __init__(self, next_hop, metric, seq, installed_ns):
        self.next_hop = next_hop
        self.metric = metric
        self.seq = seq
        self.installed_ns = installed_ns


class DsdvAgent(RoutingAgent):
    ptype_prefix = "dsdv"

    def __init__(self, node, ctx):
        super().__init__(node, ctx)
        self.p = ctx.params.dsdv
        self.table = {node: _Entry(node, 0, 0, 0)}
        self.own_seq = 0
        self.changed = {node}
        self.tick_no = 0
        self.last_advert_ns = -(10 ** 12)
        self.trigger_pending = False
        self.last_update_from = {}
        self.freeze_ns = None if self.p.seq_freeze_s is None else seconds(self.p.seq_freeze_s)

    def start(self):
        phase = self.ctx.stream.uniform(0.0, self.p.periodic_s)
        self.timer(phase, self._tick, kind="dsdv-tick")

    # -- periodic advertising --

    def _tick(self):
        now = self.now()
        if self.freeze_ns is None or now < self.freeze_ns:
            self.own_seq += 2
            self.table[self.node].seq = self.own_seq
            self.changed.add(self.node)
        self._sweep_stale_neighbors(now)
        full = self.tick_no % self.p.fulldump_every == 0
        if full:
            self._advertise(self.table.keys())
        elif self.changed:
            self._advertise(self.changed)
        self.tick_no += 1
        self.timer(self.p.periodic_s, self._tick, kind="dsdv-tick")

    def _advertise(self, dests):
        entries = [(d, self.table[d].metric, self.table[d].seq) for d in sorted(dests)]
        if not entries:
            return
        size = self.p.header_bytes + self.p.entry_bytes * len(entries)
        pkt = self.new_routing_pkt(PTYPE, size, self.node, BROADCAST, body=entries)
        self.send_routing(pkt, BROADCAST, originated=True)
        self.changed.clear()
        self.last_advert_ns = self.now()

    def _schedule_trigger(self):
        if self.trigger_pending:
            return
        self.trigger_pending = True
        at = max(self.now() + seconds(self.p.trigger_delay_s),
                 self.last_advert_ns + seconds(self.p.trigger_min_gap_s))
        self.ctx.engine.schedule_at(at, self._fire_trigger, target=self.node,
                                    kind="dsdv-trigger")

    def _fire_trigger(self):
        self.trigger_pending = False
        if self.changed:
            self._advertise(self.changed)

    def _sweep_stale_neighbors(self, now):
        limit = seconds(self.p.neighbor_miss * self.p.periodic_s)
        in_use = {e.next_hop for e in self.table.values() if e.metric < INF_METRIC}
        in_use.discard(self.node)
        for nh in sorted(in_use):
            last = self.last_update_from.get(nh)
            if last is not None and now - last > limit:
                self.handle_link_break(nh)

    # -- table integration --

    def _integrate(self, dest, metric, seq, frm, now):
        """Apply one advertised entry.  Returns True only for trigger-worthy
        changes (new route, metric or next-hop change); pure sequence-number
        refreshes ride the next periodic incremental instead."""
        if dest == self.node:
            return False
        new_metric = metric + 1 if metric < INF_METRIC else INF_METRIC
        cur = self.table.get(dest)
        if cur is None:
            self.table[dest] = _Entry(frm, new_metric, seq, now)
        elif seq > cur.seq:
            significant = cur.metric != new_metric or cur.next_hop != frm
            cur.next_hop, cur.metric, cur.seq, cur.installed_ns = frm, new_metric, seq, now
            self.changed.add(dest)
            return significant
        elif seq == cur.seq and new_metric < cur.metric:
            cur.next_hop, cur.metric, cur.installed_ns = frm, new_metric, now
        else:
            return False
        self.changed.add(dest)
        return True

    def on_packet_from_net(self, pkt, from_hop):
        if pkt.ptype == PTYPE:
            now = self.now()
            self.last_update_from[from_hop] = now
            any_change = False
            for dest, metric, seq in pkt.body:
                if self._integrate(dest, metric, seq, from_hop, now):
                    any_change = True
            if any_change:
                self._schedule_trigger()
            return
        # data plane
        if pkt.fdst == self.node:
            self.deliver_data(pkt)
            return
        if self.ttl_expired(pkt):
            return
        self._route_data(pkt)

    def on_data_from_app(self, pkt):
        self._route_data(pkt)

    def _route_data(self, pkt):
        if self.loop_detected(pkt):
            return
        entry = self.table.get(pkt.fdst)
        if entry is None or entry.metric >= INF_METRIC:
            self.drop_data(pkt, "NRTE")
            return
        self.send_data_frame(pkt, entry.next_hop)

    # -- maintenance --

    def on_link_break(self, next_hop, pkt=None):
        self.handle_link_break(next_hop)

    def handle_link_break(self, lost):
        changed = False
        for dest, e in self.table.items():
            if e.next_hop == lost and dest != self.node and e.metric < INF_METRIC:
                e.metric = INF_METRIC
                if e.seq % 2 == 0:
                    e.seq += 1
                self.changed.add(dest)
                changed = True
        self.last_update_from.pop(lost, None)
        if changed:
            self._schedule_trigger()

    # -- introspection for tests/oracles --

    def routes_snapshot(self):
        return {d: (e.metric, e.next_hop, e.seq) for d, e in self.table.items()}
