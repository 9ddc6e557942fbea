"""Unit-disk wireless channel with a simplified CSMA MAC.

Connectivity is a fixed-radius disk (250 m, the effective range of the
NS2-era two-ray-ground defaults this abstracts).  Each node has a drop-tail
interface queue feeding a half-duplex transceiver.  Transmission: carrier
sense (defer while any in-range node transmits), a uniform random backoff,
then size*8/data_rate on the air.  A receiver decodes a frame only if no
other in-range transmission overlaps it in time and it was not itself
transmitting -- so hidden terminals collide, deliberately, and there is no
capture effect.  Unicast frames are acknowledged and retried up to
retry_limit; exhaustion drops the packet (CBK) and signals the routing agent.
Broadcasts are fire-and-forget.  ACK airtime itself is not modeled.
"""

from collections import deque
from dataclasses import dataclass

from .engine import NS_PER_MS, NS_PER_S, NS_PER_US

BROADCAST = -1

KIND_DATA = 0
KIND_ROUTING = 1

NEIGHBOR_REFRESH_NS = 100 * NS_PER_MS


@dataclass
class RadioConfig:
    range_m: float = 250.0
    data_rate_bps: int = 2_000_000
    frame_overhead_bytes: int = 58
    ifq_capacity: int = 50
    retry_limit: int = 7
    backoff_min_us: float = 100.0
    backoff_max_us: float = 2000.0
    # retransmissions double the backoff ceiling (802.11-style contention
    # window growth), capped at this multiple of backoff_max_us
    backoff_growth_cap: int = 16
    # broadcasts take extra access jitter so flood rebroadcasts desynchronize
    broadcast_jitter_us: float = 10000.0

    def validate(self):
        if self.range_m <= 0 or self.data_rate_bps <= 0 or self.ifq_capacity < 1:
            raise ValueError(f"invalid radio config: {self}")
        if self.backoff_min_us > self.backoff_max_us:
            raise ValueError(f"invalid backoff window: {self}")


class Frame:
    __slots__ = ("payload", "src", "dst", "size")

    def __init__(self, payload, src, dst, size):
        self.payload = payload
        self.src = src
        self.dst = dst
        self.size = size  # bytes on the air, frame overhead included


class Medium:
    def __init__(self, engine, radio: RadioConfig, positions, n, trace, jitter):
        radio.validate()
        self.engine = engine
        self.radio = radio
        self.positions = positions
        self.n = n
        self.trace = trace
        self.jitter = jitter
        self.agents = []  # wired by the runner after agents are built
        self._range_sq = radio.range_m * radio.range_m
        # routing frames are serviced before data (NS2 PriQueue discipline);
        # the capacity bound covers both bands together
        self._rqueues = [deque() for _ in range(n)]
        self._dqueues = [deque() for _ in range(n)]
        self._cur = [None] * n  # frame in service (backoff/tx/retry wait)
        self._tries = [0] * n
        self._active = {}  # node -> (start_ns, end_ns, frame)
        self._recent = []  # (node, start_ns, end_ns) of recently ended tx
        self._nbr_cache = [frozenset() for _ in range(n)]
        self._nbr_stamp = -1
        engine.schedule_in(0, self._refresh_neighbors, kind="nbr-refresh")

    # --- connectivity ---

    def in_range(self, a, b, t_ns):
        ax, ay = self.positions.pos(a, t_ns)
        bx, by = self.positions.pos(b, t_ns)
        dx = ax - bx
        dy = ay - by
        return dx * dx + dy * dy <= self._range_sq

    def neighbors(self, node, t_ns):
        """Exact unit-disk neighbor set of `node` at time t."""
        px, py = self.positions.pos(node, t_ns)
        rng = self._range_sq
        pos = self.positions.pos
        out = []
        for other in range(self.n):
            if other == node:
                continue
            ox, oy = pos(other, t_ns)
            dx = ox - px
            dy = oy - py
            if dx * dx + dy * dy <= rng:
                out.append(other)
        return out

    def cached_neighbors(self, node):
        """Neighbor set from the 100 ms periodic refresh (may lag reality)."""
        return self._nbr_cache[node]

    def _refresh_neighbors(self):
        now = self.engine.now
        if self._nbr_stamp < 0 or self.positions.any_motion(self._nbr_stamp, now):
            sets = [set() for _ in range(self.n)]
            pos = self.positions.pos
            pts = [pos(i, now) for i in range(self.n)]
            rng = self._range_sq
            for a in range(self.n):
                ax, ay = pts[a]
                for b in range(a + 1, self.n):
                    dx = ax - pts[b][0]
                    dy = ay - pts[b][1]
                    if dx * dx + dy * dy <= rng:
                        sets[a].add(b)
                        sets[b].add(a)
            self._nbr_cache = [frozenset(s) for s in sets]
        self._nbr_stamp = now
        self.engine.schedule_in(NEIGHBOR_REFRESH_NS, self._refresh_neighbors,
                                kind="nbr-refresh")

    # --- transmit path ---

    def send(self, src, frame: Frame):
        """Enqueue a frame at src's interface queue; drops when full (IFQ)."""
        if len(self._rqueues[src]) + len(self._dqueues[src]) >= self.radio.ifq_capacity:
            pkt = frame.payload
            self.trace.emit("d", self.engine.now, src, "MAC", pkt.uid, pkt.ptype,
                            pkt.size, pkt.fsrc, pkt.fdst, "IFQ")
            return
        if frame.payload.kind == KIND_ROUTING:
            self._rqueues[src].append(frame)
        else:
            self._dqueues[src].append(frame)
        if self._cur[src] is None:
            self._start_service(src)

    def _backoff_ns(self, tries=0, broadcast=False):
        hi = self.radio.backoff_max_us * min(2 ** tries, self.radio.backoff_growth_cap)
        if broadcast:
            hi += self.radio.broadcast_jitter_us
        return round(self.jitter.uniform(self.radio.backoff_min_us, hi) * NS_PER_US)

    def _start_service(self, node):
        rq = self._rqueues[node]
        frame = rq.popleft() if rq else self._dqueues[node].popleft()
        self._cur[node] = frame
        self._tries[node] = 0
        delay = self._backoff_ns(broadcast=frame.dst == BROADCAST)
        self.engine.schedule_in(delay, self._attempt, (node,),
                                target=node, kind="mac-attempt")

    def _attempt(self, node):
        now = self.engine.now
        busy_until = 0
        pos = self.positions.pos
        px, py = pos(node, now)
        rng = self._range_sq
        for other, (s, e, _f) in self._active.items():
            ox, oy = pos(other, now)
            dx = ox - px
            dy = oy - py
            if dx * dx + dy * dy <= rng and e > busy_until:
                busy_until = e
        if busy_until > now:
            self.engine.schedule_at(busy_until + self._backoff_ns(self._tries[node]),
                                    self._attempt, (node,), target=node,
                                    kind="mac-attempt")
            return
        frame = self._cur[node]
        dur = frame.size * 8 * NS_PER_S // self.radio.data_rate_bps
        end = now + dur
        self._active[node] = (now, end, frame)
        self.engine.schedule_at(end, self._tx_end, (node,), target=node, kind="mac-txend")

    def _has_queued(self, node):
        return self._rqueues[node] or self._dqueues[node]

    def _interferers(self, sender, start, end, t_ns):
        """Transmissions (other than the sender's) overlapping [start, end],
        with their positions evaluated once."""
        pos = self.positions.pos
        out = []
        for other, (s, e, _f) in self._active.items():
            if s < end and e > start:
                ox, oy = pos(other, t_ns)
                out.append((other, ox, oy))
        for other, s, e in self._recent:
            if other != sender and s < end and e > start:
                ox, oy = pos(other, t_ns)
                out.append((other, ox, oy))
        return out

    def _collides(self, inter, receiver, rx, ry):
        rng = self._range_sq
        for other, ox, oy in inter:
            if other == receiver:
                return True  # half-duplex: it was transmitting itself
            dx = ox - rx
            dy = oy - ry
            if dx * dx + dy * dy <= rng:
                return True
        return False

    def _tx_end(self, node):
        now = self.engine.now
        start, end, frame = self._active.pop(node)
        # keep the ended transmission visible for other receivers' overlap checks
        self._recent.append((node, start, end))
        if len(self._recent) > 4 * self.n:
            horizon = now - 50 * NS_PER_MS
            self._recent = [r for r in self._recent if r[2] > horizon]
        inter = self._interferers(node, start, end, now)

        pkt = frame.payload
        pos = self.positions.pos
        rng = self._range_sq
        sx, sy = pos(node, now)
        if frame.dst == BROADCAST:
            for rcv in range(self.n):
                if rcv == node:
                    continue
                rx, ry = pos(rcv, now)
                dx = rx - sx
                dy = ry - sy
                if dx * dx + dy * dy > rng:
                    continue
                if inter and self._collides(inter, rcv, rx, ry):
                    self.trace.emit("d", now, rcv, "MAC", pkt.uid, pkt.ptype,
                                    pkt.size, pkt.fsrc, pkt.fdst, "COL")
                else:
                    self.agents[rcv].on_packet_from_net(pkt, node)
            self._cur[node] = None
            self._tries[node] = 0
            if self._cur[node] is None and self._has_queued(node):
                self._start_service(node)
            return

        dst = frame.dst
        rx, ry = pos(dst, now)
        dx = rx - sx
        dy = ry - sy
        ok = (dx * dx + dy * dy <= rng
              and not (inter and self._collides(inter, dst, rx, ry)))
        if ok:
            self._cur[node] = None
            self._tries[node] = 0
            if pkt.kind == KIND_ROUTING:
                self.trace.emit("r", now, dst, "RTR", pkt.uid, pkt.ptype,
                                pkt.size, pkt.fsrc, pkt.fdst)
            self.agents[dst].on_packet_from_net(pkt, node)
            if self._cur[node] is None and self._has_queued(node):
                self._start_service(node)
            return

        self._tries[node] += 1
        if self._tries[node] <= self.radio.retry_limit:
            self.engine.schedule_in(self._backoff_ns(self._tries[node]), self._attempt,
                                    (node,), target=node, kind="mac-attempt")
            return
        # retries exhausted: drop and report the broken link to routing
        self.trace.emit("d", now, node, "MAC", pkt.uid, pkt.ptype, pkt.size,
                        pkt.fsrc, pkt.fdst, "CBK")
        self._cur[node] = None
        self._tries[node] = 0
        self.agents[node].on_link_break(dst, pkt)
        if self._cur[node] is None and self._has_queued(node):
            self._start_service(node)

    # --- end-of-run accounting ---

    def pending_data_uids(self):
        uids = set()
        for node in range(self.n):
            cur = self._cur[node]
            if cur is not None and cur.payload.kind == KIND_DATA:
                uids.add(cur.payload.uid)
            for frame in self._dqueues[node]:
                if frame.payload.kind == KIND_DATA:
                    uids.add(frame.payload.uid)
        return uids
