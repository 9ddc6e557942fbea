"""Trace emission/parsing and the four performance metrics.

Trace grammar, one record per line, space separated, bit-exact:

    <event> <time> <node> <layer> <uid> <ptype> <size> <fsrc> <fdst> <reason>

event   s|r|d|f (send, receive, drop, forward)
time    seconds with exactly 9 decimals
layer   AGT|RTR|MAC
ptype   `cbr` for data, otherwise a routing-protocol tag (e.g. `aodv:rreq`)
reason  `-` except on drops: IFQ IFQ-SB NRTE TTL CBK COL TOUT

Metrics: throughput is delivered/generated over application-layer cbr
records; average delay is the mean source-AGT-send to destination-AGT-receive
gap over delivered packets; dropped counts terminal cbr drops at any layer;
routing overhead counts every hop-wise transmission (s and f at RTR) of
routing packets.
"""

import re
from dataclasses import dataclass

from .engine import NS_PER_S, fmt_time

EVENTS = ("s", "r", "d", "f")
LAYERS = ("AGT", "RTR", "MAC")
DROP_REASONS = ("IFQ", "IFQ-SB", "NRTE", "TTL", "CBK", "COL", "TOUT")
DATA_PTYPE = "cbr"

_TIME_RE = re.compile(r"^\d+\.\d{9}$")
_INT_RE = re.compile(r"^-?\d+$")


class TraceParseError(ValueError):
    def __init__(self, field, detail):
        self.field = field
        super().__init__(f"bad trace field {field!r}: {detail}")


class MetricError(ValueError):
    """A metric is undefined on this trace (e.g. nothing generated)."""


@dataclass(frozen=True)
class TraceRecord:
    event: str
    t_ns: int
    node: int
    layer: str
    uid: int
    ptype: str
    size: int
    fsrc: int
    fdst: int
    reason: str


def format_record(rec: TraceRecord) -> str:
    return (f"{rec.event} {fmt_time(rec.t_ns)} {rec.node} {rec.layer} {rec.uid} "
            f"{rec.ptype} {rec.size} {rec.fsrc} {rec.fdst} {rec.reason}")


def parse_record(line: str) -> TraceRecord:
    parts = line.split(" ")
    if len(parts) != 10:
        raise TraceParseError("line", f"expected 10 fields, got {len(parts)}")
    ev, t, node, layer, uid, ptype, size, fsrc, fdst, reason = parts
    if ev not in EVENTS:
        raise TraceParseError("event", ev)
    if not _TIME_RE.match(t):
        raise TraceParseError("time", f"{t!r} (seconds with 9 decimals required)")
    if layer not in LAYERS:
        raise TraceParseError("layer", layer)
    for name, val in (("node", node), ("uid", uid), ("size", size),
                      ("fsrc", fsrc), ("fdst", fdst)):
        if not _INT_RE.match(val):
            raise TraceParseError(name, val)
    if ev == "d":
        if reason not in DROP_REASONS:
            raise TraceParseError("reason", reason)
    elif reason != "-":
        raise TraceParseError("reason", f"{reason!r} on non-drop record")
    if not ptype or " " in ptype:
        raise TraceParseError("ptype", ptype)
    sec, frac = t.split(".")
    t_ns = int(sec) * NS_PER_S + int(frac)
    return TraceRecord(ev, t_ns, int(node), layer, int(uid), ptype, int(size),
                       int(fsrc), int(fdst), reason)


class TraceLog:
    """Run-side trace sink: formats records, accumulates the metric tallies in
    the same pass, and feeds the in-run consistency checks (path/loop
    bookkeeping)."""

    def __init__(self, checks: bool = False):
        self.lines = []
        self.generated = 0
        self.delivered = 0
        self.dropped_data = 0
        self.overhead = 0
        self.checks = checks
        self.paths = {}  # uid -> [node, ...] for data packets (when checks on)
        self.loop_violations = 0
        self._send_ns = {}
        self._delay_total = 0

    def emit(self, event, t_ns, node, layer, uid, ptype, size, fsrc, fdst, reason="-"):
        self.lines.append(f"{event} {fmt_time(t_ns)} {node} {layer} {uid} "
                          f"{ptype} {size} {fsrc} {fdst} {reason}")
        if ptype == DATA_PTYPE:
            if event == "s" and layer == "AGT":
                self.generated += 1
                self._send_ns[uid] = t_ns
                if self.checks:
                    self.paths[uid] = [node]
            elif event == "r" and layer == "AGT":
                self.delivered += 1
                self._delay_total += t_ns - self._send_ns[uid]
                if self.checks:
                    path = self.paths.get(uid, [])
                    path.append(node)
                    if len(set(path)) != len(path):
                        self.loop_violations += 1
            elif event == "d":
                self.dropped_data += 1
            elif event == "f" and self.checks:
                self.paths.setdefault(uid, []).append(node)
        elif layer == "RTR" and (event == "s" or event == "f"):
            self.overhead += 1

    def report(self):
        """MetricsReport over everything emitted so far (None if no data)."""
        if self.generated == 0:
            return None
        avg = ((self._delay_total / self.delivered) / NS_PER_S
               if self.delivered else float("nan"))
        return MetricsReport(self.delivered / self.generated, avg,
                             self.dropped_data, self.overhead,
                             self.generated, self.delivered)

    def text(self) -> str:
        return "\n".join(self.lines) + "\n" if self.lines else ""


def iter_records(lines):
    for line in lines:
        line = line.rstrip("\n")
        if line:
            yield parse_record(line)


@dataclass
class MetricsReport:
    throughput: float
    avg_delay_s: float  # nan when nothing was delivered
    dropped: int
    overhead: int
    generated: int
    delivered: int


def analyze(records) -> MetricsReport:
    """Single streaming pass computing all four metrics."""
    generated = delivered = dropped = overhead = 0
    send_ns = {}
    delay_total = 0
    for r in records:
        if r.ptype == DATA_PTYPE:
            if r.event == "s" and r.layer == "AGT":
                generated += 1
                send_ns[r.uid] = r.t_ns
            elif r.event == "r" and r.layer == "AGT":
                delivered += 1
                delay_total += r.t_ns - send_ns[r.uid]
            elif r.event == "d":
                dropped += 1
        elif r.layer == "RTR" and (r.event == "s" or r.event == "f"):
            overhead += 1
    if generated == 0:
        raise MetricError("no data packets generated; throughput undefined")
    avg_delay = (delay_total / delivered) / NS_PER_S if delivered else float("nan")
    return MetricsReport(delivered / generated, avg_delay, dropped, overhead,
                         generated, delivered)


def throughput(records) -> float:
    generated = delivered = 0
    for r in records:
        if r.ptype == DATA_PTYPE and r.layer == "AGT":
            if r.event == "s":
                generated += 1
            elif r.event == "r":
                delivered += 1
    if generated == 0:
        raise MetricError("no data packets generated; throughput undefined")
    return delivered / generated


def average_delay(records) -> float:
    send_ns = {}
    total = 0
    delivered = 0
    for r in records:
        if r.ptype == DATA_PTYPE and r.layer == "AGT":
            if r.event == "s":
                send_ns[r.uid] = r.t_ns
            elif r.event == "r":
                delivered += 1
                total += r.t_ns - send_ns[r.uid]
    if delivered == 0:
        raise MetricError("no data packets delivered; average delay undefined")
    return (total / delivered) / NS_PER_S


def dropped_packets(records) -> int:
    return sum(1 for r in records if r.event == "d" and r.ptype == DATA_PTYPE)


def routing_overhead(records) -> int:
    return sum(1 for r in records
               if r.layer == "RTR" and r.ptype != DATA_PTYPE
               and (r.event == "s" or r.event == "f"))


CSV_HEADER = "protocol,nodes,pause,speed,seed,throughput,avg_delay_s,dropped,overhead,generated,delivered"


def csv_row(protocol, nodes, pause, speed, seed, report: MetricsReport) -> str:
    return (f"{protocol},{nodes},{pause:g},{speed:g},{seed},"
            f"{report.throughput:.6f},{report.avg_delay_s:.6f},"
            f"{report.dropped},{report.overhead},{report.generated},{report.delivered}")
