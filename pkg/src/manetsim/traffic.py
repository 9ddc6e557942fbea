"""Constant-bit-rate traffic plans: generation, emission timing, traffic files.

Connections are distinct (src, dst) pairs drawn uniformly without self-loops,
with start times uniform in [0, start_window] so every flow gets most of the
run.  Emission is exact: packets are spaced by an integer-nanosecond period
(250 ms at 4 packets/s), and a flow starting at t emits floor((duration-t) *
rate) packets.
"""

from dataclasses import dataclass, field

from .engine import NS_PER_S, RandomStream

DEFAULT_RATE_PPS = 4.0
DEFAULT_PAYLOAD_BYTES = 512
START_WINDOW_S = 50.0


@dataclass(frozen=True)
class Connection:
    src: int
    dst: int
    start_s: float
    rate_pps: float
    payload_bytes: int

    def period_ns(self) -> int:
        return round(NS_PER_S / self.rate_pps)

    def emission_times_ns(self, duration_s: float):
        """All emission instants in [start, duration), exactly period apart."""
        t = round(self.start_s * NS_PER_S)
        end = round(duration_s * NS_PER_S)
        period = self.period_ns()
        while t < end:
            yield t
            t += period


@dataclass
class TrafficPlan:
    n: int
    connections: list = field(default_factory=list)


def generate_plan(n, max_conns, stream: RandomStream, duration_s,
                  rate_pps=DEFAULT_RATE_PPS, payload_bytes=DEFAULT_PAYLOAD_BYTES,
                  start_window_s=START_WINDOW_S) -> TrafficPlan:
    if n < 2:
        raise ValueError(f"need at least 2 nodes for traffic, got {n}")
    if max_conns < 1:
        raise ValueError(f"max_conns must be >= 1, got {max_conns}")
    if duration_s <= 0:
        raise ValueError(f"duration must be > 0, got {duration_s}")

    count = min(max_conns, n * (n - 1))
    pairs = set()
    conns = []
    while len(conns) < count:
        src = stream.randint(0, n - 1)
        dst = stream.randint(0, n - 1)
        if src == dst or (src, dst) in pairs:
            continue
        pairs.add((src, dst))
        start = stream.uniform(0.0, min(start_window_s, duration_s))
        conns.append(Connection(src, dst, start, rate_pps, payload_bytes))
    conns.sort(key=lambda c: (c.start_s, c.src, c.dst))
    return TrafficPlan(n, conns)


def format_traffic(plan: TrafficPlan) -> str:
    lines = [
        f"conn {c.src} {c.dst} start {c.start_s:.6f} rate {c.rate_pps:.6f} size {c.payload_bytes}"
        for c in plan.connections
    ]
    return "\n".join(lines) + "\n" if lines else ""


def parse_traffic(text: str, n: int = 0) -> TrafficPlan:
    conns = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] != "conn" or parts[3] != "start" or parts[5] != "rate" or parts[7] != "size":
                raise ValueError("malformed connection directive")
            conns.append(Connection(int(parts[1]), int(parts[2]), float(parts[4]),
                                    float(parts[6]), int(parts[8])))
        except (IndexError, ValueError) as exc:
            raise ValueError(f"traffic file line {lineno}: {exc}") from None
    return TrafficPlan(n, conns)
