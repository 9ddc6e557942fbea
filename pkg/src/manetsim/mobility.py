"""Random waypoint mobility: plan generation, interpolation, movement files.

A plan is the full, serializable movement description for every node: an
initial position plus waypoint legs (depart time, destination, speed).  Legs
start at t=0; after arriving at a waypoint the node rests exactly `pause`
seconds before the next leg departs.  The movement file is the canonical
exchange format (floats at 6 decimals); simulation runs consume parsed files
so trace determinism is tied to file bytes, not in-memory float leftovers.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .engine import NS_PER_S, RandomStream


@dataclass(frozen=True)
class Leg:
    depart_s: float
    x: float
    y: float
    speed: float  # m/s
    arrival_s: float  # depart + travel time


@dataclass
class MobilityPlan:
    n: int
    width: float
    height: float
    duration_s: float
    pause_s: float = 0.0
    speed_min: float = 0.0
    speed_max: float = 0.0
    initial: list = field(default_factory=list)  # per node (x, y)
    legs: list = field(default_factory=list)  # per node, list[Leg]


def generate_plan(n, area, pause_s, speed_max, speed_min, duration_s,
                  stream: RandomStream) -> MobilityPlan:
    """Generate a random-waypoint plan covering [0, duration].

    Initial positions and leg destinations are uniform over the area, leg
    speeds uniform over [speed_min, speed_max].  speed_max == 0 produces a
    fully static plan (no legs).
    """
    width, height = area
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if speed_min < 0 or speed_min > speed_max:
        raise ValueError(f"bad speed range [{speed_min}, {speed_max}]")
    if pause_s < 0:
        raise ValueError(f"pause must be >= 0, got {pause_s}")
    if duration_s <= 0:
        raise ValueError(f"duration must be > 0, got {duration_s}")

    plan = MobilityPlan(n, width, height, duration_s, pause_s, speed_min, speed_max)
    for _ in range(n):
        x = stream.uniform(0.0, width)
        y = stream.uniform(0.0, height)
        plan.initial.append((x, y))
        legs = []
        if speed_max > 0:
            t = 0.0
            px, py = x, y
            while t < duration_s:
                dx = stream.uniform(0.0, width)
                dy = stream.uniform(0.0, height)
                if speed_min == speed_max:
                    v = speed_min
                else:
                    v = stream.uniform(speed_min, speed_max)
                dist = math.sqrt((dx - px) ** 2 + (dy - py) ** 2)
                arrival = t + dist / v
                legs.append(Leg(t, dx, dy, v, arrival))
                t = arrival + pause_s
                px, py = dx, dy
        plan.legs.append(legs)
    return plan


def position_at(plan: MobilityPlan, node: int, t_s: float):
    """Position of `node` at time t: linear along the current leg, fixed
    at the waypoint during pauses."""
    if node < 0 or node >= plan.n:
        raise KeyError(f"unknown node id {node}")
    px, py = plan.initial[node]
    for leg in plan.legs[node]:
        if t_s < leg.depart_s:
            break
        if t_s >= leg.arrival_s:
            px, py = leg.x, leg.y
            continue
        travel = leg.arrival_s - leg.depart_s
        f = (t_s - leg.depart_s) / travel
        return (px + (leg.x - px) * f, py + (leg.y - py) * f)
    return (px, py)


# --- movement file (bit-exact external format) ---

def format_movement(plan: MobilityPlan) -> str:
    lines = []
    for node in range(plan.n):
        x, y = plan.initial[node]
        lines.append(f"node {node} init {x:.6f} {y:.6f}")
        for leg in plan.legs[node]:
            lines.append(
                f"node {node} at {leg.depart_s:.6f} goto {leg.x:.6f} {leg.y:.6f} speed {leg.speed:.6f}"
            )
    return "\n".join(lines) + "\n"


def parse_movement(text: str, duration_s: float = 0.0) -> MobilityPlan:
    """Parse a movement file back into a plan.

    Arrival times are recomputed from the serialized positions and speeds, so
    the parsed plan is self-contained and platform-independent.
    """
    initial = {}
    moves = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            if parts[0] != "node":
                raise ValueError("expected 'node'")
            nid = int(parts[1])
            if parts[2] == "init":
                initial[nid] = (float(parts[3]), float(parts[4]))
            elif parts[2] == "at":
                if parts[4] != "goto" or parts[7] != "speed":
                    raise ValueError("malformed goto directive")
                moves.setdefault(nid, []).append(
                    (float(parts[3]), float(parts[5]), float(parts[6]), float(parts[8]))
                )
            else:
                raise ValueError(f"unknown directive {parts[2]!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"movement file line {lineno}: {exc}") from None

    n = max(initial) + 1 if initial else 0
    if set(initial) != set(range(n)):
        raise ValueError("movement file must give an init line for every node 0..n-1")
    plan = MobilityPlan(n, 0.0, 0.0, duration_s)
    for node in range(n):
        px, py = initial[node]
        plan.initial.append((px, py))
        legs = []
        for t, x, y, v in sorted(moves.get(node, ())):
            dist = math.sqrt((x - px) ** 2 + (y - py) ** 2)
            legs.append(Leg(t, x, y, v, t + dist / v))
            px, py = x, y
        plan.legs.append(legs)
    return plan


class PositionIndex:
    """Fast position queries over a plan, keyed by integer-ns sim time.

    Precomputes per-node motion segments, plus the merged set of intervals in
    which anything moves at all (so periodic neighbor refreshes can skip
    recomputation while the whole network is paused).
    """

    def __init__(self, plan: MobilityPlan):
        self.n = plan.n
        self._init = list(plan.initial)
        self._starts = []  # per node: segment start times (ns)
        self._segs = []  # per node: (t0, t1, x0, y0, vx, vy, x1, y1)
        self._cursor = [0] * plan.n  # last segment index; queries are mostly
        motion = []                  # time-monotonic, so walk instead of bisect
        for node in range(plan.n):
            px, py = plan.initial[node]
            starts, segs = [], []
            for leg in plan.legs[node]:
                t0 = round(leg.depart_s * NS_PER_S)
                t1 = round(leg.arrival_s * NS_PER_S)
                travel = (t1 - t0) / NS_PER_S
                if travel <= 0:
                    px, py = leg.x, leg.y
                    continue
                vx = (leg.x - px) / travel
                vy = (leg.y - py) / travel
                starts.append(t0)
                segs.append((t0, t1, px, py, vx, vy, leg.x, leg.y))
                motion.append((t0, t1))
                px, py = leg.x, leg.y
            self._starts.append(starts)
            self._segs.append(segs)
        motion.sort()
        merged = []
        for t0, t1 in motion:
            if merged and t0 <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], t1))
            else:
                merged.append((t0, t1))
        self._motion = merged
        self._motion_starts = [iv[0] for iv in merged]

    def pos(self, node: int, t_ns: int):
        segs = self._segs[node]
        if not segs:
            return self._init[node]
        starts = self._starts[node]
        i = self._cursor[node]
        if t_ns < starts[i]:
            i = bisect_right(starts, t_ns) - 1  # rare backwards query
            if i < 0:
                self._cursor[node] = 0
                return self._init[node]
        else:
            last = len(starts) - 1
            while i < last and starts[i + 1] <= t_ns:
                i += 1
        self._cursor[node] = i
        t0, t1, x0, y0, vx, vy, x1, y1 = segs[i]
        if t_ns >= t1:
            return (x1, y1)
        dt = (t_ns - t0) / NS_PER_S
        return (x0 + vx * dt, y0 + vy * dt)

    def any_motion(self, t0_ns: int, t1_ns: int) -> bool:
        """True if any node moves during [t0, t1]."""
        i = bisect_right(self._motion_starts, t1_ns) - 1
        return i >= 0 and self._motion[i][1] >= t0_ns
