"""Shared test scaffolding: tiny scenario builders and graph oracles."""

from collections import deque

from manetsim.config import default_params
from manetsim.runner import Sim
from manetsim.mobility import parse_movement
from manetsim.traffic import parse_traffic


def static_movement(positions):
    lines = [f"node {i} init {x:.6f} {y:.6f}" for i, (x, y) in enumerate(positions)]
    return "\n".join(lines) + "\n"


def traffic_text(conns):
    """conns: list of (src, dst, start_s) or (src, dst, start_s, rate, size)."""
    lines = []
    for c in conns:
        src, dst, start = c[0], c[1], c[2]
        rate = c[3] if len(c) > 3 else 4.0
        size = c[4] if len(c) > 4 else 512
        lines.append(f"conn {src} {dst} start {start:.6f} rate {rate:.6f} size {size}")
    return "\n".join(lines) + "\n" if lines else ""


def make_sim(movement, traffic, protocol, seed=0, duration=30.0, params=None,
             overrides=None):
    if params is None:
        params = default_params()
    if overrides:
        from manetsim.config import apply_overrides
        apply_overrides(params, overrides)
    plan = parse_movement(movement, duration)
    tra = parse_traffic(traffic, plan.n)
    return Sim(plan, tra, protocol, seed, duration, params)


def run_sim(movement, traffic, protocol, seed=0, duration=30.0, params=None,
            overrides=None):
    sim = make_sim(movement, traffic, protocol, seed, duration, params, overrides)
    res = sim.run()
    return sim, res


def unit_disk_edges(positions, range_m=250.0):
    n = len(positions)
    r2 = range_m * range_m
    adj = {i: set() for i in range(n)}
    for a in range(n):
        ax, ay = positions[a]
        for b in range(a + 1, n):
            dx = ax - positions[b][0]
            dy = ay - positions[b][1]
            if dx * dx + dy * dy <= r2:
                adj[a].add(b)
                adj[b].add(a)
    return adj


def bfs_dists(adj, src, cutoff=None):
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if cutoff is not None and dist[u] >= cutoff:
            continue
        for v in sorted(adj[u]):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def is_connected(adj):
    return len(bfs_dists(adj, 0)) == len(adj)


def records_of(res):
    from manetsim.metrics import iter_records
    return list(iter_records(res.trace.splitlines()))


def delivered_paths(records):
    """uid -> node path (source, forwards..., destination) for delivered data."""
    paths = {}
    done = {}
    for r in records:
        if r.ptype != "cbr":
            continue
        if r.event == "s" and r.layer == "AGT":
            paths[r.uid] = [r.node]
        elif r.event == "f" and r.layer == "RTR":
            paths.setdefault(r.uid, []).append(r.node)
        elif r.event == "r" and r.layer == "AGT":
            paths.setdefault(r.uid, []).append(r.node)
            done[r.uid] = paths[r.uid]
    return done
