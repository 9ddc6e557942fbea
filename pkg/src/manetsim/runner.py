"""Wiring for one simulation run: engine, medium, agents, traffic, checks.

A run is fully described by (movement file, traffic file, protocol, seed,
duration, params) and is deterministic down to the trace bytes.  Each run
owns its engine and all state; runs never share anything mutable, so they can
execute in parallel processes.
"""

import hashlib
from dataclasses import dataclass, field

from .config import SimParams, default_params
from .engine import Engine, NS_PER_S, RandomStream, seconds
from .medium import KIND_DATA, Medium
from .metrics import MetricsReport, TraceLog
from .mobility import MobilityPlan, PositionIndex, parse_movement
from .routing.base import Packet, RunContext
from .routing.aodv import AodvAgent
from .routing.dsdv import DsdvAgent
from .routing.dsr import DsrAgent
from .routing.zrp import ZrpAgent
from .traffic import TrafficPlan, parse_traffic

PROTOCOLS = ("dsdv", "aodv", "dsr", "zrp")

_AGENTS = {"dsdv": DsdvAgent, "aodv": AodvAgent, "dsr": DsrAgent, "zrp": ZrpAgent}

BUFFER_SWEEP_S = 1.0


@dataclass
class RunResult:
    protocol: str
    seed: int
    trace: str
    digest: str
    report: MetricsReport
    generated: int
    delivered: int
    dropped: int
    residual: int
    conservation_ok: bool
    loop_violations: int
    route_step_violations: int
    events: int


class Sim:
    """One assembled simulation, ready to run (or to be driven by tests)."""

    def __init__(self, mobility: MobilityPlan, traffic: TrafficPlan, protocol: str,
                 seed: int, duration_s: float, params: SimParams = None,
                 checks: bool = True):
        if protocol not in _AGENTS:
            raise ValueError(f"unknown protocol {protocol!r}")
        self.protocol = protocol
        self.seed = seed
        self.duration_s = duration_s
        self.duration_ns = seconds(duration_s)
        self.params = params or default_params()
        self.n = mobility.n
        self.engine = Engine()
        self.trace = TraceLog(checks=checks)
        self.positions = PositionIndex(mobility)
        mac_stream = RandomStream(seed, f"mac-jitter/{protocol}")
        proto_stream = RandomStream(seed, f"protocol/{protocol}")
        self.medium = Medium(self.engine, self.params.radio, self.positions,
                             self.n, self.trace, mac_stream)
        self.ctx = RunContext(self.engine, self.medium, self.trace, self.params,
                              proto_stream, self.n)
        agent_cls = _AGENTS[protocol]
        self.agents = [agent_cls(i, self.ctx) for i in range(self.n)]
        self.medium.agents = self.agents
        for agent in self.agents:
            agent.start()
        self._flow_seq = [0] * len(traffic.connections)
        for ci, conn in enumerate(traffic.connections):
            if conn.src >= self.n or conn.dst >= self.n:
                raise ValueError(f"connection {conn} references unknown node")
            start_ns = round(conn.start_s * NS_PER_S)
            if start_ns < self.duration_ns:
                self.engine.schedule_at(start_ns, self._emit, (ci, conn),
                                        target=conn.src, kind="cbr-emit")
        self.engine.schedule_in(seconds(BUFFER_SWEEP_S), self._sweep_buffers,
                                kind="buffer-sweep")

    def _emit(self, ci, conn):
        now = self.engine.now
        seq = self._flow_seq[ci]
        self._flow_seq[ci] = seq + 1
        pkt = Packet(self.ctx.next_uid(), KIND_DATA, "cbr", conn.payload_bytes,
                     conn.src, conn.dst, flow_seq=seq, origin_ns=now,
                     ttl=self.params.core.data_ttl)
        self.trace.emit("s", now, conn.src, "AGT", pkt.uid, "cbr",
                        pkt.app_size, conn.src, conn.dst)
        self.agents[conn.src].on_data_from_app(pkt)
        nxt = now + conn.period_ns()
        if nxt < self.duration_ns:
            self.engine.schedule_at(nxt, self._emit, (ci, conn),
                                    target=conn.src, kind="cbr-emit")

    def _sweep_buffers(self):
        for agent in self.agents:
            agent.expire_buffer()
        if self.engine.now < self.duration_ns:
            self.engine.schedule_in(seconds(BUFFER_SWEEP_S), self._sweep_buffers,
                                    kind="buffer-sweep")

    def run(self) -> RunResult:
        events, _ = self.engine.run_until(self.duration_ns)
        return self.result(events)

    def residual_data_uids(self):
        uids = set(self.medium.pending_data_uids())
        for agent in self.agents:
            buf = getattr(agent, "buffer", None)
            if buf is not None:
                uids.update(p.uid for p in buf.packets())
        return uids

    def result(self, events=0) -> RunResult:
        text = self.trace.text()
        digest = hashlib.sha256(text.encode("ascii")).hexdigest()
        report = self.trace.report()
        residual = len(self.residual_data_uids())
        conserved = (self.trace.generated
                     == self.trace.delivered + self.trace.dropped_data + residual)
        return RunResult(self.protocol, self.seed, text, digest, report,
                         self.trace.generated, self.trace.delivered,
                         self.trace.dropped_data, residual, conserved,
                         self.trace.loop_violations,
                         self.ctx.route_step_violations, events)


def simulate(movement_text: str, traffic_text: str, protocol: str, seed: int,
             duration_s: float, params: SimParams = None,
             checks: bool = True) -> RunResult:
    """Parse scenario files, run to completion, return the result."""
    mobility = parse_movement(movement_text, duration_s)
    traffic = parse_traffic(traffic_text, mobility.n)
    sim = Sim(mobility, traffic, protocol, seed, duration_s, params, checks)
    return sim.run()
