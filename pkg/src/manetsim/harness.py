"""Experiment orchestration: the 50-cell scenario matrix, parallel sweeps,
and aggregation of per-run metrics into cell means.

The matrix pairs protocols: within one (cell, seed) all four protocols
consume byte-identical movement and traffic files, so comparisons are paired.
Two sweeps of 25 cells each: nodes x pause at max speed 2 m/s, and nodes x
max speed at pause 2 s.  Minimum speed is 1 m/s throughout.
"""

import json
import math
import os
from dataclasses import dataclass
from multiprocessing import Pool

from .config import apply_overrides, default_params
from .engine import RandomStream
from .metrics import CSV_HEADER, csv_row
from .mobility import format_movement
from .mobility import generate_plan as generate_mobility
from .runner import PROTOCOLS, simulate
from .traffic import format_traffic
from .traffic import generate_plan as generate_traffic

NODE_COUNTS = (10, 20, 30, 40, 50)
PAUSE_VALUES = (10.0, 50.0, 100.0, 150.0, 200.0)
SPEED_VALUES = (5.0, 10.0, 15.0, 20.0, 25.0)
PAUSE_SWEEP_SPEED = 2.0
SPEED_SWEEP_PAUSE = 2.0
SPEED_MIN = 1.0
DURATION_S = 150.0
AREA = (500.0, 500.0)
DEFAULT_SEEDS = 5


def connections_for(n: int) -> int:
    """Paper keeps 20 to 40 CBR connections; scale by density."""
    return 20 if n <= 30 else 40


@dataclass(frozen=True)
class Cell:
    sweep: str  # "pause" | "speed"
    n: int
    pause_s: float
    speed_max: float

    @property
    def sweep_value(self):
        return self.pause_s if self.sweep == "pause" else self.speed_max

    def label(self):
        return f"{self.sweep}{self.sweep_value:g}_n{self.n}"


def matrix_cells():
    cells = [Cell("pause", n, p, PAUSE_SWEEP_SPEED)
             for p in PAUSE_VALUES for n in NODE_COUNTS]
    cells += [Cell("speed", n, SPEED_SWEEP_PAUSE, s)
              for s in SPEED_VALUES for n in NODE_COUNTS]
    return cells


def gen_matrix(seeds: int, protocols=PROTOCOLS):
    """Full run-spec list: 50 cells x protocols x seeds."""
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    return [(cell, seed, proto)
            for cell in matrix_cells()
            for seed in range(seeds)
            for proto in protocols]


def scenario_texts(n, pause_s, speed_min, speed_max, duration_s, seed,
                   max_conns=None):
    """Movement + traffic file bodies for one scenario; shared by protocol."""
    mob = generate_mobility(n, AREA, pause_s, speed_max, speed_min, duration_s,
                            RandomStream(seed, "mobility"))
    if max_conns is None:
        max_conns = connections_for(n)
    tra = generate_traffic(n, max_conns, RandomStream(seed, "traffic"), duration_s)
    return format_movement(mob), format_traffic(tra)


def _run_task(task):
    cell_d, seed, proto, overrides, keep_trace = task
    cell = Cell(**cell_d)
    movement, traffic = scenario_texts(cell.n, cell.pause_s, SPEED_MIN,
                                       cell.speed_max, DURATION_S, seed)
    params = apply_overrides(default_params(), overrides) if overrides else None
    res = simulate(movement, traffic, proto, seed, DURATION_S, params)
    row = csv_row(proto, cell.n, cell.pause_s, cell.speed_max, seed, res.report)
    checks = {
        "conservation_ok": res.conservation_ok,
        "loop_violations": res.loop_violations,
        "route_step_violations": res.route_step_violations,
        "generated": res.generated,
        "delivered": res.delivered,
        "dropped": res.dropped,
        "residual": res.residual,
    }
    manifest = {
        "protocol": proto, "seed": seed, "cell": cell_d,
        "digest": res.digest, "events": res.events, "checks": checks,
    }
    trace = res.trace if keep_trace else None
    return cell_d, seed, proto, row, manifest, trace


def sweep(out_dir, seeds=DEFAULT_SEEDS, protocols=PROTOCOLS, jobs=None,
          check=False, keep_traces=False, overrides=None, progress=None):
    """Run the full matrix.  Returns (csv path, list of check failures)."""
    os.makedirs(out_dir, exist_ok=True)
    specs = gen_matrix(seeds, protocols)
    tasks = [({"sweep": c.sweep, "n": c.n, "pause_s": c.pause_s,
               "speed_max": c.speed_max}, seed, proto, overrides or {}, keep_traces)
             for c, seed, proto in specs]
    results = []
    if jobs and jobs > 1:
        with Pool(jobs) as pool:
            for i, out in enumerate(pool.imap_unordered(_run_task, tasks, chunksize=4)):
                results.append(out)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, task in enumerate(tasks):
            results.append(_run_task(task))
            if progress:
                progress(i + 1, len(tasks))

    results.sort(key=lambda r: (r[2], r[0]["sweep"], r[0]["pause_s"],
                                r[0]["speed_max"], r[0]["n"], r[1]))
    csv_path = os.path.join(out_dir, "metrics.csv")
    with open(csv_path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for _, _, _, row, _, _ in results:
            fh.write(row + "\n")

    failures = []
    with open(os.path.join(out_dir, "manifest.jsonl"), "w") as fh:
        for cell_d, seed, proto, _, manifest, trace in results:
            fh.write(json.dumps(manifest, sort_keys=True) + "\n")
            ch = manifest["checks"]
            if check and (not ch["conservation_ok"] or ch["loop_violations"]
                          or ch["route_step_violations"]):
                failures.append(manifest)
            if trace is not None:
                cell = Cell(**cell_d)
                name = f"{proto}_{cell.label()}_s{seed}.tr"
                with open(os.path.join(out_dir, name), "w") as tf:
                    tf.write(trace)
    return csv_path, failures


# --- aggregation ---

def read_metrics_csv(path):
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected metrics CSV header: {header!r}")
        for line in fh:
            p = line.strip().split(",")
            if len(p) != 11:
                continue
            rows.append({
                "protocol": p[0], "nodes": int(p[1]), "pause": float(p[2]),
                "speed": float(p[3]), "seed": int(p[4]), "throughput": float(p[5]),
                "avg_delay_s": float(p[6]), "dropped": int(p[7]),
                "overhead": int(p[8]), "generated": int(p[9]), "delivered": int(p[10]),
            })
    return rows


def cell_key(row):
    if row["speed"] == PAUSE_SWEEP_SPEED:
        return ("pause", row["pause"], row["nodes"])
    return ("speed", row["speed"], row["nodes"])


def cell_means(rows):
    """(cell key, protocol) -> mean/min/max per metric over seeds.

    Delay means skip NaN (undelivered) seeds; a cell with no delivering seed
    keeps NaN for delay.
    """
    acc = {}
    for row in rows:
        acc.setdefault((cell_key(row), row["protocol"]), []).append(row)
    out = {}
    for key, group in acc.items():
        stats = {}
        for metric in ("throughput", "avg_delay_s", "dropped", "overhead"):
            vals = [g[metric] for g in group]
            if metric == "avg_delay_s":
                vals = [v for v in vals if not math.isnan(v)]
            if vals:
                stats[metric] = (sum(vals) / len(vals), min(vals), max(vals))
            else:
                stats[metric] = (float("nan"), float("nan"), float("nan"))
        out[key] = stats
    return out
