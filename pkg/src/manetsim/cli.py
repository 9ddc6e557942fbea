"""Command-line front door.

    manetsim scen gen --nodes N --pause P --speed-max S [--speed-min 1] --seed K --out DIR
    manetsim run --protocol {dsdv|aodv|dsr|zrp} --scenario DIR --out trace.tr [--config FILE]
    manetsim metrics --trace trace.tr --out report.csv
    manetsim sweep --seeds 5 --out results/ [--protocols LIST] [--jobs J] [--check]
    manetsim plot --results results/metrics.csv --out charts/

Exit codes: 0 success, 1 bad arguments, 2 runtime failure, 3 acceptance-check
failure (sweep --check).
"""

import argparse
import json
import os
import sys
import time

from . import harness
from .charts import emit_charts
from .config import apply_overrides, default_params, parse_overrides
from .metrics import CSV_HEADER, analyze, csv_row, iter_records
from .runner import PROTOCOLS, simulate


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _build_parser():
    parser = _Parser(prog="manetsim")
    sub = parser.add_subparsers(dest="cmd", required=True)

    scen = sub.add_parser("scen", help="scenario file generation")
    scen_sub = scen.add_subparsers(dest="scen_cmd", required=True)
    gen = scen_sub.add_parser("gen", help="generate movement + traffic files")
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--pause", type=float, required=True)
    gen.add_argument("--speed-max", type=float, required=True)
    gen.add_argument("--speed-min", type=float, default=1.0)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--duration", type=float, default=harness.DURATION_S)
    gen.add_argument("--max-conns", type=int, default=None)
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("--protocol", choices=PROTOCOLS, required=True)
    run.add_argument("--scenario", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--config", default=None, help="flat key = value overrides file")
    run.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed for protocol/MAC draws")

    met = sub.add_parser("metrics", help="compute metrics from a trace")
    met.add_argument("--trace", required=True)
    met.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="run the full benchmark matrix")
    sw.add_argument("--seeds", type=int, default=harness.DEFAULT_SEEDS)
    sw.add_argument("--out", required=True)
    sw.add_argument("--protocols", default=",".join(PROTOCOLS))
    sw.add_argument("--jobs", type=int, default=os.cpu_count())
    sw.add_argument("--check", action="store_true",
                    help="fail (exit 3) on conservation/loop violations")
    sw.add_argument("--keep-traces", action="store_true")
    sw.add_argument("--config", default=None)
    sw.add_argument("--quiet", action="store_true")

    pl = sub.add_parser("plot", help="emit SVG charts from sweep metrics")
    pl.add_argument("--results", required=True)
    pl.add_argument("--out", required=True)
    return parser


def _cmd_scen_gen(args):
    if args.nodes < 2:
        raise _ArgError("--nodes must be >= 2")
    movement, traffic = harness.scenario_texts(
        args.nodes, args.pause, args.speed_min, args.speed_max, args.duration,
        args.seed, args.max_conns)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "movement.txt"), "w") as fh:
        fh.write(movement)
    with open(os.path.join(args.out, "traffic.txt"), "w") as fh:
        fh.write(traffic)
    meta = {"nodes": args.nodes, "pause": args.pause, "speed_min": args.speed_min,
            "speed_max": args.speed_max, "duration": args.duration, "seed": args.seed}
    with open(os.path.join(args.out, "scenario.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote scenario for {args.nodes} nodes to {args.out}")
    return 0


def _load_scenario(path):
    with open(os.path.join(path, "scenario.json")) as fh:
        meta = json.load(fh)
    with open(os.path.join(path, "movement.txt")) as fh:
        movement = fh.read()
    with open(os.path.join(path, "traffic.txt")) as fh:
        traffic = fh.read()
    return meta, movement, traffic


def _cmd_run(args):
    meta, movement, traffic = _load_scenario(args.scenario)
    params = default_params()
    if args.config:
        with open(args.config) as fh:
            apply_overrides(params, parse_overrides(fh.read()))
    seed = meta["seed"] if args.seed is None else args.seed
    res = simulate(movement, traffic, args.protocol, seed, meta["duration"], params)
    with open(args.out, "w") as fh:
        fh.write(res.trace)
    manifest = {
        "protocol": args.protocol, "seed": seed, "scenario": meta,
        "digest": res.digest, "events": res.events,
        "checks": {"conservation_ok": res.conservation_ok,
                   "loop_violations": res.loop_violations,
                   "route_step_violations": res.route_step_violations,
                   "residual": res.residual},
    }
    with open(args.out + ".json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    r = res.report
    print(f"{args.protocol}: generated={r.generated} delivered={r.delivered} "
          f"throughput={r.throughput:.4f} overhead={r.overhead}")
    return 0


def _cmd_metrics(args):
    with open(args.trace) as fh:
        report = analyze(iter_records(fh))
    manifest_path = args.trace + ".json"
    proto, nodes, pause, speed, seed = "-", 0, 0.0, 0.0, 0
    if os.path.exists(manifest_path):
        with open(manifest_path) as fh:
            m = json.load(fh)
        proto = m.get("protocol", "-")
        seed = m.get("seed", 0)
        sc = m.get("scenario", {})
        nodes = sc.get("nodes", 0)
        pause = sc.get("pause", 0.0)
        speed = sc.get("speed_max", 0.0)
    with open(args.out, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(csv_row(proto, nodes, pause, speed, seed, report) + "\n")
    print(f"throughput={report.throughput:.4f} avg_delay_s={report.avg_delay_s:.6f} "
          f"dropped={report.dropped} overhead={report.overhead}")
    return 0


def _cmd_sweep(args):
    protocols = tuple(p.strip() for p in args.protocols.split(",") if p.strip())
    for p in protocols:
        if p not in PROTOCOLS:
            raise _ArgError(f"unknown protocol {p!r}")
    overrides = None
    if args.config:
        with open(args.config) as fh:
            overrides = parse_overrides(fh.read())
    t0 = time.time()

    def progress(done, total):
        if not args.quiet and (done % 25 == 0 or done == total):
            rate = done / max(time.time() - t0, 1e-9)
            print(f"  {done}/{total} runs ({rate:.1f}/s)", flush=True)

    csv_path, failures = harness.sweep(
        args.out, seeds=args.seeds, protocols=protocols, jobs=args.jobs,
        check=args.check, keep_traces=args.keep_traces, overrides=overrides,
        progress=progress)
    print(f"metrics written to {csv_path} in {time.time() - t0:.1f}s")
    if args.check and failures:
        print(f"{len(failures)} runs failed consistency checks", file=sys.stderr)
        return 3
    return 0


def _cmd_plot(args):
    written, missing = emit_charts(args.results, args.out)
    if missing:
        cells = ", ".join(f"{k}{v:g}/n{n}/{p}" for k, v, n, p in missing[:10])
        print(f"warning: {len(missing)} missing cells ({cells} ...)", file=sys.stderr)
    print(f"wrote {len(written)} charts to {args.out}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.cmd == "scen":
            return _cmd_scen_gen(args)
        if args.cmd == "run":
            return _cmd_run(args)
        if args.cmd == "metrics":
            return _cmd_metrics(args)
        if args.cmd == "sweep":
            return _cmd_sweep(args)
        if args.cmd == "plot":
            return _cmd_plot(args)
        return 1
    except _ArgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
