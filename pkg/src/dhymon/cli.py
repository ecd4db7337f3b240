"""Command line entry point.

    dhymon run     --config sim.toml  --out DIR [--seed N]
    dhymon sweep   --config sweep.toml --out DIR [--seed N] [--cycles N] [--jobs N]
    dhymon analyze TRACE [--out DIR]

Exit status: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import config as configmod
from . import sweep as sweepmod
from .metrics import run_record
from .netsim import SimConfig, run
from .trace import TraceFormatError, emit_trace, read_trace

log = logging.getLogger("dhymon")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def sim_config(cfg: dict, seed=None) -> SimConfig:
    sim = dict(cfg.get("sim", {}))
    if seed is not None:
        sim["seed"] = seed
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = set(sim) - known
    if unknown:
        raise configmod.ConfigError(f"unknown [sim] keys {sorted(unknown)}")
    return SimConfig.from_dict(sim)


def _print_record(rec) -> None:
    for res in rec.roots:
        conv = "-" if res.convergence_ms is None else f"{res.convergence_ms:.1f} ms"
        print(
            f"root {res.root}: accuracy {res.accuracy:.3f}  convergence {conv}  "
            f"depth {res.tree_depth if res.tree_depth is not None else '-'}"
        )
    print(f"joint accuracy {rec.joint_accuracy:.3f}  route sent/received {rec.route_msgs_sent}/{rec.route_msgs_received}")


def cmd_run(args) -> int:
    cfg = sim_config(configmod.load(args.config), args.seed)
    trace = run(cfg)
    rec = run_record(trace)
    _print_record(rec)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        emit_trace(trace, out / "trace.jsonl")
        max_roots = max(1, len(rec.roots))
        text = sweepmod.to_csv([rec.row()], sweepmod.run_columns(max_roots))
        sweepmod.write_tables({"record.csv": text}, out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = sweepmod.load_spec(args.config, cycles=args.cycles, base_seed=args.seed, jobs=args.jobs)
    total = len(spec.combinations()) * spec.cycles
    log.info("running %d cycles over %d combinations", total, len(spec.combinations()))
    _, files = sweepmod.run_sweep(spec, out_dir=args.out)
    print(files["by_nodes.csv"], end="")
    return EXIT_OK


def cmd_analyze(args) -> int:
    trace = read_trace(args.trace)
    rec = run_record(trace)
    _print_record(rec)
    if args.out:
        text = sweepmod.to_csv([rec.row()], sweepmod.run_columns(max(1, len(rec.roots))))
        sweepmod.write_tables({"record.csv": text}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dhymon", description="Hybrid gossip/tree MANET monitoring simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one monitoring cycle")
    p.add_argument("--config", help="TOML file with a [sim] section")
    p.add_argument("--out", help="directory for trace.jsonl and record.csv")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter sweep")
    p.add_argument("--config", help="TOML file with [sim] and [sweep] sections")
    p.add_argument("--out", required=True, help="directory for the CSV tables")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--cycles", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="recompute metrics from a saved trace")
    p.add_argument("trace")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (configmod.ConfigError, ValueError, TypeError) as exc:
        if isinstance(exc, TraceFormatError):
            print(f"error: {args.trace}: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
