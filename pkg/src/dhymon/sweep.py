"""Parameter sweeps: cross-product of settings, many seeded cycles each."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import os
import tempfile
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as configmod
from .metrics import RunRecord, run_record, summarize
from .netsim import SimConfig, run

AXES = ("n_nodes", "speed", "timeout", "roots")


@dataclass(frozen=True)
class SweepSpec:
    n_nodes: tuple = (20,)
    speed: tuple = (2.0,)
    timeout: tuple = (200.0,)
    roots: tuple = (1,)
    cycles: int = 1
    base_seed: int = 0
    base: dict = field(default_factory=dict)  # remaining SimConfig fields
    jobs: int = 1

    def __post_init__(self):
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        for axis in AXES:
            if not getattr(self, axis):
                raise ValueError(f"sweep axis {axis!r} is empty")
        bad = set(self.base) - {f.name for f in dataclasses.fields(SimConfig)}
        if bad:
            raise ValueError(f"unknown simulation settings {sorted(bad)}")
        # fail early on combinations SimConfig would reject
        for combo in self.combinations():
            self.config_for(combo, 0)

    @classmethod
    def from_config(cls, cfg: dict, **overrides) -> "SweepSpec":
        sw = dict(cfg.get("sweep", {}))
        base = {k: v for k, v in cfg.get("sim", {}).items() if k not in AXES and k != "seed"}
        kw = {axis: tuple(sw[axis]) for axis in AXES if axis in sw}
        for key in ("cycles", "base_seed", "jobs"):
            if key in sw:
                kw[key] = sw[key]
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(base=base, **kw)

    def combinations(self) -> list[dict]:
        return [dict(zip(AXES, values)) for values in itertools.product(*(getattr(self, a) for a in AXES))]

    def seed_for(self, combo: dict, cycle: int) -> int:
        """Seed of one cycle. ``roots`` is left out on purpose so that single-
        and multi-root runs of the same setting see the same network."""
        key = [
            int(self.base_seed) % (1 << 63),
            int(combo["n_nodes"]),
            int(round(float(combo["speed"]) * 1000)),
            int(round(float(combo["timeout"]) * 1000)),
            int(cycle),
        ]
        return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])

    def config_for(self, combo: dict, cycle: int) -> SimConfig:
        return SimConfig(**{**self.base, **combo, "seed": self.seed_for(combo, cycle)})

    def tasks(self) -> list[tuple[int, int, SimConfig]]:
        return [
            (i, c, self.config_for(combo, c))
            for i, combo in enumerate(self.combinations())
            for c in range(self.cycles)
        ]


def simulate_cycle(task: tuple[int, int, SimConfig]) -> RunRecord:
    _, cycle, cfg = task
    return run_record(run(cfg), cycle)


def execute(spec: SweepSpec, jobs: Optional[int] = None) -> list[RunRecord]:
    """Run every cycle; results come back in (combination, cycle) order."""
    tasks = spec.tasks()
    jobs = jobs or spec.jobs or 1
    if jobs <= 1:
        return [simulate_cycle(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(simulate_cycle, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


# Tables -------------------------------------------------------------------


def run_columns(max_roots: int) -> list[str]:
    cols = ["cycle", "seed", "n_nodes", "area_side", "speed", "timeout", "roots"]
    for i in range(1, max_roots + 1):
        cols += [
            f"root{i}",
            f"accuracy_{i}",
            f"converged_{i}",
            f"convergence_ms_{i}",
            f"tree_depth_{i}",
            f"fully_covered_{i}",
        ]
    return cols + ["joint_accuracy", "route_sent", "route_received"]


SUMMARY_COLUMNS = [
    "cycles",
    "accuracy_mean",
    "joint_accuracy_mean",
    "converged_ratio",
    "convergence_mean",
    "convergence_min",
    "convergence_max",
    "tree_depth_mean",
    "tree_depth_min",
    "tree_depth_max",
    "route_sent_mean",
    "route_received_mean",
]


def _fmt(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def summary_rows(records: Sequence[RunRecord], keys: Sequence[str]) -> list[dict]:
    """Mean/min/max per group; convergence and depth pool every root's round."""
    groups: dict[tuple, list[RunRecord]] = defaultdict(list)
    for rec in records:
        cfg = {**rec.config, "roots": len(rec.roots)}
        groups[tuple(cfg[k] for k in keys)].append(rec)
    rows = []
    for key in sorted(groups):
        recs = groups[key]
        per_root = [r for rec in recs for r in rec.roots]
        conv = summarize([r.convergence_ms for r in per_root])
        depth = summarize([r.tree_depth for r in per_root])
        row = dict(zip(keys, key))
        row.update(
            {
                "cycles": len(recs),
                "accuracy_mean": summarize([r.accuracy for r in per_root])[0],
                "joint_accuracy_mean": summarize([rec.joint_accuracy for rec in recs])[0],
                "converged_ratio": sum(r.converged for r in per_root) / len(per_root),
                "convergence_mean": conv[0],
                "convergence_min": conv[1],
                "convergence_max": conv[2],
                "tree_depth_mean": depth[0],
                "tree_depth_min": depth[1],
                "tree_depth_max": depth[2],
                "route_sent_mean": summarize([rec.route_msgs_sent for rec in recs])[0],
                "route_received_mean": summarize([rec.route_msgs_received for rec in recs])[0],
            }
        )
        rows.append(row)
    return rows


def to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in columns})
    return buf.getvalue()


def tables(spec: SweepSpec, records: Sequence[RunRecord]) -> dict[str, str]:
    """CSV text for the per-cycle rows and the grouped summaries."""
    expected = len(spec.combinations()) * spec.cycles
    if len(records) != expected:
        raise RuntimeError(f"expected {expected} rows, got {len(records)}")
    max_roots = max(spec.roots)
    out = {"runs.csv": to_csv([r.row() for r in records], run_columns(max_roots))}
    groupings = {
        "summary.csv": list(AXES),
        "by_timeout.csv": ["timeout"],
        "by_nodes.csv": ["n_nodes", "roots"],
    }
    for name, keys in groupings.items():
        out[name] = to_csv(summary_rows(records, keys), [*keys, *SUMMARY_COLUMNS])
    return out


def write_tables(files: dict[str, str], out_dir) -> list[Path]:
    """Write all tables or none: files are staged and renamed into place."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
    except OSError:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)
    return [final for _, final in staged]


def run_sweep(spec: SweepSpec, out_dir=None, jobs: Optional[int] = None) -> tuple[list[RunRecord], dict[str, str]]:
    records = execute(spec, jobs)
    files = tables(spec, records)
    if out_dir is not None:
        write_tables(files, out_dir)
    return records, files


def load_spec(path=None, **overrides) -> SweepSpec:
    return SweepSpec.from_config(configmod.load(path), **overrides)
