"""Walk through a single monitoring round on a small mobile network.

Run with ``python notebooks/01_one_round.py``.
"""

from collections import Counter

from dhymon import metrics
from dhymon.netsim import SimConfig, run

# 25 nodes on the density-rule square (about 354 m a side), moving at 6 m/s.
cfg = SimConfig(n_nodes=25, speed=6.0, seed=7)
trace = run(cfg)
print(f"area side {trace.meta['side']:.0f} m, root(s) {trace.meta['roots']}")

# Every round is keyed by (root, start time).
(process,) = metrics.processes(trace)
v = metrics.verdict(trace, process)

# The verdict is what the root actually learned: how many observations made
# it back, and their sum, so the average load is one division away.
if v is None:
    print("the root never reached a verdict")
else:
    print(
        f"verdict after {metrics.convergence_time(trace, process):.0f} ms: "
        f"{v['count']} of {cfg.n_nodes} nodes, mean load {v['sum'] / v['count']:.1f}, "
        f"tree depth {v['max_depth']}"
    )

# The trace also says why the rest are missing. NonCovered nodes never heard
# the query; PartiallyCovered ones took part but their report was not
# acknowledged by their parent.
classes = metrics.classify(trace, process)
print(Counter(c.value for c in classes.values()))

# Fallback routing kicks in whenever a report is not acknowledged in time.
# A lost acknowledgement is enough: the parent already counted the report and
# has finished, so the child works through every relay it heard from.
sent, received = metrics.routing_usage(trace)
print(f"ROUTE packets sent {sent}, delivered {received}")

# Message mix on the wire.
mix = Counter()
for r in trace.of_kind("event"):
    for a in r.data["actions"]:
        if a[0] in ("broadcast", "unicast"):
            mix[a[1]] += 1
print(dict(mix))
