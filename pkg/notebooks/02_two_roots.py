"""Does a second root help? A paired comparison on identical networks.

The sweep seeds ignore the number of roots, so cycle ``c`` of the one-root
and two-root runs share node placement, motion and observations. Any
difference comes from the extra round alone.
"""

import statistics

from dhymon.sweep import SweepSpec, execute

spec = SweepSpec(n_nodes=(20, 40, 60), speed=(6.0,), roots=(1, 2), cycles=30)
records = execute(spec)

by_point = {}
for combo, rec in zip((c for c in spec.combinations() for _ in range(spec.cycles)), records):
    by_point.setdefault((combo["n_nodes"], combo["roots"]), []).append(rec.joint_accuracy)

print(f"{'nodes':>5} {'one root':>9} {'two roots':>10} {'gain':>6}")
for n in spec.n_nodes:
    one = statistics.fmean(by_point[(n, 1)])
    two = statistics.fmean(by_point[(n, 2)])
    print(f"{n:>5} {one:>9.3f} {two:>10.3f} {100 * (two - one):>5.1f}pp")

# Per cycle the union can never lose ground against either of its rounds.
pairs = [r for r in records if len(r.roots) == 2]
assert all(r.joint_accuracy >= max(x.accuracy for x in r.roots) for r in pairs)
print(f"union never below its best round in {len(pairs)} two-root cycles")
