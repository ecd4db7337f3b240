"""How the per-node timeout shapes accuracy and convergence.

A short timeout closes rounds quickly while the tree is still intact; a long
one gives stragglers time to answer but lets nodes drift apart meanwhile.
The fastest round can never beat the timeout itself, because every leaf waits
one full timeout before reporting.
"""

import csv
import io
import tempfile
from pathlib import Path

from dhymon.sweep import SweepSpec, run_sweep

spec = SweepSpec(n_nodes=(20, 40, 60), speed=(2.0,), timeout=(50.0, 200.0, 800.0), cycles=20)
out = Path(tempfile.mkdtemp(prefix="dhymon-timeouts-"))
_, files = run_sweep(spec, out_dir=out)

for row in csv.DictReader(io.StringIO(files["by_timeout.csv"])):
    t = float(row["timeout"])
    print(
        f"t={t:>5.0f} ms  accuracy {float(row['accuracy_mean']):.3f}  "
        f"convergence {float(row['convergence_mean']):7.0f} ms "
        f"(min {float(row['convergence_min']):.0f}, max {float(row['convergence_max']):.0f})"
    )

print(f"tables written to {out}: {sorted(p.name for p in out.iterdir())}")
