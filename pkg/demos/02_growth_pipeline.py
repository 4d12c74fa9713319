"""Walkthrough: growing a sparse network until performance saturates.

Starts a small MLP at 10% density from a walk-based seed topology, then
alternates rough training with path-biased random edge growth.  After each
round the (density, validation accuracy) pair extends a trace; once a
saturating curve fits the trace, growth stops at the density where the
fitted curve reaches 95% of its plateau, and the final network gets a
longer "extensive" training run.

Run:  python3 demos/02_growth_pipeline.py
"""

import csv
import json
import tempfile
from pathlib import Path

from pathgrow.config import (ExperimentConfig, DatasetSpec, InitSpec,
                             OptimizerSpec, RoughSpec, StoppingSpec)
from pathgrow.pipeline import run_growth_pipeline

cfg = ExperimentConfig(
    arch="mlp-32-24-16-4",
    dataset=DatasetSpec(kind="synth", n=1500, dims=32, classes=4,
                        separation=2.0),
    init=InitSpec(method="phew", rho_init=0.1),
    growth_method="pwmpr",
    rough=RoughSpec(mode="adaptive", patience=3, max_epochs=10),
    stopping=StoppingSpec(density_cap=0.8),
    optimizer=OptimizerSpec(extensive_epochs=10, batch_size=64),
    seed=0,
)

out = Path(tempfile.mkdtemp()) / "run"
report = run_growth_pipeline(cfg, out)

print("density trace (one row per growth round):")
with open(out / "topology.csv") as fh:
    for row in csv.DictReader(fh):
        print(f"  rho={float(row['density']):.4f}  "
              f"total path weight={float(row['total_pwmp']):.3g}  "
              f"core ratio={float(row['avg_tau_core_ratio']):.3f}")

print(f"\nstopped by: {report['stopped_by']}")
if report["plateau_density"] is not None:
    print(f"final fitted plateau onset: rho = {report['plateau_density']:.4f}"
          "  (earlier fits abstained or predicted a later onset)")
print(f"stopping density:      rho = {report['stopping_density']:.4f}")
print(f"final val accuracy:    {report['final_val_acc']:.3f}")
print(f"cost vs dense training: {report['relative_cost']:.2f}x")

print(f"\nartifacts in {out}:")
for p in sorted(out.iterdir()):
    print(f"  {p.name}")
print("\nfirst growth event:")
event = json.loads((out / "events.jsonl").read_text().splitlines()[0])
print(f"  method={event['method']}, added {len(event['edges'])} edges, "
      f"e.g. {event['edges'][:4]}")
