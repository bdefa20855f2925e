"""A small replicated simulation study (20 replicates per cell).

The acceptance suite runs the same harness at 100 replicates.
"""

from __future__ import annotations

from pointscore import ExperimentSpec, run_experiment

for setting in ("s1", "s2", "s3"):
    spec = ExperimentSpec(setting, n_values=(100, 400), replicates=20, test_n=2000)
    table = run_experiment(spec)
    print(f"\n{setting}")
    for row in table.summary():
        print(f"  n={row['n']:>3}  {row['method']:<22} {row['mean']:.4f} ({row['sd']:.4f})")
