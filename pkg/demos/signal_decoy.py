"""Why look-ahead helps on the signal/decoy design.

In Setting 3 the decoy block marks a subgroup of cases, but only once
several decoys carry weight together. Greedy stops as soon as no single
move helps. Look-ahead values each move by where greedy would finish
afterwards, so it will accept a step that lowers the training AUC for now.
"""

from __future__ import annotations

import numpy as np

from pointscore import SearchConfig, evaluate, fit
from pointscore.harness import replicate_samples

train, test = replicate_samples("s3", 400, replicate=3, test_n=5000)
names = train.data.predictor_names

for policy in ("greedy", "look_ahead"):
    result = fit(train.data, SearchConfig(policy=policy))
    chosen = [names[j] for j in np.flatnonzero(result.weights)]
    print(f"{policy}: test AUC {evaluate(test.data, result.weights):.4f}")
    print(f"  active: {', '.join(chosen)}")
    for r in result.trace:
        marker = "  (immediate loss)" if r.objective_after <= r.objective_before else ""
        print(f"  set {names[r.coordinate]:>8} -> {r.action}   train AUC {r.objective_after:.4f}{marker}")
