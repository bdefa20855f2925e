"""Fit integer point scores on simulated data and compare them on held-out rows.

Run with ``python demos/fit_and_evaluate.py``.
"""

from __future__ import annotations

from pointscore import ActionSet, SearchConfig, baseline_fit, evaluate, fit, generate, SimConfig, train_test_split
from pointscore.harness import score_curve

sample = generate(SimConfig("s1", 1000, seed=11))
train, test = train_test_split(sample, 0.6, seed=0)
print(f"training rows {train.n} (cases {train.n1}), test rows {test.n}")

# Scores with weights in {0, 1, 2}, found by three search policies.
for policy in ("greedy", "local_step", "look_ahead"):
    result = fit(train, SearchConfig(action_set=ActionSet(2), policy=policy))
    active = {k: v for k, v in result.weight_map().items() if v}
    print(f"{policy:>12}: train {result.train_objective:.4f}  test {evaluate(test, result.weights):.4f}  "
          f"steps {result.iterations}  weights {active}")

# The classical route: logistic regression, then a tuned rounding scale.
base = baseline_fit(train)
print(f"{'rounding':>12}: train {base.train_objective:.4f}  test {evaluate(test, base.weights):.4f}  "
      f"delta {base.extras['delta']:.3f}  fallback {base.extras['penalized_fallback']}")

# Observed event rate at each score value of the greedy score on the test rows.
greedy = fit(train, SearchConfig(action_set=ActionSet(2)))
print("\nscore  count  event rate")
for row in score_curve(test, greedy.weights):
    print(f"{row['score']:>5}  {row['count']:>5}  {row['rate']:.3f}")
