"""Learn a Bayesian rule set with simulated annealing and read its output.

Plants a composition rule in 78-variable space, learns a rule set, and
walks through prediction, fired rules, and per-condition slacks (the
boundary-proximity signal the UI surfaces).
"""

import numpy as np

from cytorules.brs import SaSchedule, evaluate, learn, log_posterior, predict

rng = np.random.default_rng(3)
n = 300
x = rng.uniform(0.0, 0.2, size=(n, 78))
# positives: sector 6 dominates sector 11 by a clear margin
ratio_col = 61  # D6/D11
x[: n // 2, ratio_col] = rng.uniform(0.2, 1.2, size=n // 2)
x[n // 2 :, ratio_col] = rng.uniform(1.8, 4.0, size=n - n // 2)
y = (x[:, ratio_col] > 1.5).astype(float)

ruleset = learn(x, y, schedule=SaSchedule(iterations=4000, seed=3))
print("learned rule set:")
print("  " + ruleset.render().replace("\n", "\n  "))
print(f"log posterior: {log_posterior(ruleset, x, y):.2f}")

covered = np.zeros(n, dtype=bool)
for rule in ruleset.rules:
    covered |= rule.holds(x)
print(f"training accuracy: {np.mean(covered == (y > 0.5)):.3f}")

sample = x[-1]
label, fired, detail = predict(ruleset, sample)
print(f"\none slide -> predicted {label.name}; fired rules {[i + 1 for i in fired]}")
for rule_detail in detail:
    for cond in rule_detail:
        state = "ok " if cond["satisfied"] else "no "
        print(f"  [{state}] {cond['condition']}  slack {cond['slack']:+.3f}")

is_pos, fired = evaluate(ruleset, sample)
assert is_pos == (label.name == "CLASS2")
