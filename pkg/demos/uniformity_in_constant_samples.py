"""
Uniformity with a sample count that ignores the domain size
===========================================================

A conditional oracle lets the tester ask for a sample restricted to any
subset of the domain. Drawing a handful of plain samples, adding as many
uniform indices, and then conditioning on that small union is enough to tell
uniform from far-from-uniform. The cost depends only on epsilon and delta.
"""

import numpy as np

from condsamp import AdaptiveParams, SimulatedOracle, halfheavy, test_near_uniformity, uniform
from condsamp.adaptive import near_uniformity_budget

params = AdaptiveParams(epsilon=0.3, delta=1 / 3)
print("closed-form cost:", near_uniformity_budget(params))

# The same number of samples at every domain size. The constants are large, but the
# simulated oracle draws counts in bulk, so billions of samples cost little.
for n in (10**3, 10**5, 10**7):
    v = test_near_uniformity(SimulatedOracle(uniform(n), seed=0), uniform(n), params, np.random.default_rng(0))
    print(f"n={n:>9}: {v.decision.value:6s} using {v.account.total} samples {dict(v.account.by_class)}")

# Acceptance rates over repeated runs.
trials = 100
for name, mu in (("uniform", uniform(1000)), ("halfheavy", halfheavy(1000))):
    accepted = sum(
        test_near_uniformity(SimulatedOracle(mu, seed=s), uniform(1000), params, np.random.default_rng(s)).accepted
        for s in range(trials)
    )
    print(f"{name:9s} accepted in {accepted}/{trials} runs")
