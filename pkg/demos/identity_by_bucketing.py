"""
Identity to an arbitrary known distribution
===========================================

Bucketing groups elements whose known probabilities lie within a factor
(1 + eps) of each other. Inside a bucket the known distribution is nearly
uniform, so the near-uniformity tester applies there. The coarse distribution
over buckets is then tested the same way, recursively, on a much smaller
domain. The recursion depth grows like log* n.
"""

import numpy as np

from condsamp import AdaptiveParams, SimulatedOracle, bucket, test_identity_adaptive, zipf
from condsamp.adaptive import identity_recursion_sizes

mu = zipf(2**16, 1.0)
part = bucket(mu, 0.1)
sizes = part.sizes()
print(f"{np.count_nonzero(sizes)} non-empty buckets out of {part.k + 1}; largest holds {sizes.max()} elements")

# Domain sizes along the recursion. The override lowers the brute-force cutoff
# so the recursion is visible at desk scale.
params = AdaptiveParams(epsilon=0.9, delta=1 / 3, recursion_threshold=20000)
print("recursion domain sizes:", identity_recursion_sizes(2**16, params))

# The same known distribution against itself and against a slightly flattened copy.
flat = zipf(2**16, 0.6)
for name, unknown in (("identical", mu), ("flattened", flat)):
    v = test_identity_adaptive(SimulatedOracle(unknown, seed=1), mu, params, np.random.default_rng(1))
    phases = [step["phase"] for step in v.trace]
    print(f"{name:9s}: {v.decision.value:6s} after {v.account.total:.3g} samples; phases {sorted(set(phases))}")
