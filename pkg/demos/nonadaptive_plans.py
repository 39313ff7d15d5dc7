"""
Testing without adaptivity
==========================

A non-adaptive tester fixes every conditioning set before it sees a single
sample. The plan for near-uniformity draws random sets of growing size and
looks for repeated elements, and adds one small set on which it compares
empirical and known frequencies. Identity to a general distribution runs
such plans inside each bucket, and takes a majority vote per bucket.
"""

import numpy as np

from condsamp import RecordingOracle, SimulatedOracle, halfheavy, point_mass, uniform, zipf
from condsamp import test_identity_nonadaptive, test_near_uniformity_nonadaptive
from condsamp.nonadaptive import near_uniformity_layout, plan_identity

# Layout at a desk-sized scale: collision sets of sizes 2^j plus one small set.
n, eps, scale = 4096, 0.5, 2e-8
layout = near_uniformity_layout(n, eps, scale)
print(f"collision set sizes 2^{list(layout.j_range)}; small set of {layout.small_size} elements")

# The sets are the same whatever the unknown distribution; they are logged before any draw.
for name, mu in (("uniform", uniform(n)), ("halfheavy", halfheavy(n))):
    o = RecordingOracle(SimulatedOracle(mu, seed=0))
    v = test_near_uniformity_nonadaptive(o, uniform(n), eps, np.random.default_rng(5), scale=scale)
    built = v.trace[0]["built_ns"]
    print(f"{name:9s}: {len(o.log)} sets, plan sealed {o.first_draw_ns - built} ns before the first draw")

# Identity to a flat Zipf law on 32 elements, at full scale. Buckets holding one
# element need no sub-plan, since every distribution restricted to them agrees.
known = zipf(32, 0.3)
plan, info = plan_identity(known, 0.5, 1 / 3, np.random.default_rng(0))
sizes = [int(info["partition"].bucket(b).size) for b in info["buckets_tested"]]
print(f"identity plan: {len(plan.entries)} entries, {plan.total_samples:.3g} samples, bucket sizes {sizes}")
for name, unknown in (("same", known), ("point mass", point_mass(32, 0))):
    v = test_identity_nonadaptive(SimulatedOracle(unknown, seed=2), known, 0.5, 1 / 3, np.random.default_rng(2))
    print(f"{name:10s}: {v.decision.value}")
