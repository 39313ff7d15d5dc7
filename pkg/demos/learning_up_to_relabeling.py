"""
Learning a distribution up to relabeling
========================================

Conditioning on dyadic intervals reveals, for each node of a binary tree over
the domain, how its mass splits between the two halves. Multiplying the
splits along a root-to-leaf path gives that leaf's probability. A sampler
built on these estimates returns samples together with their probabilities.
Snapping those probabilities to a geometric grid and counting how often each
grid level appears recovers the sorted shape of the distribution.
"""

import numpy as np

from condsamp import (
    Distribution,
    SimulatedOracle,
    exact_alpha,
    halfheavy,
    learn_distribution,
    min_permutation_tv,
    reconstitute,
    trim_exact,
    uniform,
    zipf,
)
from condsamp.learner import learn_sample_count, uniformity_distance
from condsamp.sampler import PersistentSampler

# With exact splits the tree reproduces the distribution.
mu = Distribution([0.5, 0.25, 0.125, 0.125])
alpha = exact_alpha(mu)
print("splits:", alpha[1:], "-> leaves:", reconstitute(alpha))

# Snapping to the grid keeps each probability within a factor (1 + eps).
t = trim_exact(zipf(16, 1.0), [], 0.2)
print(f"grid snap leaves {t.sentinel:.3f} of the mass unassigned")

# Full learner on 64 elements, scaled so a run takes about 1e5 grid samples
# and roughly 166 draws per tree node.
n, eps, delta = 64, 0.6, 1 / 3
scale = 1e5 / learn_sample_count(n, eps, delta) * 0.999
s = learn_sample_count(n, eps, delta, scale)
t_node = PersistentSampler(SimulatedOracle(uniform(n), 0), eps / 12, delta / 2, s, None).t_node
for name, target in (("uniform", uniform(n)), ("zipf", zipf(n, 1.0)), ("halfheavy", halfheavy(n))):
    res = learn_distribution(
        SimulatedOracle(target, seed=3), eps, delta, np.random.default_rng(3), scale=scale, estimator_scale=166 / t_node
    )
    print(
        f"{name:9s}: sorted distance {min_permutation_tv(res.dist, target):.3f}, "
        f"learned distance to uniform {uniformity_distance(res.dist):.3f}, "
        f"{res.account.total} conditional samples"
    )
