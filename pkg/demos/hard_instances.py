"""
Hard instances
==============

Uniblock distributions are uniform on a random set whose size is a power of
four (even) or twice a power of four (odd). Each one is far from uniform, and
an even draw is far from an odd draw after any relabeling. Telling the two
families apart still needs many samples, because a few samples rarely land
on the same element twice.

The string reduction turns bit queries into conditional samples: a balanced
string puts weight 3 on its ones and 1 on its zeros, and a rejection loop
samples from any conditioning set while reading only a few bits.
"""

from collections import Counter

import numpy as np

from condsamp import ReductionSampler, gen_uniblock, min_permutation_tv, tv_distance, uniform
from condsamp.adversarial import reduction_law

n = 2**16
for seed in range(3):
    even = gen_uniblock(n, "even", seed)
    odd = gen_uniblock(n, "odd", seed, k=even.k)
    print(
        f"k={even.k}: |U| {even.U.size} vs {odd.U.size}; "
        f"distance to uniform {tv_distance(even.dist, uniform(n)):.4f}; "
        f"even vs odd after relabeling {min_permutation_tv(even.dist, odd.dist):.2f}"
    )

rng = np.random.default_rng(0)
x = rng.integers(0, 2, 8)
Q = [0, 3, 9, 12, 15]
sampler = ReductionSampler(x, rng)
draws = Counter(sampler.sample(Q) for _ in range(20000))
print("x =", "".join(map(str, x)))
for i, p in reduction_law(x, Q).items():
    print(f"  element {i:2d}: target {p:.3f}, observed {draws[i] / 20000:.3f}")
print(f"bit queries per sample: {sampler.queries / sampler.emissions:.2f}")
