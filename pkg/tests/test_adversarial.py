from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condsamp.adversarial import (
    EVEN,
    ODD,
    ReductionFailed,
    ReductionSampler,
    balanced_extend,
    gen_uniblock,
    hamming,
    parse_bits,
    reduction_law,
    string_distribution,
    u_distribution,
    uniblock_k_range,
)
from condsamp.core import PreconditionError, tv_distance, uniform
from condsamp.learner import min_permutation_tv

from conftest import wilson_lower, wilson_upper


class TestUDistribution:
    def test_full(self):
        assert np.allclose(u_distribution(range(5), 5).probs, 0.2)

    def test_single(self):
        assert u_distribution([0], 4).probs.tolist() == [1, 0, 0, 0]

    def test_empty(self):
        with pytest.raises((PreconditionError, ValueError)):
            u_distribution([], 4)

    @given(st.integers(1, 200), st.integers(0, 2**32 - 1))
    def test_distance_to_uniform(self, n, seed):
        rng = np.random.default_rng(seed)
        U = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        d = tv_distance(u_distribution(U, n), uniform(n))
        assert d == pytest.approx(1 - len(U) / n, abs=1e-12)


class TestUniblock:
    def test_k_range(self):
        assert list(uniblock_k_range(2**16)) == [2, 3, 4, 5, 6]

    def test_sizes(self):
        sizes = {gen_uniblock(2**16, EVEN, s).U.size for s in range(200)}
        assert sizes == {16, 64, 256, 1024, 4096}
        assert {gen_uniblock(2**16, ODD, s).U.size for s in range(200)} == {32, 128, 512, 2048, 8192}

    @pytest.mark.parametrize("n", [100, 128, 2**7])
    def test_precondition(self, n):
        with pytest.raises(PreconditionError):
            gen_uniblock(n, EVEN, 0)

    def test_fixed_k(self):
        d = gen_uniblock(2**8, ODD, 0, k=1)
        assert d.k == 1 and d.U.size == 8
        with pytest.raises(PreconditionError):
            gen_uniblock(2**8, ODD, 0, k=4)

    def test_seeded(self):
        assert np.array_equal(gen_uniblock(2**10, EVEN, 5).U, gen_uniblock(2**10, EVEN, 5).U)

    def test_bad_parity(self):
        with pytest.raises(ValueError):
            gen_uniblock(2**8, "neither", 0)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([EVEN, ODD]), st.sampled_from([8, 12, 16]))
    def test_far_from_uniform(self, seed, parity, log_n):
        n = 2**log_n
        d = gen_uniblock(n, parity, seed)
        assert np.all(np.isin(d.dist.probs, [0.0, 1 / d.U.size]))
        assert tv_distance(d.dist, uniform(n)) == pytest.approx(1 - d.U.size / n, abs=1e-12)
        # |U| <= 4^k <= n^(3/4), doubled for odd parity
        factor = 1 if parity == EVEN else 2
        assert 1 - d.U.size / n >= 1 - factor * n**-0.25 >= 0.5

    @given(st.integers(0, 2**32 - 1))
    def test_even_odd_far(self, seed):
        n = 2**16
        e = gen_uniblock(n, EVEN, seed)
        o = gen_uniblock(n, ODD, seed + 1, k=e.k)
        assert min_permutation_tv(e.dist, o.dist) == pytest.approx(0.5)

    def test_subset_uniform(self):
        # every element is equally likely to land in U
        hits = np.zeros(2**8)
        for s in range(4000):
            hits[gen_uniblock(2**8, EVEN, s, k=1).U] += 1
        assert np.abs(hits / 4000 - 4 / 256).max() < 0.01


class TestStrings:
    def test_extend(self):
        assert balanced_extend("01").tolist() == [0, 1, 1, 0]
        assert balanced_extend("00").tolist() == [0, 0, 1, 1]

    def test_parse(self):
        with pytest.raises(ValueError):
            parse_bits("012")

    @given(st.lists(st.booleans(), min_size=16, max_size=16), st.lists(st.booleans(), min_size=16, max_size=16))
    def test_hamming_doubles(self, x, y):
        x, y = np.array(x, dtype=int), np.array(y, dtype=int)
        assert hamming(balanced_extend(x), balanced_extend(y)) == 2 * hamming(x, y)

    def test_distribution(self):
        assert string_distribution("0011").probs.tolist() == [1 / 8, 1 / 8, 3 / 8, 3 / 8]

    def test_unbalanced(self):
        with pytest.raises(PreconditionError):
            string_distribution("1111")

    @given(st.lists(st.booleans(), min_size=1, max_size=40), st.integers(0, 2**32 - 1))
    def test_distance_link(self, x, seed):
        x = np.array(x, dtype=int)
        y = np.random.default_rng(seed).integers(0, 2, x.size)
        bx, by = balanced_extend(x), balanced_extend(y)
        d = tv_distance(string_distribution(bx), string_distribution(by))
        assert hamming(bx, by) == pytest.approx(2 * bx.size * d)
        assert string_distribution(bx).probs.sum() == pytest.approx(1, abs=1e-15)


class TestReduction:
    def test_two_point_law(self):
        # x = 1 gives b = 10: index 0 has bit 1, index 1 has bit 0
        assert reduction_law("1", [0, 1]) == {0: 0.75, 1: 0.25}
        rs = ReductionSampler("1", np.random.default_rng(0))
        c = Counter(rs.sample([0, 1]) for _ in range(20000))
        assert abs(c[0] / 20000 - 0.75) < 0.015

    def test_all_ones(self):
        rs = ReductionSampler("1100", np.random.default_rng(0))
        out = Counter()
        for _ in range(4000):
            before = rs.queries
            out[rs.sample([0, 1, 6, 7])] += 1
            assert rs.queries - before == 1
        assert set(out) == {0, 1, 6, 7}
        assert max(out.values()) / 4000 - 0.25 < 0.03

    def test_budget(self):
        rs = ReductionSampler("0000", np.random.default_rng(0), budget=5)
        with pytest.raises(ReductionFailed):
            for _ in range(100):
                rs.sample([0, 1, 2, 3])
        assert rs.queries == 5

    @pytest.mark.parametrize("seed", range(5))
    def test_law_matches(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.integers(0, 2, 16)
        Q = np.sort(rng.choice(32, size=int(rng.integers(1, 9)), replace=False))
        law = reduction_law(x, Q)
        mu = string_distribution(balanced_extend(x)).probs[Q]
        assert law == pytest.approx(dict(zip(Q.tolist(), (mu / mu.sum()).tolist())))
        rs = ReductionSampler(x, rng)
        draws = 20000
        c = Counter(rs.sample(Q) for _ in range(draws))
        assert 0.5 * sum(abs(c[i] / draws - p) for i, p in law.items()) <= 0.02

    def test_worst_case_queries(self):
        # every index reads 0: each round emits with probability exactly 1/3
        rs = ReductionSampler("0000", np.random.default_rng(1))
        for _ in range(20000):
            rs.sample([0, 1, 2, 3])
        assert wilson_upper(rs.emissions, rs.queries) >= 1 / 3
        assert wilson_lower(rs.emissions, rs.queries) <= 1 / 3 + 0.02
