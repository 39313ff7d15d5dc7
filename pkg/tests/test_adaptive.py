import math

import numpy as np
import pytest

from condsamp.adaptive import (
    AdaptiveParams,
    RecursionDepthError,
    amplification_count,
    amplify,
    brute_force_threshold,
    identity_primitive,
    identity_recursion_sizes,
    near_uniformity_budget,
    primitive_sample_count,
    test_identity_adaptive as identity_adaptive,
    test_near_uniformity as near_uniformity,
)
from condsamp.bucketing import bucket
from condsamp.core import (
    CONSTANT_SIZE,
    FULL_DOMAIN,
    Distribution,
    PreconditionError,
    RecordingOracle,
    SampleAccount,
    SimulatedOracle,
    halfheavy,
    log_star,
    point_mass,
    uniform,
    verdict,
    zipf,
)

from conftest import wilson_lower


def accept_rate(make_verdict, trials, seed=0):
    seeds = np.random.SeedSequence(seed).spawn(trials)
    return sum(make_verdict(np.random.default_rng(s)).accepted for s in seeds)


def oracle_for(mu, rng):
    return SimulatedOracle(mu, rng.integers(2**63))


class TestParams:
    @pytest.mark.parametrize("kw", [dict(epsilon=0, delta=0.1), dict(epsilon=0.1, delta=1), dict(epsilon=0.1, delta=0.1, scale=0), dict(epsilon=0.1, delta=0.1, mode="x")])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            AdaptiveParams(**kw)


class TestPrimitive:
    def test_accepts_identical(self):
        mu = uniform(4)
        acc = accept_rate(lambda r: identity_primitive(oracle_for(mu, r), mu, 0.5, 0.1), 200)
        assert acc >= 180

    def test_rejects_far(self):
        acc = accept_rate(lambda r: identity_primitive(oracle_for(point_mass(4, 0), r), uniform(4), 0.5, 0.1), 200)
        assert 200 - acc >= 180

    def test_singleton_domain(self):
        o = SimulatedOracle(uniform(1), 0)
        v = identity_primitive(o, uniform(1), 0.1, 0.1)
        assert v.accepted and v.account.total == 0

    def test_sample_counts(self):
        assert primitive_sample_count(4, 0.5, 0.1) == math.ceil(2 * (4 + math.log(20)) / 0.25)
        assert primitive_sample_count(4, 0.5, 0.1, mode="paper-faithful") == math.ceil(100 * math.log(10) * 4 * 16 * math.log(4))
        assert primitive_sample_count(4, 0.5, 0.1, scale=0.5) == math.ceil(2 * (4 + math.log(20)) / 0.25 / 2)

    def test_large_budget_mode(self):
        mu = zipf(5, 1)
        acc = accept_rate(lambda r: identity_primitive(oracle_for(mu, r), mu, 0.3, 0.1, mode="paper-faithful"), 30)
        assert acc == 30

    def test_domain_mismatch(self):
        with pytest.raises(PreconditionError):
            identity_primitive(SimulatedOracle(uniform(3), 0), uniform(4), 0.5, 0.1)


class TestNearUniformity:
    params = AdaptiveParams(0.3, 1 / 3)

    def test_accepts_uniform(self):
        acc = accept_rate(lambda r: near_uniformity(oracle_for(uniform(1000), r), uniform(1000), self.params, r), 300)
        assert acc >= 200

    def test_rejects_halfheavy(self):
        acc = accept_rate(lambda r: near_uniformity(oracle_for(halfheavy(1000), r), uniform(1000), self.params, r), 300)
        assert 300 - acc >= 200

    def test_sample_count_independent_of_n(self):
        totals, domains = set(), set()
        for n in (10**3, 10**5):
            v = near_uniformity(SimulatedOracle(uniform(n), 1), uniform(n), self.params, np.random.default_rng(1))
            totals.add(v.account.total)
            domains.add(v.trace[1]["samples"])
        assert totals == {near_uniformity_budget(self.params)}
        assert len(domains) == 1

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            near_uniformity(SimulatedOracle(zipf(10, 1), 0), zipf(10, 1), self.params, np.random.default_rng(0))

    def test_query_sets(self):
        o = RecordingOracle(SimulatedOracle(uniform(500), 3))
        v = near_uniformity(o, uniform(500), self.params, np.random.default_rng(3))
        k = math.ceil(6 / 0.3 * math.log(3))
        assert set(v.account.by_class) <= {FULL_DOMAIN, CONSTANT_SIZE}
        sets = o.sets()
        assert len(sets[0]) == 500 and len(sets) == 2 and len(sets[1]) <= 2 * k

    def test_halfheavy_arithmetic(self):
        # the unknown puts at least eps/2 mass on elements exceeding the known by eps/(2n)
        for n in (10, 100, 1000):
            for eps in (0.1, 0.3, 0.9):
                p, q = uniform(n).probs, halfheavy(n).probs
                heavy = q >= p + eps / (2 * n)
                assert q[heavy].sum() > eps / 2


class TestIdentity:
    def test_accepts_identical_zipf(self):
        mu = zipf(64, 1)
        p = AdaptiveParams(0.4, 1 / 3)
        acc = accept_rate(lambda r: identity_adaptive(oracle_for(mu, r), mu, p, r), 200)
        assert acc >= 2 / 3 * 200

    def test_rejects_point_mass(self):
        p = AdaptiveParams(0.4, 1 / 3)
        acc = accept_rate(lambda r: identity_adaptive(oracle_for(uniform(64), r), point_mass(64, 0), p, r), 200)
        assert 200 - acc >= 2 / 3 * 200

    def test_recursion_runs_at_desk_scale(self):
        n = 2**16
        p = AdaptiveParams(0.9, 1 / 3, recursion_threshold=20000)
        assert identity_recursion_sizes(n, p) == [n, 9865]
        for mu, known, expect in [
            (uniform(n), uniform(n), True),
            (halfheavy(n), uniform(n), False),
            (zipf(n, 1), zipf(n, 1), True),
            (uniform(n), zipf(n, 1), False),
        ]:
            o = RecordingOracle(SimulatedOracle(mu, 5))
            v = identity_adaptive(o, known, p, np.random.default_rng(5))
            assert v.accepted is expect
            phases = [t["phase"] for t in v.trace]
            assert phases[0] == "bucketing"
            part = bucket(known, 0.9 / (200 * log_star(n)))
            # every set is a union of buckets or lies inside one bucket
            for S in o.sets():
                labels = np.unique(part.labels[S])
                union = np.flatnonzero(np.isin(part.labels, labels))
                assert len(labels) == 1 or np.array_equal(np.sort(S), union)

    def test_zero_mass_bucket_rejects(self):
        known = Distribution([0.5, 0.5] + [0.0] * 62)
        p = AdaptiveParams(0.5, 1 / 3, recursion_threshold=10)
        v = identity_adaptive(SimulatedOracle(uniform(64), 0), known, p, np.random.default_rng(0))
        assert not v.accepted
        assert any(t["phase"] == "zero_mass_bucket" for t in v.trace)

    def test_depth_chain_two_pow_32(self):
        n = 2**32
        assert log_star(n) == 5
        for eps, override in [(0.4, 10**5), (0.9, 20000), (0.5, None)]:
            sizes = identity_recursion_sizes(n, AdaptiveParams(eps, 1 / 3, recursion_threshold=override))
            assert len(sizes) - 1 <= 2 * log_star(n)
        # the iterated-log chain itself
        chain, x = [], float(n)
        while x > 1:
            chain.append(x)
            x = math.log2(x)
        assert len(chain) == log_star(n) <= 10

    def test_depth_guard_fires(self):
        # the bucket count has a fixed point far above a tiny override, so descent cannot end
        with pytest.raises(RecursionDepthError):
            identity_recursion_sizes(2**32, AdaptiveParams(0.4, 1 / 3, recursion_threshold=20))
        with pytest.raises(RecursionDepthError):
            identity_adaptive(
                SimulatedOracle(uniform(2**12), 0),
                uniform(2**12),
                AdaptiveParams(0.9, 1 / 3, recursion_threshold=20, scale=1e-3),
                np.random.default_rng(0),
            )

    def test_threshold_formula(self):
        assert brute_force_threshold(0.5, 16) == pytest.approx((400 * math.log(2) / 0.5 * 3) ** 3)


class TestAmplify:
    def test_always_accept(self):
        v = amplify(lambda r: verdict(True, SampleAccount()), 0.05, np.random.default_rng(0))
        assert v.accepted

    def test_biased_coin(self):
        def inner(r):
            return verdict(r.random() < 2 / 3, SampleAccount())

        master = np.random.default_rng(1)
        wins = sum(amplify(inner, 0.05, r).accepted for r in master.spawn(400))
        assert wins >= 0.95 * 400

    def test_single_run(self):
        calls = []

        def inner(r):
            calls.append(1)
            return verdict(False, SampleAccount(), [{"tag": "inner"}])

        v = amplify(inner, 1 / 3, np.random.default_rng(0))
        assert calls == [1] and v.trace == [{"tag": "inner"}]
        amplify(inner, 0.01, np.random.default_rng(0), repetitions=1)
        assert len(calls) == 2

    def test_counts(self):
        assert amplification_count(0.05) == 301
        assert amplification_count(1 / 3) == 1
        assert amplification_count(0.1) % 2 == 1

    def test_accounts_add(self):
        o = SimulatedOracle(uniform(4), 0)
        v = amplify(lambda r: identity_primitive(o, uniform(4), 0.5, 0.1), 0.2, np.random.default_rng(0), repetitions=5)
        assert v.account.total == o.account.total == 5 * primitive_sample_count(4, 0.5, 0.1)
