import math

import numpy as np
import pytest

from condsamp.adaptive import AdaptiveParams, near_uniformity_budget
from condsamp.core import (
    FULL_DOMAIN,
    GENERAL,
    PreconditionError,
    RecordingOracle,
    SimulatedOracle,
    halfheavy,
    point_mass,
    uniform,
    zipf,
)
from condsamp.nonadaptive import (
    COLLISION,
    NonAdaptivePlan,
    PlanEntry,
    _decide,
    execute_plan,
    collision_bounds,
    near_uniformity_layout,
    plan_identity,
    plan_near_uniformity,
    test_identity_nonadaptive as identity_nonadaptive,
    test_near_uniformity_nonadaptive as near_uniformity_nonadaptive,
)

from conftest import wilson_lower


def rate(fn, trials, seed=0):
    return sum(fn(np.random.default_rng(s)).accepted for s in np.random.SeedSequence(seed).spawn(trials))


class TestLayout:
    def test_degenerate_small_n(self):
        lay = near_uniformity_layout(64, 0.5)
        assert len(lay.j_range) == 0 and lay.small_size == 64

    def test_formulas(self):
        n, eps, c = 4096, 0.5, 2e-8
        lay = near_uniformity_layout(n, eps, c)
        ln = math.log(n)
        assert lay.j_range.start == math.ceil(math.log2(c * 2000 * eps**-6 * ln**5))
        assert lay.j_range.stop - 1 == 12
        assert lay.per_set == math.ceil(c * 64 * eps**-2 * ln**2)
        assert lay.small_size == math.ceil(c * 9000 * eps**-6 * ln**5)
        assert lay.small_eps == pytest.approx(eps / (24 * lay.small_size))

    def test_collision_bound_arithmetic(self):
        # both readings of the union bound stay below 1/9 once the collision sets exist
        for n, eps in [(2**60, 0.5), (2**80, 0.3), (2**120, 0.9)]:
            assert len(near_uniformity_layout(n, eps).j_range) > 0
            printed, pairwise = collision_bounds(n, eps)
            assert printed < 1 / 9 and pairwise < 1 / 9

    def test_collision_rate_matches_pairwise_bound(self):
        # empirical collision frequency for s draws from a uniform set of size m
        rng = np.random.default_rng(0)
        s, m, trials = 12, 512, 20000
        hits = sum(len(set(rng.integers(0, m, s))) < s for _ in range(trials))
        assert hits / trials <= math.comb(s, 2) / m


class TestNearUniformityNonadaptive:
    def test_accepts_uniform_degenerate(self):
        acc = rate(lambda r: near_uniformity_nonadaptive(SimulatedOracle(uniform(64), r.integers(2**63)), uniform(64), 0.5, r), 200)
        assert acc >= 2 / 3 * 200

    def test_rejects_halfheavy(self):
        acc = rate(lambda r: near_uniformity_nonadaptive(SimulatedOracle(halfheavy(64), r.integers(2**63)), uniform(64), 0.5, r), 200)
        assert 200 - acc >= 2 / 3 * 200

    def test_collision_entries(self):
        # per-set counts are 1 at desk scale, so exercise the collision rule on hand-built entries
        n = 4096
        rng = np.random.default_rng(0)
        U = np.sort(rng.choice(n, 2048, replace=False))
        plan = NonAdaptivePlan(n, [PlanEntry(U, 4, COLLISION, (11,))]).seal()
        rejects = {}
        for name, mu in (("uniform", uniform(n)), ("concentrated", point_mass(n, int(U[0])))):
            o = SimulatedOracle(mu, 1)
            counts = execute_plan(o, plan)
            rejects[name] = not _decide(plan.entries, counts, uniform(n))
        assert rejects == {"uniform": False, "concentrated": True}

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            near_uniformity_nonadaptive(SimulatedOracle(zipf(8, 1), 0), zipf(8, 1), 0.5, np.random.default_rng(0))

    def test_plan_independent_of_distribution(self):
        a = plan_near_uniformity(4096, 0.5, np.random.default_rng(9), 2e-8)
        b = plan_near_uniformity(4096, 0.5, np.random.default_rng(9), 2e-8)
        assert a.fingerprint() == b.fingerprint()
        logs = []
        for mu in (uniform(4096), halfheavy(4096)):
            o = RecordingOracle(SimulatedOracle(mu, 1))
            near_uniformity_nonadaptive(o, uniform(4096), 0.5, np.random.default_rng(9), scale=2e-8)
            logs.append(b"".join(np.asarray(S).tobytes() for S in o.sets()))
        assert logs[0] == logs[1]

    def test_sets_declared_before_first_draw(self):
        o = RecordingOracle(SimulatedOracle(uniform(4096), 1))
        v = near_uniformity_nonadaptive(o, uniform(4096), 0.5, np.random.default_rng(2), scale=2e-8)
        assert v.trace[0]["built_ns"] <= o.first_draw_ns
        assert set(v.account.by_class) <= {GENERAL, FULL_DOMAIN}
        assert v.account.by_class[GENERAL] > 0


class TestIdentityNonadaptive:
    def test_accepts_zipf(self):
        mu, delta = zipf(32, 1), 1 / 3
        acc = rate(lambda r: identity_nonadaptive(SimulatedOracle(mu, r.integers(2**63)), mu, 0.5, delta, r), 200)
        assert wilson_lower(acc, 200) >= 1 - delta - 0.1

    def test_rejects_point_mass(self):
        delta = 1 / 3
        acc = rate(lambda r: identity_nonadaptive(SimulatedOracle(uniform(32), r.integers(2**63)), point_mass(32, 0), 0.5, delta, r), 200)
        assert wilson_lower(200 - acc, 200) >= 1 - delta - 0.1

    def test_bucket_invocations(self):
        for mu in (zipf(32, 1), zipf(200, 0.5), uniform(50)):
            _, info = plan_identity(mu, 0.5, 0.1, np.random.default_rng(0), repetitions=1)
            assert len(info["buckets_tested"]) <= math.ceil(math.log(mu.n) / math.log1p(0.5 / 8))

    def test_rejects_inside_bucket(self):
        # known is uniform (one bucket); the unknown differs only inside it
        n = 64
        v = identity_nonadaptive(SimulatedOracle(halfheavy(n), 0), uniform(n), 0.5, 0.2, np.random.default_rng(0), repetitions=3)
        assert not v.accepted
        assert v.trace[0]["failed_buckets"] == [1]

    def test_sets_declared_before_first_draw(self):
        n = 2**12
        mu = zipf(n, 0.3)
        o = RecordingOracle(SimulatedOracle(mu, 0))
        v = identity_nonadaptive(o, mu, 0.5, 0.2, np.random.default_rng(0), scale=1e-6, repetitions=3)
        assert v.trace[0]["built_ns"] <= o.first_draw_ns
        plan, _ = plan_identity(mu, 0.5, 0.2, np.random.default_rng(0), scale=1e-6, repetitions=3)
        assert [np.asarray(S).tolist() for S in o.sets()] == [e.elements.tolist() for e in plan.entries if e.count]

    def test_more_samples_than_adaptive(self):
        n, eps = 1000, 0.3
        plan, _ = plan_identity(uniform(n), eps, 1 / 3, np.random.default_rng(0), repetitions=1)
        lay = near_uniformity_layout(n, eps)
        assert lay.small_samples > near_uniformity_budget(AdaptiveParams(eps, 1 / 3))
