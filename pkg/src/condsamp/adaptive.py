"""Adaptive uniformity and identity testers.

All logarithms in sample-count formulas are natural logs; ``log*`` is the
iterated base-2 logarithm. ``scale`` multiplies every sample-count formula so
that reduced-budget runs follow the same control flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .bucketing import bucket, bucket_count, coarsen, coarsened_oracle, restrict, restricted_oracle
from .core import (
    CondOracle,
    Distribution,
    PreconditionError,
    SampleAccount,
    Verdict,
    linf_distance,
    log_star,
    spawn,
    uniform,
    verdict,
)

EMPIRICAL = "empirical"
PAPER_FAITHFUL = "paper-faithful"
MODES = (EMPIRICAL, PAPER_FAITHFUL)


class RecursionDepthError(RuntimeError):
    pass


@dataclass(frozen=True)
class AdaptiveParams:
    epsilon: float
    delta: float
    scale: float = 1.0
    recursion_threshold: int | None = None
    mode: str = EMPIRICAL

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


def primitive_sample_count(size: int, eps: float, delta: float, scale: float = 1.0, mode: str = EMPIRICAL) -> int:
    if size <= 1:
        return 0
    if mode == EMPIRICAL:
        return math.ceil(scale * 2.0 * (size + math.log(2.0 / delta)) / eps**2)
    return math.ceil(scale * 100.0 * math.log(1.0 / delta) * eps**-2 * size**2 * math.log(size))


def identity_primitive(
    o: CondOracle,
    mu_known: Distribution,
    eps: float,
    delta: float,
    *,
    scale: float = 1.0,
    mode: str = EMPIRICAL,
    support_bound: int | None = None,
) -> Verdict:
    """Brute-force identity test: learn the empirical distribution and compare.

    Draws ``m`` samples over the whole domain of ``o`` and accepts iff the
    empirical distribution is within ``eps/2`` of ``mu_known``. In empirical
    mode ``m = 2(|D| + ln(2/delta)) / eps^2``, enough for the empirical
    distribution to be ``eps/2``-close with probability ``1 - delta``.
    ``support_bound`` replaces ``|D|`` in the count when a caller wants a
    budget independent of the realized domain.
    """
    if o.n != mu_known.n:
        raise PreconditionError("oracle and known distribution have different domains")
    before = o.account.copy()
    if o.n == 1:
        return verdict(True, o.account - before)
    size = o.n if support_bound is None else max(support_bound, o.n)
    m = primitive_sample_count(size, eps, delta, scale, mode)
    counts = o.draw_counts(None, m)
    dist = 0.5 * float(np.abs(counts / m - mu_known.probs).sum())
    trace = [{"phase": "primitive", "domain": o.n, "samples": m, "empirical_tv": dist}]
    return verdict(dist <= eps / 2, o.account - before, trace)


def near_uniformity_sample_size(eps: float, delta: float, scale: float = 1.0) -> int:
    return math.ceil(scale * (6.0 / eps) * math.log(1.0 / delta))


def near_uniformity_budget(params: AdaptiveParams) -> int:
    """Closed-form total sample count of :func:`test_near_uniformity`; it does not depend on n."""
    k = near_uniformity_sample_size(params.epsilon, params.delta, params.scale)
    inner_eps = params.epsilon**2 / (600.0 * math.log(1.0 / params.delta))
    return k + primitive_sample_count(2 * k, inner_eps, params.delta / 3, params.scale, params.mode)


def is_near_uniform(mu: Distribution, eps: float, factor: float = 100.0) -> bool:
    return linf_distance(mu, uniform(mu.n)) < eps / (factor * mu.n)


def test_near_uniformity(
    o: CondOracle,
    mu_known: Distribution,
    params: AdaptiveParams,
    rng: np.random.Generator,
) -> Verdict:
    """Identity to a known distribution that is very close to uniform.

    Takes ``k = (6/eps) ln(1/delta)`` unconditioned samples ``S`` and ``k``
    uniform indices ``U``, then runs the primitive on the restriction to
    ``S | U`` with distance ``eps^2 / (600 ln(1/delta))``.
    """
    eps, delta = params.epsilon, params.delta
    n = mu_known.n
    if o.n != n:
        raise PreconditionError("oracle and known distribution have different domains")
    if not is_near_uniform(mu_known, eps):
        raise PreconditionError("known distribution is not within eps/(100 n) of uniform in l-infinity")
    before = o.account.copy()
    k = near_uniformity_sample_size(eps, delta, params.scale)
    S = o.draw_many(None, k)
    U = rng.integers(0, n, size=k)
    D = np.unique(np.concatenate([S, U]))
    inner_eps = eps**2 / (600.0 * math.log(1.0 / delta))
    v = identity_primitive(
        restricted_oracle(o, D),
        restrict(mu_known, D).dist,
        inner_eps,
        delta / 3,
        scale=params.scale,
        mode=params.mode,
        support_bound=2 * k,
    )
    trace = [{"phase": "near_uniformity", "k": k, "domain": int(D.size)}] + (v.trace or [])
    return verdict(v.accepted, o.account - before, trace)


def brute_force_threshold(eps: float, m: int) -> float:
    return (400.0 * math.log(1.0 / eps) / eps * max(1, log_star(m))) ** 3


def identity_recursion_sizes(n: int, params: AdaptiveParams) -> list[int]:
    """Domain sizes visited by the adaptive identity test, assuming every bucket is used.

    Each level replaces ``n`` by the bucket count ``k + 1``; the list ends at the
    first size handled by brute force. Raises if the chain exceeds ``2 log* n``.
    """
    m = n
    eps = params.epsilon
    ls = max(1, log_star(m))
    sizes = [n]
    threshold = params.recursion_threshold
    while True:
        limit = brute_force_threshold(eps, m) if threshold is None else threshold
        if n <= limit or ls <= 1:
            return sizes
        if len(sizes) > 2 * log_star(m):
            raise RecursionDepthError(f"recursion deeper than 2 log*({m}) levels: {sizes}")
        n = bucket_count(n, eps / (200.0 * ls)) + 1
        eps = eps * (1.0 - 1.0 / ls)
        sizes.append(n)


def test_identity_adaptive(
    o: CondOracle,
    mu_known: Distribution,
    params: AdaptiveParams,
    rng: np.random.Generator,
    m: int | None = None,
    *,
    _depth: int = 0,
) -> Verdict:
    """Recursive identity test against an arbitrary known distribution.

    Buckets ``mu_known``, tests the restriction to every bucket hit by a few
    unconditioned samples for near-uniformity, then recurses on the coarsened
    distribution. Small domains go to the brute-force primitive.
    """
    n = mu_known.n
    if o.n != n:
        raise PreconditionError("oracle and known distribution have different domains")
    m = n if m is None else m
    if _depth == 0 and m < n:
        # deeper levels may see a coarsened domain larger than m
        raise PreconditionError("original domain size m must be at least n")
    eps, delta, c = params.epsilon, params.delta, params.scale
    ls = max(1, log_star(m))
    before = o.account.copy()
    trace: list[dict] = []

    limit = brute_force_threshold(eps, m) if params.recursion_threshold is None else params.recursion_threshold
    if n <= limit or ls <= 1:
        v = identity_primitive(o, mu_known, eps, delta, scale=c, mode=params.mode)
        trace.append({"phase": "brute_force", "depth": _depth, "n": n})
        return verdict(v.accepted, o.account - before, trace + (v.trace or []))

    part = bucket(mu_known, eps / (200.0 * ls))
    r = math.ceil(c * 4.0 / eps * ls * math.log(1.0 / delta))
    hits = o.draw_many(None, r)
    hit_buckets = np.unique(part.labels[hits])
    trace.append({"phase": "bucketing", "depth": _depth, "n": n, "k": part.k, "hit_buckets": hit_buckets.tolist()})

    sub = replace(
        params,
        epsilon=eps / (2.0 * ls),
        delta=min(delta * eps / (12.0 * ls * math.log(1.0 / delta)), 0.5),
    )
    for b in hit_buckets:
        M = part.bucket(int(b))
        if mu_known.probs[M].sum() <= 0:
            # the unknown distribution put mass where the known one has none
            trace.append({"phase": "zero_mass_bucket", "depth": _depth, "bucket": int(b)})
            return verdict(False, o.account - before, trace)
        known = restrict(mu_known, M).dist
        sub_o = restricted_oracle(o, M)
        if is_near_uniform(known, sub.epsilon):
            v = test_near_uniformity(sub_o, known, sub, rng)
        else:
            v = identity_primitive(sub_o, known, sub.epsilon, sub.delta, scale=c, mode=params.mode)
        trace.append({"phase": "bucket_test", "depth": _depth, "bucket": int(b), "accepted": v.accepted})
        if not v.accepted:
            return verdict(False, o.account - before, trace)

    if _depth + 1 > 2 * log_star(m):
        raise RecursionDepthError(f"recursion would exceed 2 log*({m}) levels")
    deeper = replace(params, epsilon=eps * (1.0 - 1.0 / ls), delta=delta / 3.0)
    v = test_identity_adaptive(
        coarsened_oracle(o, part), coarsen(mu_known, part), deeper, rng, m, _depth=_depth + 1
    )
    return verdict(v.accepted, o.account - before, trace + (v.trace or []))


def amplification_count(delta: float) -> int:
    if delta >= 1.0 / 3.0:
        return 1
    reps = math.ceil(100.0 * math.log(1.0 / delta))
    return reps + 1 - reps % 2


def amplify(
    tester: Callable[[np.random.Generator], Verdict],
    delta: float,
    rng: np.random.Generator,
    *,
    repetitions: int | None = None,
) -> Verdict:
    """Majority vote over independent runs of a tester with error 1/3.

    Runs ``ceil(100 ln(1/delta))`` times (rounded up to odd); for
    ``delta >= 1/3`` or ``repetitions <= 1`` the single inner verdict is
    returned unchanged.
    """
    reps = amplification_count(delta) if repetitions is None else repetitions
    if reps <= 1:
        return tester(rng)
    account = SampleAccount()
    accepts = 0
    for child in spawn(rng, reps):
        v = tester(child)
        account = account + v.account
        accepts += v.accepted
    return verdict(2 * accepts > reps, account, [{"phase": "amplify", "runs": reps, "accepts": accepts}])
