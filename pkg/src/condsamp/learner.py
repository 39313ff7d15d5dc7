"""Learning a distribution up to relabeling, and testers built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bucketing import bucket_count_prime, grid_value
from .core import (
    CondOracle,
    Distribution,
    DomainMismatchError,
    PreconditionError,
    SampleAccount,
    Verdict,
    spawn,
    tv_distance,
    uniform,
    verdict,
)
from .sampler import TRIMMED, TrimmingSampler

GRID = "grid"
LITERAL = "literal"


@dataclass(frozen=True)
class GridCounts:
    eps: float
    n: int
    m: np.ndarray
    failed: bool = False

    @property
    def k(self) -> int:
        return self.m.size - 1


@dataclass
class LearnResult:
    dist: Distribution
    counts: GridCounts
    account: SampleAccount = field(default_factory=SampleAccount)
    uniform_fallback: bool = False
    samples: int = 0
    trimmed: int = 0


def grid_cap(n: int, eps: float) -> int:
    """Smallest ``i`` with ``(1+eps)^i eps / n >= 1``: the last grid index a probability can reach."""
    return max(1, math.ceil(math.log(n / eps) / math.log1p(eps) - 1e-9))


def grid_size(n: int, eps: float) -> int:
    return max(bucket_count_prime(n, eps), grid_cap(n, eps))


def tentative_distribution(counts: GridCounts | np.ndarray, n: int | None = None, eps: float | None = None) -> Distribution:
    """``m_j`` copies of ``(1+eps)^(j-1) eps / n`` for ``j >= 1`` and ``m_0`` zeros, normalized.

    Entries are laid out by ascending ``j``, zeros first. All-zero input gives
    the uniform distribution.
    """
    if isinstance(counts, GridCounts):
        m, n, eps = counts.m, counts.n if n is None else n, counts.eps if eps is None else eps
    else:
        m = np.asarray(counts, dtype=np.int64)
        if n is None or eps is None:
            raise ValueError("n and eps are required with a raw count vector")
    if np.any(m < 0) or int(m.sum()) != n:
        raise PreconditionError(f"counts must be non-negative and sum to n={n}")
    r = np.repeat(np.concatenate([[0.0], grid_value(np.arange(1, m.size), n, eps, eps)]), m)
    total = r.sum()
    if total <= 0:
        return uniform(n)
    return Distribution(r / total)


def bucketize(alpha, n: int, eps: float, k: int | None = None, *, mode: str = GRID) -> GridCounts:
    """Round grid-bucket masses ``alpha_0..alpha_K`` to counts summing to ``n``.

    ``mode="grid"`` estimates ``m_j`` as ``alpha_j`` divided by the grid value
    of bucket ``j``, which is the count consistent with the tentative
    distribution. ``mode="literal"`` uses ``n * alpha_j``. Exact halves round
    down; excess is removed from the smallest positive indices first, and the
    result is marked failed if that touches a bucket with grid value at least
    ``eps / k`` (``k`` defaults to ``len(alpha) - 1``).
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
        raise PreconditionError("alpha must be a probability vector")
    K = a.size - 1
    k = K if k is None else k
    j = np.arange(1, K + 1)
    g = grid_value(j, n, eps, eps)
    x = a[1:] / g if mode == GRID else n * a[1:]
    m = np.maximum(np.ceil(x - 0.5 - 1e-9), 0).astype(np.int64)
    excess = int(m.sum()) - n
    failed = False
    for idx in range(K):
        if excess <= 0:
            break
        if m[idx] == 0:
            continue
        take = min(int(m[idx]), excess)
        m[idx] -= take
        excess -= take
        if g[idx] >= eps / k:
            failed = True
    out = np.concatenate([[n - int(m.sum())], m])
    return GridCounts(eps, n, out, failed)


def learn_sample_count(n: int, eps: float, delta: float, scale: float = 1.0) -> int:
    return math.ceil(scale * 2**12 * eps**-4 * math.log(n) ** 2 * math.log(1.0 / delta))


def learn_distribution(
    o: CondOracle,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    scale: float = 1.0,
    estimator_scale: float | None = None,
    alpha: np.ndarray | None = None,
    mode: str = GRID,
) -> LearnResult:
    """Learn ``mu`` up to a permutation of the domain.

    Draws ``s = 2^12 eps^-4 ln^2 n ln(1/delta)`` trimmed samples at
    ``(eps/12, delta/2, s)``, tallies them per grid index and returns the
    tentative distribution of the bucketized tallies. ``estimator_scale``
    scales the per-node ratio estimates separately from ``s``.
    """
    n = o.n
    if n < 2:
        raise PreconditionError("learning needs a domain of at least two elements")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValueError("eps and delta must lie in (0, 1)")
    e = eps / 12
    s = learn_sample_count(n, eps, delta, scale)
    before = o.account.copy()
    sampler = TrimmingSampler(
        o, e, delta / 2, s, rng, scale=scale if estimator_scale is None else estimator_scale, alpha=alpha
    )
    i, j = sampler.sample_many(s)
    K = grid_size(n, e)
    tallies = np.bincount(j[i != TRIMMED], minlength=K + 1).astype(float)
    tallies[0] = np.count_nonzero(i == TRIMMED)
    counts = bucketize(tallies / s, n, e, bucket_count_prime(n, e), mode=mode)
    dist = tentative_distribution(counts)
    fallback = counts.m[0] == n
    return LearnResult(dist, counts, o.account - before, bool(fallback), s, int(tallies[0]))


def min_permutation_tv(a: Distribution, b: Distribution) -> float:
    """Smallest variation distance over relabelings: compare both sorted in descending order."""
    pa, pb = np.asarray(a.probs), np.asarray(b.probs)
    if pa.size != pb.size:
        raise DomainMismatchError(f"domains differ: {pa.size} vs {pb.size}")
    return 0.5 * float(np.abs(np.sort(pa)[::-1] - np.sort(pb)[::-1]).sum())


# -- label-invariant properties ----------------------------------------------


def uniformity_distance(nu: Distribution) -> float:
    return tv_distance(nu, uniform(nu.n))


def support_distance(nu: Distribution, size: int) -> float:
    """Distance to the nearest distribution uniform on some set of ``size`` elements."""
    top = np.sort(nu.probs)[::-1][:size]
    return 1.0 - float(np.minimum(top, 1.0 / size).sum())


def uniblock_distance(nu: Distribution, parity: str = "even") -> float:
    """Distance to the set of distributions uniform on ``4^k`` (even) or ``2 * 4^k`` (odd) elements."""
    sizes = []
    size = 1 if parity == "even" else 2
    while size <= nu.n:
        sizes.append(size)
        size *= 4
    if not sizes:
        return 1.0
    return min(support_distance(nu, m) for m in sizes)


def _check_label_invariance(prop_dist, nu: Distribution, rng: np.random.Generator) -> None:
    base = prop_dist(nu)
    shuffled = Distribution(nu.probs[rng.permutation(nu.n)])
    if abs(prop_dist(shuffled) - base) > 1e-9:
        raise PreconditionError("property distance changes under relabeling")


def test_label_invariant(
    o: CondOracle,
    prop_dist: Callable[[Distribution], float],
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    threshold: float | None = None,
    scale: float = 1.0,
    estimator_scale: float | None = None,
    check_invariance: bool = True,
) -> Verdict:
    """Learn at ``eps/2`` and accept iff the learned distribution is within ``threshold`` of the property.

    ``threshold`` defaults to ``eps/2``.
    """
    learn_rng, check_rng = spawn(rng, 2)
    res = learn_distribution(o, eps / 2, delta, learn_rng, scale=scale, estimator_scale=estimator_scale)
    if check_invariance:
        _check_label_invariance(prop_dist, res.dist, check_rng)
    d = float(prop_dist(res.dist))
    limit = eps / 2 if threshold is None else threshold
    trace = [{"phase": "learn", "samples": res.samples, "property_distance": d, "failed": res.counts.failed}]
    return verdict(d <= limit, res.account, trace)


def test_identity_up_to_relabeling(
    o1: CondOracle,
    o2: CondOracle,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    scale: float = 1.0,
    estimator_scale: float | None = None,
) -> Verdict:
    """Learn both at ``(eps/4, delta/2)``; accept iff they match within ``eps/2`` after relabeling."""
    if o1.n != o2.n:
        raise PreconditionError("the two oracles have different domains")
    r1, r2 = spawn(rng, 2)
    a = learn_distribution(o1, eps / 4, delta / 2, r1, scale=scale, estimator_scale=estimator_scale)
    b = learn_distribution(o2, eps / 4, delta / 2, r2, scale=scale, estimator_scale=estimator_scale)
    d = min_permutation_tv(a.dist, b.dist)
    trace = [{"phase": "compare", "min_permutation_tv": d}]
    return verdict(d <= eps / 2, a.account + b.account, trace)
