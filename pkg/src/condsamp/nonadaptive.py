"""Non-adaptive near-uniformity and identity testers.

Every conditioning set is fixed in a :class:`NonAdaptivePlan` before the
oracle is touched; the verdict is a function of the plan and the returned
counts only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .adaptive import amplification_count, primitive_sample_count
from .bucketing import bucket, coarsen
from .core import (
    CondOracle,
    Distribution,
    PreconditionError,
    linf_distance,
    uniform,
    verdict,
    Verdict,
)

COLLISION = "collision"
IDENTITY = "identity"


@dataclass(frozen=True)
class PlanEntry:
    elements: np.ndarray  # sorted indices of the oracle's domain
    count: int
    kind: str
    tag: tuple = ()


@dataclass
class NonAdaptivePlan:
    n: int
    entries: list[PlanEntry] = field(default_factory=list)
    built_ns: int = 0

    def seal(self) -> "NonAdaptivePlan":
        self.built_ns = time.monotonic_ns()
        return self

    @property
    def total_samples(self) -> int:
        return sum(e.count for e in self.entries)

    def fingerprint(self) -> bytes:
        """Byte string identifying the sets and counts, for replay comparisons."""
        parts = []
        for e in self.entries:
            parts.append(np.int64(e.count).tobytes())
            parts.append(np.asarray(e.elements, dtype=np.int64).tobytes())
            parts.append(b"|")
        return b"".join(parts)


def execute_plan(o: CondOracle, plan: NonAdaptivePlan) -> list[np.ndarray]:
    """Draw every planned batch; counts are aligned with each entry's elements."""
    if o.n != plan.n:
        raise PreconditionError("plan and oracle have different domains")
    out = []
    for e in plan.entries:
        if e.count == 0:
            out.append(np.zeros(e.elements.size, dtype=np.int64))
            continue
        S = None if e.elements.size == plan.n else e.elements
        out.append(np.asarray(o.draw_counts(S, e.count)))
    return out


# -- near uniformity ---------------------------------------------------------


@dataclass(frozen=True)
class NearUniformityLayout:
    j_range: range
    per_set: int
    small_size: int
    small_eps: float
    small_samples: int


def near_uniformity_layout(n: int, eps: float, scale: float = 1.0) -> NearUniformityLayout:
    ln_n = math.log(n)
    poly = eps**-6 * ln_n**5
    j_lo = max(0, math.ceil(math.log2(scale * 2000.0 * poly))) if poly > 0 else 0
    j_hi = math.ceil(math.log2(n))
    per_set = math.ceil(scale * 64.0 * eps**-2 * ln_n**2)
    small = min(n, max(1, math.ceil(scale * 9000.0 * poly)))
    small_eps = eps / (24.0 * small)
    return NearUniformityLayout(
        range(j_lo, j_hi + 1),
        per_set,
        small,
        small_eps,
        primitive_sample_count(small, small_eps, 1.0 / 20.0, scale),
    )


def _random_subset(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    if size >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=size, replace=False))


def plan_near_uniformity(n: int, eps: float, rng: np.random.Generator, scale: float = 1.0, tag: tuple = ()) -> NonAdaptivePlan:
    """Collision sets ``U_j`` of size ``min(n, 2^j)`` plus one small identity set ``U``."""
    plan = NonAdaptivePlan(n)
    if n <= 1:
        return plan
    layout = near_uniformity_layout(n, eps, scale)
    for j in layout.j_range:
        U_j = _random_subset(rng, n, min(n, 2**j))
        plan.entries.append(PlanEntry(U_j, layout.per_set, COLLISION, tag + (j,)))
    U = _random_subset(rng, n, layout.small_size)
    plan.entries.append(PlanEntry(U, layout.small_samples if U.size > 1 else 0, IDENTITY, tag + (layout.small_eps,)))
    return plan


def _entry_rejects(entry: PlanEntry, counts: np.ndarray, mu_known: Distribution) -> bool:
    if entry.kind == COLLISION:
        return bool((counts >= 2).any())
    if entry.count == 0:
        return False
    w = mu_known.probs[entry.elements]
    total = w.sum()
    known = w / total if total > 0 else np.full(w.size, 1.0 / w.size)
    dist = 0.5 * float(np.abs(counts / entry.count - known).sum())
    return dist > entry.tag[-1] / 2


def _decide(entries, counts, mu_known) -> bool:
    return not any(_entry_rejects(e, c, mu_known) for e, c in zip(entries, counts))


def test_near_uniformity_nonadaptive(
    o: CondOracle,
    mu_known: Distribution,
    eps: float,
    rng: np.random.Generator,
    *,
    scale: float = 1.0,
    check: bool = True,
) -> Verdict:
    """Non-adaptive identity test against a known near-uniform distribution, error 1/3.

    Requires ``||mu_known - U||_inf < eps/(8n)``; amplify externally for a
    smaller error.
    """
    n = mu_known.n
    if o.n != n:
        raise PreconditionError("oracle and known distribution have different domains")
    if check and linf_distance(mu_known, uniform(n)) >= eps / (8 * n):
        raise PreconditionError("known distribution is not within eps/(8n) of uniform in l-infinity")
    plan = plan_near_uniformity(n, eps, rng, scale).seal()
    before = o.account.copy()
    counts = execute_plan(o, plan)
    trace = [{"phase": "plan", "built_ns": plan.built_ns, "sets": len(plan.entries), "samples": plan.total_samples}]
    return verdict(_decide(plan.entries, counts, mu_known), o.account - before, trace)


def collision_bounds(n: int, eps: float, scale: float = 1.0) -> tuple[float, float]:
    """Union bounds on a false collision over all ``U_j`` under near-uniformity.

    Returns ``(printed, pairwise)``: the first uses the ``2^{-2j}`` factor as
    written for the completeness argument, the second the per-pair collision
    chance ``2^{-j}`` of ``binom(s, 2)`` pairs.
    """
    layout = near_uniformity_layout(n, eps, scale)
    ratio = ((1 + eps / 8) / (1 - eps / 8)) ** 2
    pairs = math.comb(layout.per_set, 2)
    printed = sum(pairs * ratio * 2.0 ** (-2 * j) for j in layout.j_range)
    pairwise = sum(pairs * ratio / min(n, 2**j) for j in layout.j_range)
    return printed, pairwise


# -- identity ----------------------------------------------------------------


def bucket_error(eps: float, delta: float, n: int) -> float:
    return delta * math.log1p(eps / 8) / (2 * math.log(n))


def plan_identity(
    mu_known: Distribution,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    scale: float = 1.0,
    repetitions: int | None = None,
) -> tuple[NonAdaptivePlan, dict]:
    """Plan for the non-adaptive identity test.

    Each non-empty bucket ``M_1..M_k`` of ``mu_known`` at ``eps/8`` gets
    ``reps`` independent near-uniformity sub-plans at distance ``eps/2``,
    mapped into global indices. The final entry samples the whole domain for
    the coarsened comparison.
    """
    n = mu_known.n
    part = bucket(mu_known, eps / 8)
    reps = amplification_count(bucket_error(eps, delta, n)) if repetitions is None else max(1, repetitions)
    plan = NonAdaptivePlan(n)
    tested = []
    for b in part.nonempty():
        if b == 0:
            continue
        M = part.bucket(b)
        tested.append(b)
        if M.size == 1:
            # the restriction to a singleton is the same for every distribution
            continue
        for r in range(reps):
            sub = plan_near_uniformity(M.size, eps / 2, rng, scale, tag=(b, r))
            for e in sub.entries:
                plan.entries.append(PlanEntry(M[e.elements], e.count, e.kind, e.tag))
    coarse_eps = eps / 2
    plan.entries.append(
        PlanEntry(
            np.arange(n),
            primitive_sample_count(part.k + 1, coarse_eps, delta / 2, scale),
            IDENTITY,
            ("coarse", coarse_eps),
        )
    )
    return plan, {"partition": part, "repetitions": reps, "buckets_tested": tested}


def test_identity_nonadaptive(
    o: CondOracle,
    mu_known: Distribution,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    scale: float = 1.0,
    repetitions: int | None = None,
) -> Verdict:
    """Non-adaptive identity test against an arbitrary known distribution."""
    n = mu_known.n
    if o.n != n:
        raise PreconditionError("oracle and known distribution have different domains")
    plan, info = plan_identity(mu_known, eps, delta, rng, scale=scale, repetitions=repetitions)
    plan.seal()
    before = o.account.copy()
    counts = execute_plan(o, plan)
    part, reps = info["partition"], info["repetitions"]

    # bucket sub-tests: a run rejects if any of its entries rejects, then majority over runs
    runs: dict[tuple[int, int], bool] = {}
    coarse_ok = True
    for e, c in zip(plan.entries, counts):
        if e.tag and e.tag[0] == "coarse":
            per_bucket = np.bincount(part.labels, weights=c, minlength=part.k + 1)
            dist = 0.5 * float(np.abs(per_bucket / e.count - coarsen(mu_known, part).probs).sum())
            coarse_ok = dist <= e.tag[-1] / 2
            continue
        key = (e.tag[0], e.tag[1])
        runs[key] = runs.get(key, True) and not _entry_rejects(e, c, mu_known)
    failed_buckets = []
    for b in sorted({key[0] for key in runs}):
        accepts = sum(ok for (bb, _), ok in runs.items() if bb == b)
        if 2 * accepts <= reps:
            failed_buckets.append(b)
    accept = coarse_ok and not failed_buckets
    trace = [
        {
            "phase": "plan",
            "built_ns": plan.built_ns,
            "sets": len(plan.entries),
            "samples": plan.total_samples,
            "buckets_tested": info["buckets_tested"],
            "repetitions": reps,
            "failed_buckets": sorted(failed_buckets),
            "coarse_accepted": coarse_ok,
        }
    ]
    return verdict(accept, o.account - before, trace)
