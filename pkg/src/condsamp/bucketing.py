"""Geometric bucketing of a known distribution, restriction and coarsening."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    CondOracle,
    Distribution,
    PreconditionError,
    SampleAccount,
    ZeroMassError,
    normalize_set,
    set_elements,
)

STANDARD = "standard"
PRIME = "prime"


def _ceil(x: float) -> int:
    # ratios like log(8)/log(2) land a hair above the integer
    return math.ceil(x - 1e-9)


def bucket_count(n: int, eps: float) -> int:
    """Nominal number of buckets ``ceil(ln n / ln(1+eps))``."""
    return max(1, _ceil(math.log(n) / math.log1p(eps))) if n > 1 else 1


def bucket_count_prime(n: int, eps: float) -> int:
    """Nominal ``ceil(ln n * ln(1/eps) / ln(1+eps)^2)`` for the eps-scaled grid."""
    if n <= 1:
        return 1
    return max(1, _ceil(math.log(n) * math.log(1.0 / eps) / math.log1p(eps) ** 2))


def grid_value(j, n: int, eps: float, base: float = 1.0):
    """Lower edge ``(1+eps)^(j-1) * base / n`` of bucket ``j >= 1``; ``inf`` past float range."""
    with np.errstate(over="ignore"):
        return (1.0 + eps) ** (np.asarray(j, dtype=float) - 1.0) * base / n


BOUNDARY_RTOL = 1e-12


def bucket_index(values, n: int, eps: float, base: float = 1.0) -> np.ndarray:
    """Bucket of each value: 0 below ``base/n``, else the ``j`` whose half-open
    interval ``[grid(j), grid(j+1))`` contains it.

    Values within a relative ``1e-12`` below a boundary count as on it, so that
    e.g. a stored ``1/3`` is not pushed under the ``1/n`` edge by rounding.
    """
    v = np.atleast_1d(np.asarray(values, dtype=float)) * (1.0 + BOUNDARY_RTOL)
    out = np.zeros(v.shape, dtype=np.int64)
    pos = v >= base / n
    if not pos.any():
        return out
    vp = v[pos]
    j = np.floor(np.log(vp * n / base) / math.log1p(eps)).astype(np.int64) + 1
    j = np.maximum(j, 1)
    # snap against the exact boundary comparisons
    for _ in range(3):
        low = grid_value(j, n, eps, base)
        j = np.where(low > vp, j - 1, j)
        high = grid_value(j + 1, n, eps, base)
        j = np.where(vp >= high, j + 1, j)
    out[pos] = np.maximum(j, 1)
    return out


@dataclass(frozen=True)
class BucketPartition:
    """Partition of ``range(n)`` into buckets ``M_0..M_k``; ``labels[i]`` is the bucket of ``i``."""

    variant: str
    epsilon: float
    n: int
    k: int
    labels: np.ndarray

    @property
    def buckets(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(self.k + 2))
        return [order[bounds[i]:bounds[i + 1]] for i in range(self.k + 1)]

    def bucket(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.labels == i)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k + 1)

    def nonempty(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.sizes())]


def _partition(mu: Distribution, eps: float, variant: str, nominal_k: int, base: float) -> BucketPartition:
    labels = bucket_index(mu.probs, mu.n, eps, base)
    k = max(nominal_k, int(labels.max()))
    labels.setflags(write=False)
    return BucketPartition(variant, eps, mu.n, k, labels)


def bucket(mu: Distribution, eps: float) -> BucketPartition:
    """Standard bucketing with boundaries ``(1+eps)^i / n``.

    ``k`` is the nominal count, extended if the heaviest element sits above it.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return _partition(mu, eps, STANDARD, bucket_count(mu.n, eps), 1.0)


def bucket_prime(mu: Distribution, eps: float) -> BucketPartition:
    """Bucketing with boundaries ``(1+eps)^i * eps / n`` reaching down to ``eps/n``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return _partition(mu, eps, PRIME, bucket_count_prime(mu.n, eps), eps)


def partition_from_labels(labels, k: int | None = None, eps: float = float("nan")) -> BucketPartition:
    labels = np.asarray(labels, dtype=np.int64).copy()
    k = int(labels.max()) if k is None else k
    labels.setflags(write=False)
    return BucketPartition("custom", eps, labels.size, k, labels)


@dataclass(frozen=True)
class Restriction:
    dist: Distribution
    index_map: np.ndarray


def restrict(mu: Distribution, M) -> Restriction:
    """Condition ``mu`` on ``M`` and re-index it as ``range(len(M))``.

    ``index_map[i]`` is the original element behind new index ``i``.
    """
    M = set_elements(normalize_set(M, mu.n), mu.n)
    mass = float(mu.probs[M].sum())
    if mass <= 0:
        raise ZeroMassError("restriction to a set of zero mass")
    return Restriction(Distribution(mu.probs[M] / mass), np.asarray(M))


def restrict_or_uniform(mu: Distribution, M) -> Distribution:
    """Restriction, or uniform over ``M`` when it carries no mass."""
    M = set_elements(normalize_set(M, mu.n), mu.n)
    w = mu.probs[M]
    total = w.sum()
    if total <= 0:
        return Distribution(np.full(len(M), 1.0 / len(M)))
    return Distribution(w / total)


def coarsen(mu: Distribution, part: BucketPartition) -> Distribution:
    if part.n != mu.n:
        raise PreconditionError("partition does not match the distribution's domain")
    return Distribution(np.bincount(part.labels, weights=mu.probs, minlength=part.k + 1))


def reassemble(part: BucketPartition, masses, pieces) -> np.ndarray:
    """Inverse of restriction + coarsening: ``sum_i mass_i * piece_i`` placed back on ``range(n)``."""
    out = np.zeros(part.n)
    for i, M in enumerate(part.buckets):
        if M.size:
            out[M] = masses[i] * np.asarray(pieces[i].probs if isinstance(pieces[i], Distribution) else pieces[i])
    return out


class RestrictedOracle(CondOracle):
    """View of ``parent`` over the sub-domain ``M`` re-indexed as ``range(len(M))``."""

    def __init__(self, parent: CondOracle, M):
        M = set_elements(normalize_set(M, parent.n), parent.n)
        self.parent = parent
        self.index_map = np.asarray(M, dtype=np.int64)
        self.n = int(self.index_map.size)

    @property
    def account(self) -> SampleAccount:
        return self.parent.account

    def _lift(self, S):
        S = normalize_set(S, self.n)
        if S is None:
            return self.index_map
        if isinstance(S, range):
            return self.index_map[S.start:S.stop]
        return self.index_map[S]

    def draw_many(self, S, size):
        out = self.parent.draw_many(self._lift(S), size)
        return np.searchsorted(self.index_map, out)

    def draw_counts(self, S, size):
        return self.parent.draw_counts(self._lift(S), size)


def restricted_oracle(o: CondOracle, M) -> RestrictedOracle:
    return RestrictedOracle(o, M)


class CoarsenedOracle(CondOracle):
    """Oracle over bucket indices: a draw conditioned on ``T`` is a parent draw
    conditioned on the union of the (non-empty) buckets in ``T``."""

    def __init__(self, parent: CondOracle, part: BucketPartition):
        if part.n != parent.n:
            raise PreconditionError("partition does not match the oracle's domain")
        self.parent = parent
        self.part = part
        self.n = part.k + 1

    @property
    def account(self) -> SampleAccount:
        return self.parent.account

    def _union(self, T) -> np.ndarray:
        T = set_elements(normalize_set(T, self.n), self.n)
        members = np.flatnonzero(np.isin(self.part.labels, T))
        if members.size == 0:
            raise PreconditionError("conditioning on buckets that are all empty")
        return members

    def draw_many(self, T, size):
        union = self._union(T)
        return self.part.labels[self.parent.draw_many(union, size)]

    def draw_counts(self, T, size):
        T_el = set_elements(normalize_set(T, self.n), self.n)
        union = self._union(T)
        counts = self.parent.draw_counts(union, size)
        per_bucket = np.bincount(self.part.labels[union], weights=counts, minlength=self.n)
        return per_bucket[T_el].astype(np.int64)


def coarsened_oracle(o: CondOracle, part: BucketPartition) -> CoarsenedOracle:
    return CoarsenedOracle(o, part)
