"""Ratio trees and explicit persistent samplers.

The domain is padded to ``N = next_pow2(n)`` with zero-probability leaves on
the right. Internal nodes use heap numbering: the root is 1, the children of
``u`` are ``2u`` and ``2u + 1``, and leaf ``i`` is node ``N + i``. Each node
``u`` covers the dyadic interval ``[a, b)`` and carries ``alpha[u]``, the
(estimated) share of its mass that lies in the left half.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bucketing import bucket_index, grid_value
from .core import CondOracle, Distribution, PreconditionError, next_pow2

TRIMMED = -1


class SessionExhausted(RuntimeError):
    pass


def padded_size(n: int) -> int:
    if n < 2:
        raise PreconditionError("ratio trees need a domain of at least two elements")
    return next_pow2(n)


def node_interval(u: int, N: int) -> tuple[int, int, int]:
    """``(a, mid, b)`` such that node ``u`` covers ``[a, b)`` split at ``mid``."""
    level = u.bit_length() - 1
    width = N >> level
    a = (u - (1 << level)) * width
    return a, a + width // 2, a + width


def exact_alpha(mu: Distribution, N: int | None = None) -> np.ndarray:
    """Exact ratios ``mu(L(u)) / mu(L(u) + R(u))``; 1/2 where the node has no mass.

    Entry 0 is unused; the array has length ``N``.
    """
    N = padded_size(mu.n) if N is None else N
    mass = np.zeros(2 * N)
    mass[N:N + mu.n] = mu.probs
    for u in range(N - 1, 0, -1):
        mass[u] = mass[2 * u] + mass[2 * u + 1]
    alpha = np.full(N, 0.5)
    internal = mass[1:N]
    left = mass[2:2 * N:2]
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha[1:] = np.where(internal > 0, left / np.where(internal > 0, internal, 1.0), 0.5)
    alpha[0] = np.nan
    return alpha


def _path_products(alpha: np.ndarray):
    """Leaf probabilities and, per leaf, the smallest factor on its root path."""
    N = alpha.size
    prob = np.ones(1)
    low = np.ones(1)
    level_start = 1
    while level_start < N:
        a = alpha[level_start:2 * level_start]
        prob = np.column_stack([prob * a, prob * (1 - a)]).ravel()
        low = np.column_stack([np.minimum(low, a), np.minimum(low, 1 - a)]).ravel()
        level_start *= 2
    return prob, low


def reconstitute(alpha: np.ndarray) -> np.ndarray:
    """Leaf probabilities over the padded domain: products of ``alpha`` / ``1 - alpha`` along each path."""
    return _path_products(np.asarray(alpha, dtype=float))[0]


def path_minimum(alpha: np.ndarray) -> np.ndarray:
    return _path_products(np.asarray(alpha, dtype=float))[1]


def depth(N: int) -> int:
    return N.bit_length() - 1


def path_threshold(eps: float, N: int) -> float:
    return eps / (2 * depth(N))


def estimator_samples(eps: float, delta: float, scale: float = 1.0) -> int:
    return math.ceil(scale * 2.0 * eps**-2 * math.log(1.0 / delta))


def estimate_ratio(
    o: CondOracle,
    u: int,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    N: int | None = None,
    scale: float = 1.0,
) -> float:
    """Fraction of ``t = 2 eps^-2 ln(1/delta)`` draws on ``L(u) + R(u)`` that land in ``L(u)``.

    Nodes lying entirely in the padding are answered from ``rng`` without
    touching the oracle, as the real oracle cannot condition on them.
    """
    N = padded_size(o.n) if N is None else N
    if not 1 <= u < N:
        raise PreconditionError(f"{u} is not an internal node of a tree with {N} leaves")
    t = estimator_samples(eps, delta, scale)
    a, mid, b = node_interval(u, N)
    if a >= o.n:
        return rng.binomial(t, 0.5) / t
    stop = min(b, o.n)
    counts = o.draw_counts(range(a, stop), t)
    return float(counts[: max(0, min(mid, stop) - a)].sum()) / t


@dataclass(frozen=True)
class ExplicitSample:
    i: int
    eta: float | None
    j: int | None = None
    padded: bool = False

    @property
    def trimmed(self) -> bool:
        return self.i == TRIMMED


class PersistentSampler:
    """Session producing up to ``s`` samples from one reconstituted distribution.

    Ratios are estimated lazily with precision ``(eps / (2 log2 N))^2`` and
    error ``delta / (s log2 N)`` and never re-estimated. ``alpha`` injects a
    full ratio vector instead (no oracle queries are then made).
    """

    def __init__(
        self,
        o: CondOracle,
        eps: float,
        delta: float,
        s: int,
        rng: np.random.Generator,
        *,
        scale: float = 1.0,
        alpha: np.ndarray | None = None,
    ):
        self.o = o
        self.n = o.n
        self.N = padded_size(o.n)
        self.L = depth(self.N)
        self.eps, self.delta, self.s = eps, delta, s
        self.rng = rng
        self.scale = scale
        self.node_eps = (eps / (2 * self.L)) ** 2
        self.node_delta = delta / (s * self.L)
        self.t_node = estimator_samples(self.node_eps, self.node_delta, scale)
        if alpha is None:
            self.alpha = np.full(self.N, np.nan)
        else:
            alpha = np.asarray(alpha, dtype=float)
            if alpha.size != self.N:
                raise PreconditionError(f"injected alpha must have length {self.N}")
            self.alpha = alpha.copy()
        self.runs = 0
        self.estimated = 0

    def __copy__(self):
        raise TypeError("sampler sessions cannot be cloned")

    __deepcopy__ = __copy__

    def __reduce_ex__(self, protocol):
        raise TypeError("sampler sessions cannot be cloned")

    def _fill(self, nodes: np.ndarray) -> None:
        for u in np.unique(nodes):
            if np.isnan(self.alpha[u]):
                self.alpha[u] = estimate_ratio(
                    self.o, int(u), self.node_eps, self.node_delta, self.rng, N=self.N, scale=self.scale
                )
                self.estimated += 1

    def _walk(self, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.runs + count > self.s:
            raise SessionExhausted(f"session allows {self.s} samples, {self.runs} used")
        self.runs += count
        u = np.ones(count, dtype=np.int64)
        eta = np.ones(count)
        low = np.ones(count)
        for _ in range(self.L):
            self._fill(u)
            a = self.alpha[u]
            left = self.rng.random(count) < a
            p = np.where(left, a, 1.0 - a)
            eta *= p
            low = np.minimum(low, p)
            u = 2 * u + (~left)
        return u - self.N, eta, low

    def sample(self) -> ExplicitSample:
        i, eta, _ = self._walk(1)
        return ExplicitSample(int(i[0]), float(eta[0]), padded=bool(i[0] >= self.n))

    def sample_many(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """``count`` runs at once; returns the leaves and their claimed probabilities."""
        i, eta, _ = self._walk(count)
        return i, eta


class TrimmingSampler(PersistentSampler):
    """Persistent sampler snapped down to the grid ``(1+eps)^(j-1) eps / n``.

    A run is trimmed (returns ``TRIMMED``) if some factor on its path is below
    ``eps / (2 log2 N)``, if its probability is below ``eps / n``, or with
    probability ``1 - eta'/eta`` where ``eta'`` is the grid value under ``eta``.
    """

    def sample_many(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        i, eta, low = self._walk(count)
        keep = (low >= path_threshold(self.eps, self.N)) & (eta >= self.eps / self.n) & (i < self.n)
        j = np.zeros(count, dtype=np.int64)
        if keep.any():
            j[keep] = bucket_index(eta[keep], self.n, self.eps, self.eps)
            snapped = grid_value(j[keep], self.n, self.eps, self.eps)
            keep[keep] = self.rng.random(int(keep.sum())) < snapped / eta[keep]
        i = np.where(keep, i, TRIMMED)
        j = np.where(keep, j, 0)
        return i, j

    def sample(self) -> ExplicitSample:
        i, j = self.sample_many(1)
        if i[0] == TRIMMED:
            return ExplicitSample(TRIMMED, None)
        return ExplicitSample(int(i[0]), float(grid_value(j[0], self.n, self.eps, self.eps)), int(j[0]))


@dataclass(frozen=True)
class Trimmed:
    """``values[i]`` is the trimmed mass of element ``i``; ``sentinel`` holds the rest."""

    values: np.ndarray
    grid: np.ndarray
    sentinel: float
    renormalized: Distribution


def trim_exact(mu_tilde, B, eps: float, n: int | None = None) -> Trimmed:
    """Reference trimming of an explicit distribution.

    Elements in ``B`` or below ``eps/n`` are zeroed; the rest are snapped
    down to the grid. ``n`` defaults to the length of ``mu_tilde``; pass the
    real domain size when ``mu_tilde`` lives on a padded domain.
    """
    p = np.asarray(mu_tilde.probs if isinstance(mu_tilde, Distribution) else mu_tilde, dtype=float)
    n = p.size if n is None else n
    p = p[:n]
    keep = p >= eps / n
    if B is not None:
        B = np.asarray(list(B) if not isinstance(B, np.ndarray) else B, dtype=np.int64)
        keep[B[B < n]] = False
    grid = np.where(keep, bucket_index(p, n, eps, eps), 0)
    values = np.where(keep, grid_value(np.maximum(grid, 1), n, eps, eps), 0.0)
    total = values.sum()
    renorm = Distribution(values / total) if total > 0 else Distribution(np.full(n, 1.0 / n))
    return Trimmed(values, grid, float(max(0.0, 1.0 - total)), renorm)


def fine_set(alpha: np.ndarray, eps: float, n: int | None = None) -> np.ndarray:
    """Leaves whose root path has a factor below ``eps / (2 log2 N)``."""
    N = np.asarray(alpha).size
    low = path_minimum(alpha)
    B = np.flatnonzero(low < path_threshold(eps, N))
    return B if n is None else B[B < n]


def trimmed_law(alpha: np.ndarray, eps: float, n: int) -> dict:
    """Exact output law of :class:`TrimmingSampler` with injected ``alpha``.

    Keys are ``(i, j)`` pairs plus ``TRIMMED``.
    """
    mu_tilde = reconstitute(alpha)
    t = trim_exact(mu_tilde, fine_set(alpha, eps), eps, n)
    law = {(int(i), int(t.grid[i])): float(t.values[i]) for i in np.flatnonzero(t.values > 0)}
    law[TRIMMED] = 1.0 - sum(law.values())
    return law


def query_budget_per_sample(eps: float, delta: float, s: int, N: int, scale: float = 1.0) -> int:
    """Most conditional queries one run can trigger: a fresh estimate at every level."""
    L = depth(N)
    return L * estimator_samples((eps / (2 * L)) ** 2, delta / (s * L), scale)


def closed_form_budget(eps: float, delta: float, s: int, n: int) -> float:
    """Closed-form per-sample query bound ``2^5 eps^-4 L^5 ln(s L / delta)``, ``L`` the tree depth.

    :func:`query_budget_per_sample` rounds each node's estimator count up, so
    it can exceed this by less than ``L``.
    """
    L = depth(padded_size(n))
    return 2**5 * eps**-4 * L**5 * math.log(s * L / delta)
