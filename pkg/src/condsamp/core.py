"""Explicit distributions, conditional-sampling oracles and sample accounting.

Domain elements are 0-based throughout the library: a distribution over
``n`` elements lives on ``{0, ..., n-1}``. Conditioning sets may be given as
``None`` (the full domain), a ``range``, or any integer array-like.
"""

from __future__ import annotations

import enum
import math
import time
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

SUM_TOLERANCE = 1e-6
DEFAULT_CONSTANT_SIZE_BOUND = 64

FULL_DOMAIN = "full_domain"
CONSTANT_SIZE = "constant_size"
DYADIC_INTERVAL = "dyadic_interval"
GENERAL = "general"
SET_CLASSES = (FULL_DOMAIN, CONSTANT_SIZE, DYADIC_INTERVAL, GENERAL)


class DomainMismatchError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class ZeroMassError(PreconditionError):
    pass


def make_rng(seed: Any = None) -> np.random.Generator:
    """Return a Generator; accepts ints, SeedSequences or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent child streams of ``rng``."""
    return [np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(count)]


class Distribution:
    """Immutable probability vector over ``{0, ..., n-1}``.

    Inputs whose sum is within ``tol`` of one are renormalized; anything
    further off is rejected.
    """

    __slots__ = ("_p",)

    def __init__(self, probs: Sequence[float] | np.ndarray, *, tol: float = SUM_TOLERANCE):
        p = np.array(probs, dtype=float).ravel()
        if p.size < 1:
            raise ValueError("distribution needs at least one element")
        if not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        total = p.sum()
        if abs(total - 1.0) > tol:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p = p / total
        p.setflags(write=False)
        self._p = p

    @classmethod
    def from_weights(cls, weights: Sequence[float] | np.ndarray) -> "Distribution":
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if total <= 0:
            raise ValueError("weights have no mass")
        return cls(w / total)

    @property
    def probs(self) -> np.ndarray:
        return self._p

    @property
    def n(self) -> int:
        return int(self._p.size)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i):
        return self._p[i]

    def mass(self, S=None) -> float:
        if S is None:
            return 1.0
        if isinstance(S, range):
            return float(self._p[S.start:S.stop].sum())
        return float(self._p[np.asarray(S, dtype=np.int64)].sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and np.array_equal(self._p, other._p)

    def __hash__(self) -> int:
        return hash(self._p.tobytes())

    def __repr__(self) -> str:
        if self.n <= 8:
            return f"Distribution({np.array2string(self._p, precision=4)})"
        return f"Distribution(n={self.n})"


def uniform(n: int) -> Distribution:
    return Distribution(np.full(n, 1.0 / n))


def halfheavy(n: int) -> Distribution:
    """Uniform on the first half of the domain, zero on the second half."""
    if n < 2:
        raise ValueError("halfheavy needs n >= 2")
    w = np.zeros(n)
    w[: n // 2] = 1.0
    return Distribution.from_weights(w)


def zipf(n: int, s: float = 1.0) -> Distribution:
    return Distribution.from_weights(np.arange(1, n + 1, dtype=float) ** (-s))


def point_mass(n: int, i: int) -> Distribution:
    if not 0 <= i < n:
        raise ValueError(f"element {i} outside domain of size {n}")
    w = np.zeros(n)
    w[i] = 1.0
    return Distribution(w)


def _check_same_domain(a: Distribution, b: Distribution) -> None:
    if a.n != b.n:
        raise DomainMismatchError(f"domains differ: {a.n} vs {b.n}")


def tv_distance(a: Distribution, b: Distribution) -> float:
    _check_same_domain(a, b)
    return 0.5 * float(np.abs(a.probs - b.probs).sum())


def linf_distance(a: Distribution, b: Distribution) -> float:
    _check_same_domain(a, b)
    return float(np.abs(a.probs - b.probs).max())


def smooth(mu: Distribution) -> Distribution:
    """Mix in ``1/n^2`` per element so that no set has zero mass.

    The result is within variation distance ``1/n`` of ``mu``.
    """
    n = mu.n
    return Distribution.from_weights(1.0 / n**2 + (1.0 - 1.0 / n) * mu.probs)


# -- conditioning sets ------------------------------------------------------


def next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def log_star(x: float) -> int:
    """Iterated base-2 logarithm: the number of ``log2`` applications until <= 1."""
    k = 0
    while x > 1:
        x = math.log2(x)
        k += 1
    return k


def normalize_set(S, n: int):
    """Return ``None`` (full domain), a ``range``, or a sorted unique int array."""
    if S is None:
        return None
    if isinstance(S, range):
        if S.step != 1:
            S = np.asarray(S, dtype=np.int64)
        else:
            if len(S) == 0:
                raise PreconditionError("conditioning set is empty")
            if S.start < 0 or S.stop > n:
                raise PreconditionError(f"set {S} is not inside a domain of size {n}")
            return None if (S.start == 0 and S.stop == n) else S
    arr = np.unique(np.asarray(S, dtype=np.int64).ravel())
    if arr.size == 0:
        raise PreconditionError("conditioning set is empty")
    if arr[0] < 0 or arr[-1] >= n:
        raise PreconditionError(f"set has elements outside domain of size {n}")
    if arr.size == n:
        return None
    return arr


def set_size(S, n: int) -> int:
    return n if S is None else len(S)


def set_elements(S, n: int) -> np.ndarray:
    if S is None:
        return np.arange(n)
    if isinstance(S, range):
        return np.arange(S.start, S.stop)
    return S


def _is_dyadic(a: int, b: int, n: int) -> bool:
    """Is ``[a, b)`` a dyadic interval of the padded domain, clipped to ``[0, n)``?"""
    depth_limit = next_pow2(n).bit_length()
    for j in range(depth_limit):
        width = 1 << j
        if a % width == 0 and min(a + width, n) == b:
            return True
    return False


def classify_set(S, n: int, constant_size_bound: int = DEFAULT_CONSTANT_SIZE_BOUND) -> str:
    if S is None:
        return FULL_DOMAIN
    size = len(S)
    if isinstance(S, range):
        a, b = S.start, S.stop
        contiguous = True
    else:
        a, b = int(S[0]), int(S[-1]) + 1
        contiguous = (b - a) == size
    if contiguous and _is_dyadic(a, b, n):
        return DYADIC_INTERVAL
    if size <= constant_size_bound:
        return CONSTANT_SIZE
    return GENERAL


# -- accounting -------------------------------------------------------------


@dataclass
class SampleAccount:
    """Conditional-sample counters, per set class and per raw set size."""

    by_class: Counter = field(default_factory=Counter)
    by_size: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.by_class.values())

    def record(self, cls: str, size: int, count: int) -> None:
        if count <= 0:
            return
        self.by_class[cls] += count
        self.by_size[size] += count

    def copy(self) -> "SampleAccount":
        return SampleAccount(Counter(self.by_class), Counter(self.by_size))

    def __sub__(self, other: "SampleAccount") -> "SampleAccount":
        return SampleAccount(self.by_class - other.by_class, self.by_size - other.by_size)

    def __add__(self, other: "SampleAccount") -> "SampleAccount":
        return SampleAccount(self.by_class + other.by_class, self.by_size + other.by_size)

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "by_class": {k: int(v) for k, v in sorted(self.by_class.items())},
        }


class Decision(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


@dataclass
class Verdict:
    decision: Decision
    account: SampleAccount = field(default_factory=SampleAccount)
    trace: list | None = None

    @property
    def accepted(self) -> bool:
        return self.decision is Decision.ACCEPT

    def __bool__(self) -> bool:
        return self.accepted


def verdict(accept: bool, account: SampleAccount, trace: list | None = None) -> Verdict:
    return Verdict(Decision.ACCEPT if accept else Decision.REJECT, account, trace)


# -- oracles ----------------------------------------------------------------


class CondOracle(ABC):
    """Conditional-sampling access to an unknown distribution over ``range(n)``.

    ``draw_counts`` returns the histogram of ``size`` independent conditional
    draws, aligned with ``set_elements(S)``; it is the cheap path for
    procedures that only need counts.
    """

    n: int

    @property
    @abstractmethod
    def account(self) -> SampleAccount: ...

    @abstractmethod
    def draw_many(self, S, size: int) -> np.ndarray: ...

    @abstractmethod
    def draw_counts(self, S, size: int) -> np.ndarray: ...

    def draw(self, S=None) -> int:
        return int(self.draw_many(S, 1)[0])


class SimulatedOracle(CondOracle):
    """Oracle backed by an explicit distribution and a seeded generator."""

    def __init__(
        self,
        mu: Distribution,
        seed: Any = None,
        *,
        constant_size_bound: int = DEFAULT_CONSTANT_SIZE_BOUND,
    ):
        self.mu = mu
        self.n = mu.n
        self.rng = make_rng(seed)
        self.constant_size_bound = constant_size_bound
        self._account = SampleAccount()
        self._full_cdf = np.cumsum(mu.probs)

    @property
    def account(self) -> SampleAccount:
        return self._account

    def _weights(self, S) -> np.ndarray:
        p = self.mu.probs
        if S is None:
            return p
        if isinstance(S, range):
            return p[S.start:S.stop]
        return p[S]

    def _record(self, S, size: int) -> None:
        cls = classify_set(S, self.n, self.constant_size_bound)
        self._account.record(cls, set_size(S, self.n), size)

    def draw_many(self, S, size: int) -> np.ndarray:
        S = normalize_set(S, self.n)
        self._record(S, size)
        m = set_size(S, self.n)
        if S is None:
            cdf = self._full_cdf
        else:
            cdf = np.cumsum(self._weights(S))
        total = cdf[-1]
        if total <= 0:
            local = self.rng.integers(0, m, size=size)
        else:
            u = self.rng.random(size) * total
            local = np.minimum(np.searchsorted(cdf, u, side="right"), m - 1)
        if S is None:
            return local
        if isinstance(S, range):
            return local + S.start
        return S[local]

    def draw_counts(self, S, size: int) -> np.ndarray:
        S = normalize_set(S, self.n)
        self._record(S, size)
        w = self._weights(S)
        total = w.sum()
        if total <= 0:
            pvals = np.full(w.size, 1.0 / w.size)
        else:
            pvals = w / total
        return self.rng.multinomial(size, pvals)


def simulated_oracle(mu: Distribution, seed: Any = None, **kw) -> SimulatedOracle:
    return SimulatedOracle(mu, seed, **kw)


class RecordingOracle(CondOracle):
    """Pass-through wrapper that logs every conditioning set with a timestamp."""

    def __init__(self, inner: CondOracle):
        self.inner = inner
        self.n = inner.n
        self.log: list[tuple[int, Any, int]] = []

    @property
    def account(self) -> SampleAccount:
        return self.inner.account

    def _log(self, S, size):
        S = normalize_set(S, self.n)
        self.log.append((time.monotonic_ns(), S, size))
        return S

    def draw_many(self, S, size):
        return self.inner.draw_many(self._log(S, size), size)

    def draw_counts(self, S, size):
        return self.inner.draw_counts(self._log(S, size), size)

    @property
    def first_draw_ns(self) -> int | None:
        return self.log[0][0] if self.log else None

    def sets(self) -> list[np.ndarray]:
        return [set_elements(S, self.n) for _, S, _ in self.log]
