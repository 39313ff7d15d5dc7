"""Hard instances: uniblock ensembles and the balanced-string reduction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Distribution, PreconditionError, make_rng, normalize_set, set_elements

EVEN = "even"
ODD = "odd"


class ReductionFailed(RuntimeError):
    """The reduction spent its bit-query budget before emitting a sample."""


def u_distribution(U, n: int) -> Distribution:
    """Uniform on ``U``, zero elsewhere."""
    U = set_elements(normalize_set(U, n), n)
    w = np.zeros(n)
    w[U] = 1.0 / len(U)
    return Distribution(w)


@dataclass(frozen=True)
class UniblockDraw:
    k: int
    U: np.ndarray
    dist: Distribution
    parity: str


def uniblock_k_range(n: int) -> range:
    """``ceil(log2(n)/8) .. floor(3 log2(n)/8)``."""
    if n < 1 or n & (n - 1):
        raise PreconditionError("uniblock ensembles need n to be a power of two")
    log_n = n.bit_length() - 1
    if log_n < 8:
        raise PreconditionError("uniblock ensembles need log2(n) >= 8")
    return range(math.ceil(log_n / 8), (3 * log_n) // 8 + 1)


def uniblock_size(k: int, parity: str) -> int:
    if parity not in (EVEN, ODD):
        raise ValueError(f"parity must be {EVEN!r} or {ODD!r}")
    return 2 ** (2 * k) if parity == EVEN else 2 ** (2 * k + 1)


def gen_uniblock(n: int, parity: str, seed=None, *, k: int | None = None) -> UniblockDraw:
    """Uniform ``k`` in range, then a uniformly random ``U`` of size ``4^k`` or ``2 * 4^k``."""
    rng = make_rng(seed)
    ks = uniblock_k_range(n)
    if k is None:
        k = int(rng.integers(ks.start, ks.stop))
    elif k not in ks:
        raise PreconditionError(f"k={k} outside {ks}")
    size = uniblock_size(k, parity)
    U = np.sort(rng.choice(n, size=size, replace=False))
    return UniblockDraw(k, U, u_distribution(U, n), parity)


# -- balanced strings ---------------------------------------------------------


def parse_bits(x) -> np.ndarray:
    if isinstance(x, str):
        x = [int(c) for c in x.strip()]
    b = np.asarray(x, dtype=np.int8).ravel()
    if np.any((b != 0) & (b != 1)):
        raise ValueError("bit strings may only hold 0 and 1")
    return b


def balanced_extend(x) -> np.ndarray:
    """``x`` followed by its bitwise complement."""
    b = parse_bits(x)
    return np.concatenate([b, 1 - b])


def hamming(x, y) -> int:
    return int(np.count_nonzero(parse_bits(x) != parse_bits(y)))


def string_distribution(y) -> Distribution:
    """``1/(2n)`` on zeros of a balanced string and ``3/(2n)`` on its ones."""
    b = parse_bits(y)
    n = b.size
    if n == 0 or 2 * int(b.sum()) != n:
        raise PreconditionError("string must be balanced: as many ones as zeros")
    return Distribution(np.where(b == 1, 3.0, 1.0) / (2 * n))


class ReductionSampler:
    """Conditional samples of ``string_distribution(balanced_extend(x))`` from bit queries to ``x``.

    Each round picks ``i`` uniformly from ``Q`` and reads one bit of ``b(x)``
    (a query to ``x``). A one is emitted; a zero is emitted with probability
    1/3, otherwise the round repeats. ``queries`` counts bit reads across
    calls; exceeding ``budget`` raises :class:`ReductionFailed`.
    """

    def __init__(self, x, rng=None, budget: int | None = None):
        self.x = parse_bits(x)
        self.half = self.x.size
        self.n = 2 * self.half
        self.rng = make_rng(rng)
        self.budget = budget
        self.queries = 0
        self.emissions = 0

    def bit(self, i: int) -> int:
        if self.budget is not None and self.queries >= self.budget:
            raise ReductionFailed(f"bit-query budget of {self.budget} exhausted")
        self.queries += 1
        return int(self.x[i]) if i < self.half else 1 - int(self.x[i - self.half])

    def sample(self, Q) -> int:
        Q = set_elements(normalize_set(Q, self.n), self.n)
        while True:
            i = int(Q[self.rng.integers(len(Q))])
            if self.bit(i) == 1 or self.rng.random() < 1.0 / 3.0:
                self.emissions += 1
                return i


def reduction_law(x, Q) -> dict[int, float]:
    """Exact output law of one :meth:`ReductionSampler.sample` call: weight 3 on ones, 1 on zeros."""
    b = balanced_extend(x)
    Q = set_elements(normalize_set(Q, b.size), b.size)
    w = np.where(b[Q] == 1, 3.0, 1.0)
    return {int(i): float(p) for i, p in zip(Q, w / w.sum())}
