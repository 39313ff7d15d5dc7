import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from statsmodels.stats.proportion import proportion_confint

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def wilson_lower(successes: int, trials: int, confidence: float = 0.99) -> float:
    """One-sided Wilson lower bound at the given confidence."""
    lo, _ = proportion_confint(successes, trials, alpha=2 * (1 - confidence), method="wilson")
    return float(lo)


def wilson_upper(successes: int, trials: int, confidence: float = 0.95) -> float:
    _, hi = proportion_confint(successes, trials, alpha=2 * (1 - confidence), method="wilson")
    return float(hi)


@st.composite
def prob_vectors(draw, min_n=1, max_n=12, allow_zeros=True):
    n = draw(st.integers(min_n, max_n))
    lo = 0.0 if allow_zeros else 1e-3
    w = draw(st.lists(st.floats(lo, 1.0), min_size=n, max_size=n))
    w = np.asarray(w)
    if w.sum() <= 0:
        w[0] = 1.0
    return w / w.sum()


def random_dist(rng, n, zero_frac=0.0):
    w = rng.exponential(size=n) ** rng.uniform(0.5, 3)
    if zero_frac:
        w[rng.random(n) < zero_frac] = 0.0
    if w.sum() <= 0:
        w[rng.integers(n)] = 1.0
    return w / w.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
