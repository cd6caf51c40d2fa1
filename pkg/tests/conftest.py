"""
tests/conftest.py — shared fixtures for the kaczlab test suite.

Systems are small and seeded so every test is deterministic; solver tests
that look at timelines use ``TickClock`` or ``WorkClock`` instead of the wall
clock.
"""
import os

import numpy as np
import pytest

# ── Force test environment variables BEFORE any kaczlab module is imported ────
os.environ.setdefault("KACZLAB_LOG_LEVEL", "DEBUG")
os.environ.pop("KACZLAB_OUTPUT_DIR", None)

from kaczlab.config import get_settings  # noqa: E402
from kaczlab.models.problem import GeneratedProblem  # noqa: E402
from kaczlab.services.clocks import TickClock  # noqa: E402
from kaczlab.services.problems import gen_random_conditioned  # noqa: E402
from kaczlab.services.sampling import DenseRowSource, RngStream  # noqa: E402


@pytest.fixture(autouse=True)
def _fresh_settings():
    """Drop cached settings so monkeypatched environment variables take effect."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture()
def gaussian():
    """Factory for seeded standard normal arrays."""

    def _make(*shape: int, seed: int = 0) -> np.ndarray:
        return np.random.default_rng(seed).standard_normal(shape)

    return _make


@pytest.fixture()
def orthonormal_columns(gaussian):
    """A 30×5 matrix with orthonormal columns."""
    q, _ = np.linalg.qr(gaussian(30, 5, seed=7))
    return q


@pytest.fixture()
def small_problem() -> GeneratedProblem:
    """Consistent 120×6 system with condition number 20."""
    return gen_random_conditioned(120, 6, 20.0, RngStream(11, 0))


@pytest.fixture()
def small_source(small_problem) -> DenseRowSource:
    return DenseRowSource.from_problem(small_problem)


@pytest.fixture()
def tick_clock() -> TickClock:
    return TickClock(1e-3)
