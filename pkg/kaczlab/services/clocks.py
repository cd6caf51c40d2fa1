"""
Clocks for solver timelines.

A clock is any zero-argument callable returning seconds.  Solvers read it
around every chunk of iterations and around preconditioner builds.  Besides
``time.perf_counter`` two deterministic clocks are available:

  TickClock  advances one tick per read, whatever happened in between
  WorkClock  advances only when charged, by a fixed cost per iteration plus a
             cost per floating-point operation

Code that does measurable work calls ``charge(clock, flops, steps)``; clocks
without a ``charge`` method ignore it, so the wall clock and ``TickClock`` are
unaffected.
"""
from collections.abc import Callable

Clock = Callable[[], float]


class TickClock:
    """Deterministic clock: the k-th call returns k·tick."""

    def __init__(self, tick: float = 1e-3):
        self.tick = tick
        self.calls = 0

    def __call__(self) -> float:
        self.calls += 1
        return self.calls * self.tick


class WorkClock:
    """
    Deterministic cost model of the solver loop.

    ``step_seconds`` is the fixed price of one iteration (row fetch, sampling,
    dispatch); ``flop_seconds`` the price of one floating-point operation.  The
    defaults put a plain step at n = 256 near 3 µs and a preconditioned one
    near 16 µs, the ratio a vectorized loop shows on one core.
    """

    def __init__(self, flop_seconds: float = 1e-10, step_seconds: float = 3e-6):
        if flop_seconds < 0 or step_seconds < 0:
            raise ValueError("work clock prices must be non-negative")
        self.flop_seconds = flop_seconds
        self.step_seconds = step_seconds
        self.seconds = 0.0

    def __call__(self) -> float:
        return self.seconds

    def charge(self, flops: float, steps: int = 0) -> None:
        self.seconds += flops * self.flop_seconds + steps * self.step_seconds


def charge(clock: Clock, flops: float, steps: int = 0) -> None:
    """Bill *flops* operations and *steps* iterations to *clock* if it keeps a cost model."""
    bill = getattr(clock, "charge", None)
    if bill is not None:
        bill(flops, steps)


# ── Operation counts ──────────────────────────────────────────────────────────

def plain_step_flops(n: int) -> float:
    """‖a‖², ⟨a, x⟩ and the update."""
    return 6.0 * n


def preconditioned_step_flops(n: int) -> float:
    """a·P̂ on top of the plain step on n-vectors, plus ‖a‖² of the raw row."""
    return 2.0 * n * n + 8.0 * n


def qr_flops(rows: int, cols: int) -> float:
    """Householder QR of a rows×cols matrix, R only."""
    return 2.0 * rows * cols * cols - 2.0 * cols ** 3 / 3.0


def triangular_inverse_flops(n: int) -> float:
    return n ** 3 / 3.0


def triangular_solve_flops(n: int) -> float:
    return float(n * n)


def pseudoinverse_flops(n: int) -> float:
    """Full SVD of an n×n matrix and the product V·Σ⁺·Uᵀ."""
    return 22.0 * n ** 3 + 2.0 * n ** 3
