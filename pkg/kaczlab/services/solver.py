"""
The Kaczmarz iteration engine.

Three entry points share one loop:

  kaczmarz_solve                 x_{k+1} = x_k − (⟨a_i,x_k⟩ − b_i)/‖a_i‖² · a_i
  preconditioned_kaczmarz_solve  the same projection on the rows ã_i = a_i·P̂_R
                                 in y-space, with x = P̂_R·y
  fine_tuned_solve               plain until time τ, then build P̂_R and continue
                                 preconditioned on one continuous timeline

Timing
------
``elapsed_seconds`` counts iteration time plus preconditioner build time only.
The loop runs in chunks between clock reads; metrics are evaluated while the
timeline is paused, so evaluation cost never shows up in a trace.  Every entry
point takes a ``clock`` callable (see ``services/clocks.py``).  The loop bills
its work to the clock after every chunk, so ``WorkClock`` prices a
preconditioned step at Θ(n²) against Θ(n) for a plain one.

Row access
----------
The loop only ever calls ``source.row(i)``.  Residuals need the full matrix and
are computed by a monitor the harness passes in (``make_residual_monitor``).
"""
import logging
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from kaczlab.config import get_settings
from kaczlab.errors import DimensionMismatchError, ZeroRowError
from kaczlab.models.preconditioner import SketchedPreconditioner
from kaczlab.models.solve import SolveConfig, SolveResult, SolveStatus, TraceRecord
from kaczlab.services.clocks import (
    Clock,
    charge,
    plain_step_flops,
    preconditioned_step_flops,
    triangular_solve_flops,
)
from kaczlab.services.numerics import DenseMatrix, Vector
from kaczlab.services.precond import build_sketched_preconditioner, to_preconditioned_space
from kaczlab.services.sampling import STREAM_ROWS, STREAM_SKETCH, RngStream, RowSampler, RowSource

log = logging.getLogger(__name__)

ResidualMonitor = Callable[[Vector], float]

# A transformed row this small relative to ‖a‖·‖P‖_F has been annihilated by P.
_ANNIHILATION_TOL = 1e-12


class _Timeline:
    def __init__(self, clock: Clock, offset: float = 0.0):
        self.clock = clock
        self._started: float | None = None
        self.elapsed = offset

    def resume(self) -> None:
        self._started = self.clock()

    def pause(self) -> None:
        self.elapsed += self.clock() - self._started
        self._started = None

    def add(self, seconds: float) -> None:
        self.elapsed += seconds


# ── Single step and bound ─────────────────────────────────────────────────────

def kaczmarz_step(x: Vector, a: Vector, b_i: float) -> Vector:
    """Orthogonal projection of x onto the hyperplane ⟨a, ·⟩ = b_i."""
    if x.shape != a.shape:
        raise DimensionMismatchError(f"x has shape {x.shape}, row has shape {a.shape}")
    norm_sq = float(a @ a)
    if norm_sq == 0.0:
        raise ZeroRowError()
    return x - ((a @ x - b_i) / norm_sq) * a


def theoretical_bound(kappa_f_value: float, k: int, init_sq_error: float) -> float:
    """Expected squared-error bound (1 − κ_F⁻²)^k · ‖x* − x_0‖² for RKM."""
    if kappa_f_value < 1.0:
        raise ValueError(f"kappa_F must be >= 1, got {kappa_f_value}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return (1.0 - kappa_f_value ** -2) ** k * init_sq_error


def make_residual_monitor(a: DenseMatrix, b: Vector) -> ResidualMonitor:
    """‖Ax − b‖/‖b‖ evaluator for harnesses that hold the full matrix."""
    b_norm = float(np.linalg.norm(b)) or 1.0

    def residual(x: Vector) -> float:
        return float(np.linalg.norm(a @ x - b)) / b_norm

    return residual


# ── Loop machinery ────────────────────────────────────────────────────────────

@dataclass
class _Context:
    source: RowSource
    sampler: RowSampler
    config: SolveConfig
    x_star: Vector | None
    residual: ResidualMonitor | None
    timeline: _Timeline
    trace: list[TraceRecord]
    eval_every: int
    chunk: int
    skipped: int = 0

    def record(self, k: int, x: Vector) -> TraceRecord:
        rel_error = None
        if self.x_star is not None:
            ref = float(np.linalg.norm(self.x_star)) or 1.0
            rel_error = float(np.linalg.norm(x - self.x_star)) / ref
        residual = self.residual(x) if self.residual is not None else None
        rec = TraceRecord(
            iter=k,
            elapsed_seconds=self.timeline.elapsed,
            rel_error=rel_error,
            residual=residual,
        )
        self.trace.append(rec)
        log.debug("iter=%d elapsed=%.4fs rel_error=%s residual=%s", k, rec.elapsed_seconds, rel_error, residual)
        return rec

    def converged(self, rec: TraceRecord) -> bool:
        if rec.rel_error is not None:
            return rec.rel_error <= self.config.target_rel_error
        target = self.config.target_rel_residual
        return target is not None and rec.residual is not None and rec.residual <= target


def _sweep(ctx: _Context, state: Vector, p: DenseMatrix | None, p_norm_sq: float, steps: int) -> None:
    """Run *steps* projections in place on *state*."""
    source, sampler = ctx.source, ctx.sampler
    for _ in range(steps):
        a, b_i = source.row(sampler.next_row_index())
        if p is None:
            norm_sq = a @ a
            if norm_sq == 0.0:
                ctx.skipped += 1
                continue
        else:
            raw_sq = a @ a
            a = a @ p
            norm_sq = a @ a
            if norm_sq <= _ANNIHILATION_TOL ** 2 * raw_sq * p_norm_sq:
                ctx.skipped += 1
                continue
        state -= ((a @ state - b_i) / norm_sq) * a


def _run_phase(
    ctx: _Context,
    state: Vector,
    k: int,
    p: DenseMatrix | None,
    stop_time: float,
    record_start: bool,
) -> tuple[int, SolveStatus]:
    """Iterate until convergence, the iteration budget or *stop_time*."""
    lift = (lambda y: y) if p is None else (lambda y: p @ y)
    p_norm_sq = float(np.sum(p * p)) if p is not None else 0.0
    n = ctx.source.col_count
    step_flops = plain_step_flops(n) if p is None else preconditioned_step_flops(n)
    max_iters = ctx.config.max_iters

    if record_start and ctx.converged(ctx.record(k, lift(state))):
        return k, SolveStatus.converged

    while True:
        next_eval = (k // ctx.eval_every + 1) * ctx.eval_every
        steps = min(ctx.chunk, max_iters - k, next_eval - k)
        ctx.timeline.resume()
        _sweep(ctx, state, p, p_norm_sq, steps)
        charge(ctx.timeline.clock, steps * step_flops, steps)
        ctx.timeline.pause()
        k += steps

        out_of_time = ctx.timeline.elapsed >= stop_time
        if k == next_eval or k >= max_iters or out_of_time:
            if ctx.converged(ctx.record(k, lift(state))):
                return k, SolveStatus.converged
        if k >= max_iters:
            return k, SolveStatus.iter_budget
        if out_of_time:
            return k, SolveStatus.time_budget


def _context(
    source: RowSource,
    config: SolveConfig,
    x_star: Vector | None,
    residual: ResidualMonitor | None,
    timeline: _Timeline,
) -> _Context:
    if x_star is not None and x_star.shape != (source.col_count,):
        raise DimensionMismatchError(f"x_star has shape {x_star.shape}, expected ({source.col_count},)")
    rng = RngStream(config.seed, STREAM_ROWS)
    return _Context(
        source=source,
        sampler=RowSampler.for_source(config.sampler, source, rng),
        config=config,
        x_star=x_star,
        residual=residual,
        timeline=timeline,
        trace=[],
        eval_every=config.resolved_eval_every(source.row_count),
        chunk=get_settings().default_eval_chunk,
    )


# ── Public solvers ────────────────────────────────────────────────────────────

def kaczmarz_solve(
    source: RowSource,
    config: SolveConfig,
    x_star: Vector | None = None,
    *,
    residual: ResidualMonitor | None = None,
    clock: Clock = time.perf_counter,
) -> SolveResult:
    """Plain Kaczmarz from x₀ = 0 with rows chosen by ``config.sampler``."""
    ctx = _context(source, config, x_star, residual, _Timeline(clock))
    x = np.zeros(source.col_count)
    k, status = _run_phase(ctx, x, 0, None, config.time_budget_seconds, record_start=True)
    log.debug("Plain Kaczmarz stopped: %s after %d iterations", status.value, k)
    return SolveResult(x=x, trace=ctx.trace, status=status, iterations=k, skipped=ctx.skipped)


def preconditioned_kaczmarz_solve(
    source: RowSource,
    p: SketchedPreconditioner,
    config: SolveConfig,
    x_star: Vector | None = None,
    *,
    residual: ResidualMonitor | None = None,
    clock: Clock = time.perf_counter,
) -> SolveResult:
    """Kaczmarz on A·P̂_R·y = b from y₀ = 0; the timeline starts at the build time."""
    if p.n != source.col_count:
        raise DimensionMismatchError(f"preconditioner is {p.n}×{p.n} but system has {source.col_count} columns")
    ctx = _context(source, config, x_star, residual, _Timeline(clock, offset=p.build_seconds))
    y = np.zeros(source.col_count)
    k, status = _run_phase(ctx, y, 0, p.p, config.time_budget_seconds, record_start=True)
    log.debug("Preconditioned Kaczmarz stopped: %s after %d iterations", status.value, k)
    return SolveResult(
        x=p.p @ y,
        trace=ctx.trace,
        status=status,
        iterations=k,
        skipped=ctx.skipped,
        preconditioner_meta=p.meta(),
    )


def fine_tuned_solve(
    source: RowSource,
    gamma: float,
    tau_seconds: float,
    config: SolveConfig,
    x_star: Vector | None = None,
    *,
    residual: ResidualMonitor | None = None,
    clock: Clock = time.perf_counter,
    sketch_rng: RngStream | None = None,
) -> SolveResult:
    """
    Plain Kaczmarz until the timeline reaches τ, then switch to the sketched
    preconditioner (built on the same timeline) and continue from the current
    iterate mapped into y-space.
    """
    if tau_seconds < 0:
        raise ValueError(f"tau must be >= 0, got {tau_seconds}")
    if tau_seconds >= config.time_budget_seconds:
        return kaczmarz_solve(source, config, x_star, residual=residual, clock=clock)

    timeline = _Timeline(clock)
    ctx = _context(source, config, x_star, residual, timeline)
    x = np.zeros(source.col_count)
    k = 0
    if tau_seconds > 0:
        k, status = _run_phase(ctx, x, 0, None, tau_seconds, record_start=True)
        if status is not SolveStatus.time_budget:
            return SolveResult(x=x, trace=ctx.trace, status=status, iterations=k, skipped=ctx.skipped)
    else:
        ctx.record(0, x)

    rng = sketch_rng or RngStream(config.seed, STREAM_SKETCH)
    p = build_sketched_preconditioner(source, gamma, rng, clock=clock)
    timeline.add(p.build_seconds)
    timeline.resume()
    y = to_preconditioned_space(p, x)
    charge(clock, triangular_solve_flops(source.col_count))
    timeline.pause()
    log.info("Fine-tuning: switched to preconditioned iteration at iter=%d (t=%.3fs)", k, timeline.elapsed)

    switch_iter = k
    if k < config.max_iters:
        k, status = _run_phase(ctx, y, k, p.p, config.time_budget_seconds, record_start=False)
    else:
        status = SolveStatus.iter_budget
    return SolveResult(
        x=p.p @ y,
        trace=ctx.trace,
        status=status,
        iterations=k,
        skipped=ctx.skipped,
        preconditioner_meta=p.meta(),
        switch_iter=switch_iter,
    )
