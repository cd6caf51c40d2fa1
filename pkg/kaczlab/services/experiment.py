"""
Experiment runner and trace comparison behind the CLI.

``run_experiment`` expands a configuration into jobs, one per (grid variant,
seed).  A job generates its problem once and runs every configured method on
it, writing one trace CSV per (method, γ) into the output directory.  After
all jobs finish, ``summary.csv`` and ``manifest.txt`` are written.

``compare_traces`` reads a directory of traces and tabulates the median
metric of each method at shared time checkpoints.
"""
import logging
import os
import statistics
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from kaczlab import __version__
from kaczlab.config import get_settings
from kaczlab.errors import ConfigError, TraceFormatError
from kaczlab.models.experiment import ExperimentConfig, MethodKind, MethodSpec, ProblemSpec, RunSpec, SolverSpec
from kaczlab.models.preconditioner import SketchedPreconditioner
from kaczlab.models.problem import GeneratedProblem, PhantomImage, ProblemKind
from kaczlab.models.solve import SolveResult, TraceRecord
from kaczlab.services.exchange import write_image_csv, write_sidecar
from kaczlab.services.clocks import Clock, TickClock, WorkClock, charge
from kaczlab.services.precond import build_flops, build_sketched_preconditioner, exact_preconditioner
from kaczlab.services.problems import (
    add_noise,
    gen_fan_tomo,
    gen_parallel_tomo,
    gen_random_conditioned,
    gen_rff_problem,
    image_error_map,
)
from kaczlab.services.sampling import STREAM_NOISE, STREAM_PROBLEM, STREAM_SKETCH, DenseRowSource, RngStream
from kaczlab.services.solver import (
    fine_tuned_solve,
    kaczmarz_solve,
    make_residual_monitor,
    preconditioned_kaczmarz_solve,
)
from kaczlab.services.traces import SummaryRow, read_trace_csv, run_label, write_summary_csv, write_trace_csv

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.csv"
MANIFEST_FILE = "manifest.txt"
ERRMAP_DIR = "errmaps"
CHECKPOINTS = 5


# ── Configuration ─────────────────────────────────────────────────────────────

def _validation_diagnostics(exc: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}"
        for err in exc.errors()
    ]


def parse_experiment_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(source, [str(exc)]) from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(source, _validation_diagnostics(exc)) from exc


def load_experiment_config(path: str | os.PathLike) -> ExperimentConfig:
    """Read and validate a TOML experiment file; every failure is a ConfigError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), [f"cannot read file: {exc.strerror or exc}"]) from exc
    return parse_experiment_config(text, str(path))


def parse_problem_spec(path: str | os.PathLike) -> ProblemSpec:
    """Read the ``[problem]`` table of a TOML file (used by ``gen``)."""
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(str(path), [f"cannot read file: {exc.strerror or exc}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), [str(exc)]) from exc
    if "problem" not in raw:
        raise ConfigError(str(path), ["problem: missing [problem] table"])
    try:
        return ProblemSpec.model_validate(raw["problem"])
    except ValidationError as exc:
        raise ConfigError(str(path), [f"problem.{d}" for d in _validation_diagnostics(exc)]) from exc


# ── Problem construction ──────────────────────────────────────────────────────

def build_problem(spec: ProblemSpec, seed: int) -> GeneratedProblem:
    rng = RngStream(seed, STREAM_PROBLEM)
    if spec.kind is ProblemKind.random:
        problem = gen_random_conditioned(spec.m, spec.n, spec.cond, rng)
        if spec.noise_sigma > 0:
            problem = add_noise(problem, spec.noise_sigma, RngStream(seed, STREAM_NOISE))
        return problem
    if spec.kind is ProblemKind.parallel_tomo:
        return gen_parallel_tomo(spec.q, spec.n_angles, spec.n_rays, spec.phantom)
    if spec.kind is ProblemKind.fan_tomo:
        return gen_fan_tomo(spec.q, spec.n_angles, spec.n_rays, spec.source_distance, spec.phantom, spec.detector)
    return gen_rff_problem(spec.m, spec.d, spec.rff_sigma, rng, consistent=spec.consistent)


# ── Running ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class _Job:
    variant: str
    problem: ProblemSpec
    seed: int
    methods: tuple[MethodSpec, ...]
    solver: SolverSpec
    run: RunSpec
    out_dir: str


@dataclass
class RunReport:
    out_dir: Path
    rows: list[SummaryRow] = field(default_factory=list)

    @property
    def failed(self) -> list[SummaryRow]:
        return [r for r in self.rows if r.error]


def solve_with_method(
    problem: GeneratedProblem,
    method: MethodKind,
    gamma: float | None,
    tau_seconds: float | None,
    solver: SolverSpec,
    seed: int,
    clock: Clock = time.perf_counter,
) -> SolveResult:
    """Run one configured method on *problem* with the harness's residual monitor."""
    source = DenseRowSource.from_problem(problem)
    config = solver.to_config(seed)
    residual = make_residual_monitor(problem.a, problem.b)
    x_star = problem.x_star

    if method is MethodKind.plain:
        return kaczmarz_solve(source, config, x_star, residual=residual, clock=clock)
    if method is MethodKind.fine_tuned:
        return fine_tuned_solve(source, gamma, tau_seconds, config, x_star, residual=residual, clock=clock)
    if method is MethodKind.identity:
        p = SketchedPreconditioner.identity(source.col_count)
    elif method is MethodKind.exact:
        started = clock()
        matrix = exact_preconditioner(problem.a)
        charge(clock, build_flops(*problem.shape))
        p = SketchedPreconditioner.from_matrix(matrix, build_seconds=clock() - started)
    else:
        p = build_sketched_preconditioner(source, gamma, RngStream(seed, STREAM_SKETCH), clock=clock)
    return preconditioned_kaczmarz_solve(source, p, config, x_star, residual=residual, clock=clock)


def make_clock(run: RunSpec) -> Clock:
    """A fresh clock for one run, as selected by ``[run] clock``."""
    if run.clock == "counter":
        return TickClock(run.tick_seconds)
    if run.clock == "work":
        return WorkClock(run.flop_seconds, run.step_seconds)
    return time.perf_counter


def _run_job(job: _Job) -> list[SummaryRow]:
    out_dir = Path(job.out_dir)
    problem = build_problem(job.problem, job.seed)
    phantom = None
    if problem.kind in (ProblemKind.parallel_tomo, ProblemKind.fan_tomo):
        q = int(problem.metadata["q"])
        phantom = PhantomImage(pixels=problem.x_star.reshape(q, q).copy())

    rows = []
    for spec in job.methods:
        for name, gamma in spec.expand():
            label = run_label(name, gamma, job.seed, job.variant)
            row = SummaryRow(variant=job.variant, method=name, gamma=gamma, seed=job.seed)
            clock = make_clock(job.run)
            try:
                result = solve_with_method(
                    problem, MethodKind(name), gamma, spec.tau_seconds, job.solver, job.seed, clock
                )
            except Exception as exc:  # noqa: BLE001
                log.warning("Run %s failed: %s", label, exc)
                rows.append(row.model_copy(update={"error": f"{type(exc).__name__}: {exc}"}))
                continue

            trace_path = write_trace_csv(out_dir / f"{label}.csv", result.trace)
            if phantom is not None:
                write_image_csv(out_dir / ERRMAP_DIR / f"{label}.errmap.csv", image_error_map(phantom, result.x))
            final = result.final
            meta = result.preconditioner_meta
            rows.append(
                row.model_copy(
                    update={
                        "status": result.status.value,
                        "iterations": result.iterations,
                        "skipped": result.skipped,
                        "final_rel_error": final.rel_error,
                        "final_residual": final.residual,
                        "wall_seconds": final.elapsed_seconds,
                        "build_seconds": meta.build_seconds if meta else None,
                        "used_pseudoinverse": meta.used_pseudoinverse if meta else None,
                        "trace_file": trace_path.name,
                    }
                )
            )
            log.info(
                "Run %s: %s after %d iterations, rel_error=%s residual=%s",
                label, result.status.value, result.iterations, final.rel_error, final.residual,
            )
    return rows


def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, out)
    elif isinstance(value, list) and value and isinstance(value[0], dict):
        for i, item in enumerate(value):
            _flatten(f"{prefix}.{i}", item, out)
    else:
        out[prefix] = value


def write_manifest(path: Path, config: ExperimentConfig, out_dir: Path) -> Path:
    values: dict = {"kaczlab_version": __version__, "resolved_output_dir": str(out_dir)}
    _flatten("", config.model_dump(mode="json"), values)
    return write_sidecar(path, values)


def resolve_output_dir(config: ExperimentConfig, override: str | None = None) -> Path:
    return Path(override or get_settings().output_dir or config.run.output_dir)


def run_experiment(config: ExperimentConfig, output_dir: str | None = None) -> RunReport:
    """Run every (variant, seed) job and write traces, summary and manifest."""
    out_dir = resolve_output_dir(config, output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        _Job(
            variant=label,
            problem=problem,
            seed=seed,
            methods=tuple(config.methods),
            solver=config.solver,
            run=config.run,
            out_dir=str(out_dir),
        )
        for label, problem in config.variants()
        for seed in config.run.seeds
    ]
    log.info("Running %d jobs (%s) into %s", len(jobs), config.problem.describe(), out_dir)

    if config.run.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.run.workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(job) for job in jobs]

    report = RunReport(out_dir=out_dir, rows=[row for rows in results for row in rows])
    write_summary_csv(out_dir / SUMMARY_FILE, report.rows)
    write_manifest(out_dir / MANIFEST_FILE, config, out_dir)
    if report.failed:
        log.warning("%d of %d runs failed; see %s", len(report.failed), len(report.rows), SUMMARY_FILE)
    return report


# ── Comparison ────────────────────────────────────────────────────────────────

@dataclass
class TraceCurve:
    """One run's metric over time (rel_error when known, residual otherwise)."""

    times: np.ndarray
    values: np.ndarray

    @classmethod
    def from_records(cls, records: list[TraceRecord]) -> "TraceCurve | None":
        points = [
            (r.elapsed_seconds, r.rel_error if r.rel_error is not None else r.residual)
            for r in records
        ]
        points = [(t, v) for t, v in points if v is not None]
        if not points:
            return None
        t, v = zip(*points)
        return cls(times=np.asarray(t), values=np.asarray(v))

    def at(self, t: float) -> float:
        """Value of the last record at or before *t* (step interpolation)."""
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(i, 0)])


@dataclass
class MethodGroup:
    variant: str
    method: str
    gamma: float | None
    curves: list[TraceCurve]

    @property
    def label(self) -> str:
        return self.method if self.gamma is None else f"{self.method}(gamma={self.gamma:g})"

    def median_at(self, t: float) -> float:
        return statistics.median(c.at(t) for c in self.curves)

    @property
    def start(self) -> float:
        return max(float(c.times[0]) for c in self.curves)

    @property
    def end(self) -> float:
        return min(float(c.times[-1]) for c in self.curves)

    @property
    def final(self) -> float:
        return statistics.median(float(c.values[-1]) for c in self.curves)


@dataclass
class VariantComparison:
    variant: str
    groups: list[MethodGroup]
    checkpoints: list[float]
    crossings: dict[str, float | None]
    min_winning_gamma: float | None


@dataclass
class CompareReport:
    variants: list[VariantComparison]
    warnings: list[str]


def parse_run_label(stem: str) -> tuple[str, str, float | None]:
    """Inverse of ``run_label`` (seed dropped): (variant, method, γ)."""
    parts = stem.split("__")
    variant = parts[0] if len(parts) == 3 else ""
    method_part = parts[-2] if len(parts) >= 2 else parts[0]
    method, gamma = method_part, None
    if "_g" in method_part:
        head, _, tail = method_part.rpartition("_g")
        try:
            method, gamma = head, float(tail)
        except ValueError:
            pass
    return variant, method, gamma


def _crossing_time(plain: MethodGroup, other: MethodGroup) -> float | None:
    start, end = max(plain.start, other.start), min(plain.end, other.end)
    if start > end:
        return None
    times = np.unique(np.concatenate([c.times for c in plain.curves + other.curves]))
    for t in times[(times >= start) & (times <= end)]:
        if other.median_at(t) < plain.median_at(t):
            return float(t)
    return None


def compare_traces(trace_dir: str | os.PathLike) -> CompareReport:
    """Group the traces in *trace_dir* by (variant, method, γ) and compare them."""
    warnings: list[str] = []
    groups: dict[tuple[str, str, float | None], MethodGroup] = {}
    for path in sorted(Path(trace_dir).glob("*.csv")):
        if path.name == SUMMARY_FILE:
            continue
        try:
            curve = TraceCurve.from_records(read_trace_csv(path))
        except TraceFormatError as exc:
            log.warning("Skipping malformed trace: %s", exc)
            warnings.append(str(exc))
            continue
        if curve is None:
            warnings.append(f"{path}: no metric values")
            continue
        variant, method, gamma = parse_run_label(path.stem)
        key = (variant, method, gamma)
        groups.setdefault(key, MethodGroup(variant, method, gamma, [])).curves.append(curve)

    variants = []
    for variant in sorted({k[0] for k in groups}):
        members = [g for k, g in sorted(groups.items(), key=lambda kv: (kv[0][1], kv[0][2] or 0.0)) if k[0] == variant]
        start = max(g.start for g in members)
        end = min(g.end for g in members)
        checkpoints = [] if start > end else [float(t) for t in np.linspace(start, end, CHECKPOINTS)]
        if len(set(checkpoints)) == 1:
            checkpoints = checkpoints[:1]

        plain = next((g for g in members if g.method == MethodKind.plain.value), None)
        crossings: dict[str, float | None] = {}
        winning: list[float] = []
        if plain is not None:
            for g in members:
                if g is plain or g.method not in (MethodKind.preconditioned.value, MethodKind.fine_tuned.value,
                                                  MethodKind.exact.value):
                    continue
                crossings[g.label] = _crossing_time(plain, g)
                if g.method == MethodKind.preconditioned.value and g.gamma is not None and g.final < plain.final:
                    winning.append(g.gamma)
        variants.append(
            VariantComparison(
                variant=variant,
                groups=members,
                checkpoints=checkpoints,
                crossings=crossings,
                min_winning_gamma=min(winning) if winning else None,
            )
        )
    return CompareReport(variants=variants, warnings=warnings)
