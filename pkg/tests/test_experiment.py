"""
tests/test_experiment.py — configuration loading, the experiment runner and
trace comparison (kaczlab/services/experiment.py).

Runner tests use the counter or work clock so every file they produce is
reproducible byte for byte.
"""
import time

import numpy as np
import pytest

import kaczlab.services.experiment as experiment
from kaczlab.errors import ConfigError
from kaczlab.models.experiment import MethodKind, ProblemSpec, SolverSpec
from kaczlab.models.problem import ProblemKind
from kaczlab.models.solve import TraceRecord
from kaczlab.services.clocks import TickClock, WorkClock
from kaczlab.services.exchange import read_sidecar
from kaczlab.services.experiment import (
    MANIFEST_FILE,
    SUMMARY_FILE,
    build_problem,
    compare_traces,
    load_experiment_config,
    make_clock,
    parse_experiment_config,
    parse_problem_spec,
    parse_run_label,
    run_experiment,
    solve_with_method,
)
from kaczlab.services.precond import build_flops
from kaczlab.services.traces import read_summary_csv, write_trace_csv

SMALL_EXPERIMENT = """
[problem]
kind = "random"
m = 60
n = 4
cond = 10.0

[solver]
max_iters = 600
time_budget_seconds = 100.0
target_rel_error = 0.0
eval_every = 60

[[methods]]
kind = "plain"

[[methods]]
kind = "identity"

[[methods]]
kind = "preconditioned"
gammas = [1, 2]

[[methods]]
kind = "fine_tuned"
gamma = 2
tau_seconds = 0.002

[[methods]]
kind = "exact"

[run]
seeds = [0, 1]
clock = "counter"
tick_seconds = 0.001
"""

EXPECTED_TRACES = sorted(
    f"{stem}__seed{seed}.csv"
    for seed in (0, 1)
    for stem in ("plain", "identity", "preconditioned_g1", "preconditioned_g2", "fine_tuned_g2", "exact")
)


def _config(text: str = SMALL_EXPERIMENT, **run_overrides):
    config = parse_experiment_config(text)
    if run_overrides:
        config = config.model_copy(update={"run": config.run.model_copy(update=run_overrides)})
    return config


def _write_curve(path, times, values):
    write_trace_csv(
        path,
        [TraceRecord(iter=10 * i, elapsed_seconds=t, rel_error=v) for i, (t, v) in enumerate(zip(times, values))],
    )


# ── Configuration ─────────────────────────────────────────────────────────────

def test_parse_small_experiment():
    config = _config()
    assert config.problem.kind is ProblemKind.random
    assert config.solver.eval_every == 60
    assert [m.kind for m in config.methods] == [
        MethodKind.plain, MethodKind.identity, MethodKind.preconditioned, MethodKind.fine_tuned, MethodKind.exact,
    ]
    assert config.methods[2].expand() == [("preconditioned", 1.0), ("preconditioned", 2.0)]
    assert config.run.clock == "counter"


def test_empty_method_list_is_rejected():
    text = "methods = []\n" + SMALL_EXPERIMENT.split("[[methods]]")[0] + "[run]\nseeds = [0]\n"
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(text, "exp.toml")
    assert info.value.source == "exp.toml"
    assert any(d.startswith("methods") for d in info.value.diagnostics)


def test_toml_syntax_error_names_the_line():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config("[problem\nkind = 'random'\n")
    assert "line" in info.value.diagnostics[0]


def test_unknown_grid_key_is_rejected():
    text = SMALL_EXPERIMENT + "\n[grid]\nphantom_size = [8, 16]\n"
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(text)
    assert any("phantom_size" in d for d in info.value.diagnostics)


@pytest.mark.parametrize(
    "method",
    [
        'kind = "preconditioned"',
        'kind = "preconditioned"\ngammas = [0.5]',
        'kind = "fine_tuned"\ngamma = 2',
        'kind = "sketch"',
    ],
)
def test_invalid_methods(method):
    text = f'[problem]\nkind = "random"\n[[methods]]\n{method}\n[run]\nseeds = [0]\n'
    with pytest.raises(ConfigError):
        parse_experiment_config(text)


def test_unknown_field_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_experiment_config(SMALL_EXPERIMENT.replace("cond = 10.0", "cond = 10.0\nrank = 3"))
    assert any(d.startswith("problem.rank") for d in info.value.diagnostics)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_experiment_config(tmp_path / "absent.toml")
    assert "cannot read file" in info.value.diagnostics[0]


def test_load_config_from_file(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(SMALL_EXPERIMENT)
    assert load_experiment_config(path) == _config()


def test_problem_spec_file(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text('[problem]\nkind = "parallel_tomo"\nq = 8\nn_angles = 6\n')
    spec = parse_problem_spec(path)
    assert spec.kind is ProblemKind.parallel_tomo and spec.q == 8

    path.write_text("[solver]\nmax_iters = 3\n")
    with pytest.raises(ConfigError) as info:
        parse_problem_spec(path)
    assert info.value.diagnostics == ["problem: missing [problem] table"]

    path.write_text('[problem]\nkind = "parallel_tomo"\nq = 4\n')
    with pytest.raises(ConfigError) as info:
        parse_problem_spec(path)
    assert info.value.diagnostics[0].startswith("problem.q")


def test_grid_variants():
    config = _config(SMALL_EXPERIMENT + "\n[grid]\nnoise_sigma = [0.1, 0.01]\nn = [4]\n")
    variants = config.variants()
    assert [label for label, _ in variants] == ["n=4,noise_sigma=0.1", "n=4,noise_sigma=0.01"]
    assert [spec.noise_sigma for _, spec in variants] == [0.1, 0.01]
    assert all(spec.n == 4 and spec.m == 60 for _, spec in variants)


def test_no_grid_gives_single_variant():
    assert _config().variants() == [("", _config().problem)]


# ── Problem construction ──────────────────────────────────────────────────────

def test_build_random_problem_with_noise():
    spec = ProblemSpec(kind="random", m=40, n=4, cond=10.0, noise_sigma=0.1)
    problem = build_problem(spec, 3)
    again = build_problem(spec, 3)
    assert not problem.consistent
    assert np.array_equal(problem.b, again.b)
    assert np.linalg.norm(problem.a @ problem.x_star - problem.b) > 0


@pytest.mark.parametrize(
    "spec, shape",
    [
        (ProblemSpec(kind="parallel_tomo", q=8, n_angles=6), (72, 64)),
        (ProblemSpec(kind="fan_tomo", q=8, n_angles=6, n_rays=5), (30, 64)),
        (ProblemSpec(kind="rff", m=50, d=3), (50, 6)),
    ],
)
def test_build_other_problems(spec, shape):
    assert build_problem(spec, 0).shape == shape


def test_build_curved_fan_and_kak_phantom():
    spec = ProblemSpec(kind="fan_tomo", q=8, n_angles=6, n_rays=5, detector="curved", phantom="kak_slaney")
    problem = build_problem(spec, 0)
    assert problem.metadata["detector"] == "curved"
    assert problem.metadata["phantom"] == "kak_slaney"
    assert problem.x_star.max() == pytest.approx(2.0)


def test_build_consistent_rff():
    problem = build_problem(ProblemSpec(kind="rff", m=50, d=3, consistent=True), 0)
    assert problem.consistent and problem.x_star is not None


def test_identity_method_matches_plain(small_problem):
    solver = SolverSpec(max_iters=500, eval_every=100, target_rel_error=0.0)
    plain = solve_with_method(small_problem, MethodKind.plain, None, None, solver, 2)
    identity = solve_with_method(small_problem, MethodKind.identity, None, None, solver, 2)
    assert np.array_equal(plain.x, identity.x)


def test_exact_method_records_build_time(small_problem):
    solver = SolverSpec(max_iters=240, eval_every=120)
    result = solve_with_method(small_problem, MethodKind.exact, None, None, solver, 0, TickClock(0.25))
    assert result.preconditioner_meta.build_seconds == 0.25
    assert result.trace[0].elapsed_seconds == 0.25


def test_exact_method_billed_on_work_clock(small_problem):
    solver = SolverSpec(max_iters=240, eval_every=120)
    result = solve_with_method(small_problem, MethodKind.exact, None, None, solver, 0, WorkClock(1.0, 0.0))
    assert result.preconditioner_meta.build_seconds == pytest.approx(build_flops(120, 6))


def test_make_clock_follows_run_setting():
    assert make_clock(_config(clock="wall").run) is time.perf_counter

    counter = make_clock(_config().run)
    assert isinstance(counter, TickClock)
    assert counter.tick == 0.001

    work = make_clock(_config(clock="work", flop_seconds=1e-9, step_seconds=1e-6).run)
    assert isinstance(work, WorkClock)
    assert (work.flop_seconds, work.step_seconds) == (1e-9, 1e-6)
    assert work() == 0.0


def test_work_clock_prices_identity_above_plain(small_problem):
    run = _config(clock="work").run
    solver = SolverSpec(max_iters=600, eval_every=120, target_rel_error=0.0)
    plain = solve_with_method(small_problem, MethodKind.plain, None, None, solver, 0, make_clock(run))
    identity = solve_with_method(small_problem, MethodKind.identity, None, None, solver, 0, make_clock(run))
    assert np.array_equal(plain.x, identity.x)
    assert identity.final.elapsed_seconds > plain.final.elapsed_seconds


# ── Running ───────────────────────────────────────────────────────────────────

def test_run_writes_traces_summary_and_manifest(tmp_path):
    report = run_experiment(_config(), str(tmp_path))
    assert report.out_dir == tmp_path
    assert sorted(p.name for p in tmp_path.glob("*__seed*.csv")) == EXPECTED_TRACES
    assert not report.failed

    rows = read_summary_csv(tmp_path / SUMMARY_FILE)
    assert rows == report.rows
    assert len(rows) == 12
    for row in rows:
        assert row.iterations == 600 or row.status == "Converged"
        assert (tmp_path / row.trace_file).exists()
    fine = [r for r in rows if r.method == "fine_tuned"]
    assert all(r.build_seconds is not None and r.used_pseudoinverse is False for r in fine)

    manifest = read_sidecar(tmp_path / MANIFEST_FILE)
    assert manifest["resolved_output_dir"] == str(tmp_path)
    assert manifest["problem"]["kind"] == "random"
    assert manifest["run"]["seeds"] == [0, 1]
    assert manifest["methods"]["2"]["gammas"] == [1.0, 2.0]
    assert "kaczlab_version" in manifest


def test_counter_clock_runs_are_reproducible(tmp_path):
    run_experiment(_config(), str(tmp_path / "a"))
    run_experiment(_config(), str(tmp_path / "b"))
    for name in [*EXPECTED_TRACES, SUMMARY_FILE]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_work_clock_runs_are_reproducible(tmp_path):
    run_experiment(_config(clock="work"), str(tmp_path / "a"))
    run_experiment(_config(clock="work"), str(tmp_path / "b"))
    for name in [*EXPECTED_TRACES, SUMMARY_FILE]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_identity_trace_equals_plain_trace(tmp_path):
    run_experiment(_config(), str(tmp_path))
    for seed in (0, 1):
        plain = (tmp_path / f"plain__seed{seed}.csv").read_bytes()
        assert (tmp_path / f"identity__seed{seed}.csv").read_bytes() == plain


def test_failed_run_is_recorded_and_others_continue(tmp_path, monkeypatch):
    def _broken(*args, **kwargs):
        raise RuntimeError("sketch failed")

    monkeypatch.setattr(experiment, "build_sketched_preconditioner", _broken)
    report = run_experiment(_config(), str(tmp_path))
    assert len(report.rows) == 12
    assert len(report.failed) == 4
    for row in report.failed:
        assert row.method == "preconditioned"
        assert row.error == "RuntimeError: sketch failed"
        assert row.trace_file == ""
    assert not list(tmp_path.glob("preconditioned_*.csv"))
    assert (tmp_path / "plain__seed0.csv").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("KACZLAB_OUTPUT_DIR", str(tmp_path / "env"))
    experiment.get_settings.cache_clear()
    report = run_experiment(_config())
    assert report.out_dir == tmp_path / "env"
    assert (tmp_path / "env" / SUMMARY_FILE).exists()


def test_parallel_workers_match_serial(tmp_path):
    run_experiment(_config(), str(tmp_path / "serial"))
    run_experiment(_config(workers=2), str(tmp_path / "pool"))
    for name in [*EXPECTED_TRACES, SUMMARY_FILE]:
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "pool" / name).read_bytes()


def test_tomography_run_writes_error_maps(tmp_path):
    text = """
[problem]
kind = "parallel_tomo"
q = 8
n_angles = 6

[solver]
max_iters = 200

[[methods]]
kind = "plain"

[run]
seeds = [0]
clock = "counter"
"""
    run_experiment(_config(text), str(tmp_path))
    emap = np.loadtxt(tmp_path / "errmaps" / "plain__seed0.errmap.csv", delimiter=",")
    assert emap.shape == (8, 8)
    assert np.all(emap >= 0)


# ── Comparison ────────────────────────────────────────────────────────────────

@pytest.fixture()
def trace_dir(tmp_path):
    for seed in (0, 1):
        _write_curve(tmp_path / f"plain__seed{seed}.csv", [0, 1, 2, 3, 4], [1.0, 0.5, 0.25, 0.125, 0.0625])
    _write_curve(tmp_path / "preconditioned_g2__seed0.csv", [1, 2, 3, 4], [0.9, 0.3, 0.05, 0.01])
    _write_curve(tmp_path / "preconditioned_g1__seed0.csv", [1, 2, 3, 4], [1.0, 0.9, 0.8, 0.7])
    (tmp_path / SUMMARY_FILE).write_text("variant,method\n")
    return tmp_path


def test_compare_groups_and_checkpoints(trace_dir):
    report = compare_traces(trace_dir)
    assert report.warnings == []
    (variant,) = report.variants
    assert variant.variant == ""
    labels = [g.label for g in variant.groups]
    assert labels == ["plain", "preconditioned(gamma=1)", "preconditioned(gamma=2)"]
    assert len(variant.groups[0].curves) == 2
    assert variant.checkpoints == pytest.approx([1.0, 1.75, 2.5, 3.25, 4.0])
    assert variant.groups[0].median_at(2.5) == 0.25


def test_compare_crossings_and_winning_gamma(trace_dir):
    (variant,) = compare_traces(trace_dir).variants
    assert variant.crossings == {"preconditioned(gamma=1)": None, "preconditioned(gamma=2)": 3.0}
    assert variant.min_winning_gamma == 2.0


def test_compare_single_trace(tmp_path):
    _write_curve(tmp_path / "plain__seed0.csv", [0, 1, 2, 3, 4], [1.0, 0.5, 0.25, 0.125, 0.0625])
    (variant,) = compare_traces(tmp_path).variants
    assert variant.crossings == {}
    assert variant.min_winning_gamma is None
    assert variant.checkpoints == pytest.approx([0.0, 1.0, 2.0, 3.0, 4.0])


def test_compare_disjoint_time_ranges(tmp_path):
    _write_curve(tmp_path / "plain__seed0.csv", [0, 1], [1.0, 0.5])
    _write_curve(tmp_path / "exact__seed0.csv", [5, 6], [0.1, 0.01])
    (variant,) = compare_traces(tmp_path).variants
    assert variant.checkpoints == []
    assert variant.crossings == {"exact": None}


def test_compare_skips_malformed_files(trace_dir):
    (trace_dir / "broken__seed0.csv").write_text("not,a,trace\n")
    report = compare_traces(trace_dir)
    assert len(report.variants) == 1
    assert len(report.warnings) == 1
    assert "broken__seed0.csv" in report.warnings[0]


def test_compare_separates_variants(tmp_path):
    for variant in ("n=4", "n=8"):
        _write_curve(tmp_path / f"{variant}__plain__seed0.csv", [0, 1], [1.0, 0.5])
    report = compare_traces(tmp_path)
    assert [v.variant for v in report.variants] == ["n=4", "n=8"]


@pytest.mark.parametrize(
    "stem, parsed",
    [
        ("plain__seed0", ("", "plain", None)),
        ("preconditioned_g2__seed3", ("", "preconditioned", 2.0)),
        ("fine_tuned_g1.5__seed0", ("", "fine_tuned", 1.5)),
        ("noise_sigma=0.01__preconditioned_g3__seed1", ("noise_sigma=0.01", "preconditioned", 3.0)),
        ("n=4,noise_sigma=1e-05__exact__seed2", ("n=4,noise_sigma=1e-05", "exact", None)),
    ],
)
def test_parse_run_label(stem, parsed):
    assert parse_run_label(stem) == parsed
