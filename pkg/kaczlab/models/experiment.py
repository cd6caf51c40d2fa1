"""
Schema of an experiment configuration file.

The file is TOML (sectioned ``key = value`` lines); see docs/configuration.md
for the full reference.  Example:

    [problem]
    kind = "random"
    m = 2000
    n = 50
    cond = 1e5

    [grid]
    noise_sigma = [1e-1, 1e-2, 1e-3, 1e-4]

    [solver]
    sampler = "uniform"
    max_iters = 80000

    [[methods]]
    kind = "plain"

    [[methods]]
    kind = "preconditioned"
    gammas = [1, 2, 3]

    [run]
    seeds = [0, 1, 2]
    output_dir = "results/noise"
"""
import enum
import itertools
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from kaczlab.models.problem import FanDetector, PhantomVariant, ProblemKind
from kaczlab.models.solve import RowSamplerKind, SolveConfig


class ProblemSpec(BaseModel):
    """Generator and its parameters; fields irrelevant to ``kind`` are ignored."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ProblemKind
    # random
    m: int = Field(2000, ge=2)
    n: int = Field(50, ge=2)
    cond: float = Field(1e5, ge=1)
    noise_sigma: float = Field(0.0, ge=0)
    # tomography
    q: int = Field(16, ge=8)
    n_angles: int = Field(36, ge=1)
    n_rays: int | None = Field(None, ge=1)
    phantom: PhantomVariant = PhantomVariant.original
    source_distance: float = Field(2.0, gt=0)
    detector: FanDetector = FanDetector.flat
    # rff
    d: int = Field(5, ge=2)
    rff_sigma: float = Field(1.0, gt=0)
    consistent: bool = False

    def describe(self) -> str:
        if self.kind is ProblemKind.random:
            return f"random m={self.m} n={self.n} cond={self.cond:g} noise_sigma={self.noise_sigma:g}"
        if self.kind is ProblemKind.rff:
            return f"rff m={self.m} d={self.d} sigma={self.rff_sigma:g}"
        return f"{self.kind.value} q={self.q} n_angles={self.n_angles}"


class MethodKind(str, enum.Enum):
    plain = "plain"
    preconditioned = "preconditioned"
    fine_tuned = "fine_tuned"
    identity = "identity"
    exact = "exact"


class MethodSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: MethodKind
    gammas: list[float] = Field(default_factory=list)
    gamma: float | None = None
    tau_seconds: float | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.kind is MethodKind.preconditioned:
            if not self.gammas:
                raise ValueError("preconditioned method needs a non-empty 'gammas' list")
            if any(g < 1 for g in self.gammas):
                raise ValueError("every gamma must be >= 1")
        if self.kind is MethodKind.fine_tuned:
            if self.gamma is None or self.gamma < 1:
                raise ValueError("fine_tuned method needs 'gamma' >= 1")
            if self.tau_seconds is None:
                raise ValueError("fine_tuned method needs 'tau_seconds'")
        return self

    def expand(self) -> list[tuple[str, float | None]]:
        """(method name, γ) for every run this entry produces."""
        if self.kind is MethodKind.preconditioned:
            return [(self.kind.value, float(g)) for g in self.gammas]
        if self.kind is MethodKind.fine_tuned:
            return [(self.kind.value, float(self.gamma))]
        return [(self.kind.value, None)]


class SolverSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    sampler: RowSamplerKind = RowSamplerKind.uniform
    max_iters: int = Field(100_000, ge=1)
    time_budget_seconds: float = Field(60.0, gt=0)
    target_rel_error: float = Field(1e-10, ge=0)
    target_rel_residual: float | None = Field(None, ge=0)
    eval_every: int | None = Field(None, ge=1)

    def to_config(self, seed: int) -> SolveConfig:
        return SolveConfig(seed=seed, **self.model_dump())


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seeds: list[int] = Field(min_length=1)
    output_dir: str = "results"
    workers: int = Field(1, ge=1)
    clock: Literal["wall", "counter", "work"] = "wall"
    tick_seconds: float = Field(1e-3, gt=0)
    # Prices of the "work" clock.
    flop_seconds: float = Field(1e-10, ge=0)
    step_seconds: float = Field(3e-6, ge=0)

    @field_validator("seeds")
    @classmethod
    def _non_negative(cls, seeds: list[int]) -> list[int]:
        if any(s < 0 for s in seeds):
            raise ValueError("seeds must be non-negative")
        return seeds


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    problem: ProblemSpec
    grid: dict[str, list[float]] = Field(default_factory=dict)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    methods: list[MethodSpec] = Field(min_length=1)
    run: RunSpec

    @field_validator("grid")
    @classmethod
    def _known_grid_fields(cls, grid: dict[str, list[float]]) -> dict[str, list[float]]:
        numeric = {"m", "n", "cond", "noise_sigma", "q", "n_angles", "n_rays", "source_distance", "d", "rff_sigma"}
        for key, values in grid.items():
            if key not in numeric:
                raise ValueError(f"grid key {key!r} is not a numeric problem field")
            if not values:
                raise ValueError(f"grid key {key!r} has no values")
        return grid

    def variants(self) -> list[tuple[str, ProblemSpec]]:
        """(label, problem) for every point of the grid; one unlabeled variant without a grid."""
        if not self.grid:
            return [("", self.problem)]
        keys = sorted(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            label = ",".join(f"{k}={format(v, 'g')}" for k, v in zip(keys, combo))
            update = self.problem.model_dump()
            update.update(dict(zip(keys, combo)))
            out.append((label, ProblemSpec.model_validate(update)))
        return out
