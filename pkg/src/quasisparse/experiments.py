"""Seeded phase-transition sweeps over signal sparsity.

Every trial draws a fresh Gaussian ``A1`` and an ``r``-sparse signal with
N(0, 1) entries at uniformly random positions, measures it through the
log-shift operator and hands the same problem to each algorithm.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ParameterError
from .operators import LogShiftOperator, apply
from .solvers import Algorithm, SolverConfig, solve

__all__ = [
    "ExperimentSpec",
    "TrialRecord",
    "LevelSummary",
    "SweepReport",
    "trial_seed",
    "generate_problem",
    "relative_error",
    "run_trial",
    "run_sweep",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("algorithm", "r", "success_rate", "mean_relative_error", "mean_iterations")


@dataclass(frozen=True)
class ExperimentSpec:
    m: int = 30
    n: int = 100
    sparsity_levels: tuple = tuple(range(1, 16))
    trials_per_level: int = 30
    eta: float = 0.003
    a: float = 1.0
    success_threshold: float = 1e-4
    tol: float = 1e-8
    epsilon: float = 0.01
    max_iter: int = 5000
    master_seed: int = 0
    algorithms: tuple = (Algorithm.IFTA, Algorithm.ISTA, Algorithm.IHTA)
    # "truth": the nonlinearity is centred at the planted signal;
    # "random": at an independent N(0, 1) vector
    reference: str = "truth"

    def __post_init__(self):
        object.__setattr__(self, "sparsity_levels", tuple(int(r) for r in self.sparsity_levels))
        object.__setattr__(self, "algorithms", tuple(Algorithm(a) for a in self.algorithms))
        if self.m < 1 or self.n < 1:
            raise ParameterError("m and n must be positive")
        if self.trials_per_level < 1:
            raise ParameterError("trials_per_level must be at least 1")
        if not self.sparsity_levels:
            raise ParameterError("sparsity_levels is empty")
        for r in self.sparsity_levels:
            if not 0 <= r < self.m:
                raise ParameterError(f"sparsity level {r} must satisfy 0 <= r < m={self.m}")
        if not self.algorithms:
            raise ParameterError("no algorithms selected")
        if self.reference not in ("truth", "random"):
            raise ParameterError(f"unknown reference mode {self.reference!r}")
        if not self.eta >= 0:
            raise ParameterError("eta must be nonnegative")

    def solver_config(self, r: int, algorithm) -> SolverConfig:
        # r = 0 still needs a valid prior; the zero signal is a fixed point anyway
        return SolverConfig(
            a=self.a,
            sparsity_prior_r=max(int(r), 1),
            epsilon=self.epsilon,
            tol=self.tol,
            max_iter=self.max_iter,
            algorithm=Algorithm(algorithm),
        )


@dataclass
class TrialRecord:
    seed: int
    r: int
    trial: int
    algorithm: str
    relative_error: Optional[float]
    success: bool
    iterations: int
    termination: str
    fixed_point_residual: Optional[float] = None
    solution_norm: Optional[float] = None
    error: Optional[str] = None


@dataclass
class LevelSummary:
    algorithm: str
    r: int
    success_rate: float
    mean_relative_error: float
    mean_iterations: float
    trials: list = field(default_factory=list)


def trial_seed(master_seed: int, r: int, trial: int) -> int:
    """Seed for trial ``trial`` at sparsity ``r``; independent of the algorithm."""
    ss = np.random.SeedSequence([int(master_seed), int(r), int(trial)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_problem(seed: int, spec: ExperimentSpec, r: int):
    """Return ``(operator, x_true, b)`` with ``b = F(x_true) x_true``."""
    if not 0 <= r < spec.n:
        raise ParameterError(f"need 0 <= r < n, got r={r}, n={spec.n}")
    rng = np.random.default_rng(seed)
    A1 = rng.standard_normal((spec.m, spec.n))
    x_true = np.zeros(spec.n)
    support = rng.choice(spec.n, size=r, replace=False)
    x_true[support] = rng.standard_normal(r)
    if spec.reference == "truth":
        x_ref = x_true
    else:
        x_ref = rng.standard_normal(spec.n)
    op = LogShiftOperator(A1, x_ref, eta=spec.eta)
    b = apply(op, x_true, x_true)
    return op, x_true, b


def relative_error(x_hat, x_true) -> float:
    """``||x_hat - x_true|| / ||x_true||``, or ``||x_hat||`` when ``x_true = 0``."""
    x_hat = np.asarray(x_hat, dtype=float)
    x_true = np.asarray(x_true, dtype=float)
    nt = float(np.linalg.norm(x_true))
    if nt == 0.0:
        return float(np.linalg.norm(x_hat))
    return float(np.linalg.norm(x_hat - x_true)) / nt


def run_trial(seed: int, spec: ExperimentSpec, r: int, algorithm, trial: int = 0) -> TrialRecord:
    algorithm = Algorithm(algorithm)
    try:
        op, x_true, b = generate_problem(seed, spec, r)
        result = solve(op, b, spec.solver_config(r, algorithm))
    except Exception as exc:  # a failed trial must not abort a sweep
        return TrialRecord(
            seed=seed,
            r=r,
            trial=trial,
            algorithm=algorithm.value,
            relative_error=None,
            success=False,
            iterations=0,
            termination="Failed",
            error=f"{type(exc).__name__}: {exc}",
        )
    err = relative_error(result.solution, x_true)
    return TrialRecord(
        seed=seed,
        r=r,
        trial=trial,
        algorithm=algorithm.value,
        relative_error=err,
        success=err <= spec.success_threshold,
        iterations=result.iterations,
        termination=result.termination.value,
        fixed_point_residual=result.fixed_point_residual,
        solution_norm=float(np.linalg.norm(result.solution)),
    )


def _summarize(algorithm: str, r: int, trials: Sequence[TrialRecord]) -> LevelSummary:
    errs = [t.relative_error for t in trials if t.relative_error is not None]
    return LevelSummary(
        algorithm=algorithm,
        r=r,
        success_rate=sum(t.success for t in trials) / len(trials),
        mean_relative_error=float(np.mean(errs)) if errs else math.nan,
        mean_iterations=float(np.mean([t.iterations for t in trials])),
        trials=list(trials),
    )


def _run_task(args):
    return run_trial(*args)


def run_sweep(spec: ExperimentSpec, workers: int = 1, progress=None) -> "SweepReport":
    """Run every (algorithm, r, trial) combination of ``spec``.

    ``workers > 1`` fans trials out over processes; the report is identical
    either way because each trial depends only on its own seed.
    """
    tasks = [
        (trial_seed(spec.master_seed, r, i), spec, r, alg, i)
        for alg in spec.algorithms
        for r in spec.sparsity_levels
        for i in range(spec.trials_per_level)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=8))
    else:
        records = []
        for task in tasks:
            records.append(_run_task(task))
            if progress is not None:
                progress(len(records), len(tasks))

    levels = []
    per_level = spec.trials_per_level
    pos = 0
    for alg in spec.algorithms:
        for r in spec.sparsity_levels:
            levels.append(_summarize(alg.value, r, records[pos : pos + per_level]))
            pos += per_level
    return SweepReport(spec=spec, levels=levels)


@dataclass
class SweepReport:
    spec: ExperimentSpec
    levels: list

    def level(self, algorithm, r: int) -> LevelSummary:
        name = Algorithm(algorithm).value
        for lv in self.levels:
            if lv.algorithm == name and lv.r == r:
                return lv
        raise KeyError((name, r))

    def success_curve(self, algorithm) -> list:
        name = Algorithm(algorithm).value
        return [lv.success_rate for lv in self.levels if lv.algorithm == name]

    def mean_success(self, algorithm) -> float:
        return float(np.mean(self.success_curve(algorithm)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for lv in self.levels:
            writer.writerow(
                [lv.algorithm, lv.r, repr(lv.success_rate), repr(lv.mean_relative_error), repr(lv.mean_iterations)]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        spec = asdict(self.spec)
        spec["algorithms"] = [a.value for a in self.spec.algorithms]
        spec["sparsity_levels"] = list(self.spec.sparsity_levels)
        return {
            "spec": spec,
            "levels": [
                {**{k: _finite_or_none(v) for k, v in asdict(lv).items() if k != "trials"},
                 "trials": [asdict(t) for t in lv.trials]}
                for lv in self.levels
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False)

    def summary_table(self) -> str:
        lines = [f"{'algorithm':<9} {'r':>3} {'success':>8} {'mean_rel_err':>13} {'mean_iter':>10}"]
        for lv in self.levels:
            lines.append(
                f"{lv.algorithm:<9} {lv.r:>3d} {lv.success_rate:>8.3f} "
                f"{lv.mean_relative_error:>13.4e} {lv.mean_iterations:>10.1f}"
            )
        return "\n".join(lines)


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v
