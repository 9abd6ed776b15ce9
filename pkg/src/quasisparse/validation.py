"""Brute-force checks of the thresholding operator and the operator algebra.

The grid oracle evaluates the scalar objective directly, so it shares no code
with the closed-form path it checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import penalty
from .operators import LogShiftOperator, adjoint_apply, apply

GRID_STEP = 1e-4
OBJECTIVE_TOL = 1e-6
ARGMIN_TOL = 1e-3
# |gamma| within this distance of t* counts as "at the discontinuity"
JUMP_MARGIN = 1e-2


def _objective(a, lam, beta, gamma):
    ab = a * np.abs(beta)
    return (beta - gamma) ** 2 + lam * ab / (ab + 1.0)


def grid_argmin(a, lam, gamma, step=GRID_STEP):
    """Minimize the scalar objective over a ``step``-spaced grid on ``[0, gamma]``.

    The minimizer always lies between 0 and gamma, so nothing outside that
    interval needs searching.  Returns ``(beta, value)``.
    """
    g = abs(gamma)
    count = int(math.floor(g / step)) + 1
    grid = np.arange(count) * step
    if grid[-1] < g:
        grid = np.append(grid, g)
    grid = math.copysign(1.0, gamma) * grid if gamma != 0 else grid
    vals = _objective(a, lam, grid, gamma)
    i = int(np.argmin(vals))
    return float(grid[i]), float(vals[i])


def sample_triples(count, seed=0, lo=0.1, hi=10.0, gamma_max=5.0):
    """``count`` (a, lam, gamma) triples: a and lam log-uniform, gamma uniform."""
    rng = np.random.default_rng(seed)
    a = np.exp(rng.uniform(math.log(lo), math.log(hi), count))
    lam = np.exp(rng.uniform(math.log(lo), math.log(hi), count))
    gamma = rng.uniform(-gamma_max, gamma_max, count)
    return list(zip(a.tolist(), lam.tolist(), gamma.tolist()))


@dataclass
class CheckResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def fail(self, **case):
        if len(self.failures) < 50:
            self.failures.append(case)
        else:
            self.failures[-1] = {**self.failures[-1], "truncated": True}

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "cases": self.cases, "failures": self.failures}


def check_prox_oracle(triples, step=GRID_STEP) -> CheckResult:
    res = CheckResult("prox_vs_grid_oracle")
    for a, lam, gamma in triples:
        p = penalty.PenaltyParams(a, lam)
        t_star = penalty.threshold_value(p).threshold
        res.cases += 1
        try:
            beta = penalty.prox_scalar(p, gamma)
        except Exception as exc:
            res.fail(a=a, lam=lam, gamma=gamma, error=repr(exc))
            continue
        b_grid, f_grid = grid_argmin(a, lam, gamma, step)
        f_prox = float(_objective(a, lam, beta, gamma))
        gap = f_prox - f_grid
        far = abs(abs(gamma) - t_star) > JUMP_MARGIN
        if abs(gap) > OBJECTIVE_TOL or (far and abs(beta - b_grid) > ARGMIN_TOL):
            res.fail(a=a, lam=lam, gamma=gamma, prox=beta, grid_argmin=b_grid, objective_gap=gap)
    return res


def check_symmetry_and_shrinkage(triples) -> CheckResult:
    res = CheckResult("odd_symmetry_and_shrinkage")
    for a, lam, gamma in triples:
        p = penalty.PenaltyParams(a, lam)
        res.cases += 1
        try:
            plus, minus = penalty.prox_scalar(p, gamma), penalty.prox_scalar(p, -gamma)
        except Exception as exc:
            res.fail(a=a, lam=lam, gamma=gamma, error=repr(exc))
            continue
        if plus != -minus or abs(plus) > abs(gamma) or plus * gamma < 0:
            res.fail(a=a, lam=lam, gamma=gamma, prox=plus, prox_neg=minus)
    return res


def check_threshold_behaviour(triples) -> CheckResult:
    res = CheckResult("zero_below_threshold_nonzero_above")
    for a, lam, _ in triples:
        p = penalty.PenaltyParams(a, lam)
        t = penalty.threshold_value(p).threshold
        res.cases += 1
        try:
            below = [penalty.prox_scalar(p, s * t * f) for s in (1, -1) for f in (0.0, 0.5, 1.0)]
            above = [penalty.prox_scalar(p, s * (t + d)) for s in (1, -1) for d in (1e-9 * max(1, t), 1e-3, 1.0)]
        except Exception as exc:
            res.fail(a=a, lam=lam, error=repr(exc))
            continue
        if any(v != 0.0 for v in below) or any(v == 0.0 for v in above):
            res.fail(a=a, lam=lam, t_star=t, below=below, above=above)
    return res


def check_threshold_order(triples) -> CheckResult:
    """The super-critical threshold never exceeds the sub-critical one."""
    res = CheckResult("threshold_order")
    for a, lam, _ in triples:
        res.cases += 1
        t1, t2 = penalty.threshold_sub(a, lam), penalty.threshold_super(a, lam)
        if t2 > t1 + 1e-12:
            res.fail(a=a, lam=lam, t1=t1, t2=t2)
    return res


def check_regime_continuity(a_values=(0.5, 1.0, 2.0, 5.0)) -> CheckResult:
    res = CheckResult("regime_continuity")
    for a in a_values:
        res.cases += 1
        lam = 1.0 / (a * a)
        t1, t2 = penalty.threshold_sub(a, lam), penalty.threshold_super(a, lam)
        if abs(t1 - t2) > 1e-12:
            res.fail(a=a, t1=t1, t2=t2)
    return res


def check_arccos_domain(triples) -> CheckResult:
    res = CheckResult("arccos_domain")
    for a, lam, gamma in triples:
        p = penalty.PenaltyParams(a, lam)
        t = penalty.threshold_value(p).threshold
        g = max(abs(gamma), t)
        res.cases += 1
        arg = float(penalty.arccos_argument(p, g))
        if not -1.0 <= arg <= 1.0 + 1e-12:
            res.fail(a=a, lam=lam, gamma=g, argument=arg)
    return res


def check_adjoint(instances=20, seed=0, m=30, n=100) -> CheckResult:
    res = CheckResult("adjoint_identity")
    rng = np.random.default_rng(seed)
    for _ in range(instances):
        op = LogShiftOperator(rng.standard_normal((m, n)), rng.standard_normal(n), eta=0.003)
        anchor, x, v = rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(m)
        lhs = float(apply(op, anchor, x) @ v)
        rhs = float(x @ adjoint_apply(op, anchor, v))
        res.cases += 1
        if abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs)):
            res.fail(lhs=lhs, rhs=rhs)
    return res


def run_all(samples=1000, seed=0) -> list:
    triples = sample_triples(samples, seed)
    return [
        check_prox_oracle(triples),
        check_symmetry_and_shrinkage(triples),
        check_threshold_behaviour(triples),
        check_threshold_order(triples),
        check_regime_continuity(),
        check_arccos_domain(triples),
        check_adjoint(seed=seed),
    ]


def oracle_prox(a, lam, gamma, step=GRID_STEP, refine=1e-8) -> float:
    """Grid-search prox value, refined to ``refine`` around the coarse minimizer."""
    beta, _ = grid_argmin(a, lam, gamma, step)
    lo, hi = sorted((beta - step, beta + step))
    fine = np.linspace(lo, hi, int(round((hi - lo) / refine)) + 1)
    # stay inside the segment between 0 and gamma
    fine = fine[(fine * np.sign(gamma) >= 0) & (np.abs(fine) <= abs(gamma))]
    candidates = np.append(fine, [0.0, beta])
    vals = _objective(a, lam, candidates, gamma)
    return float(candidates[int(np.argmin(vals))])
