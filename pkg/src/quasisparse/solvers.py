"""Iterative thresholding solvers for quasi-linear sparse recovery.

All three algorithms share one loop: a Landweber step linearized at the
current iterate with step size ``(1 - epsilon) / ||F(x^k)||_2**2``, followed
by a thresholding rule driven by the sparsity prior ``r``.

* IFTA: fraction-penalty thresholding, regularization weight chosen from the
  r-th and (r+1)-th largest magnitudes of the step output.
* ISTA: soft thresholding at the (r+1)-th largest magnitude.
* IHTA: keep the r largest magnitudes.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import penalty as _penalty
from .errors import DimensionError, ParameterError
from .operators import POWER_MAX_ITER, POWER_TOL, QuasiLinearOperator, _power_iteration

log = logging.getLogger(__name__)

__all__ = [
    "Algorithm",
    "Termination",
    "LambdaRegime",
    "SolverConfig",
    "AdaptiveLambda",
    "IterationRecord",
    "RecoveryResult",
    "adaptive_lambda",
    "soft_threshold",
    "keep_top_r",
    "ifta_solve",
    "ista_solve",
    "ihta_solve",
    "solve",
    "fixed_point_residual",
    "objective_value",
]


class Algorithm(str, enum.Enum):
    IFTA = "ifta"
    ISTA = "ista"
    IHTA = "ihta"


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"


class LambdaRegime(str, enum.Enum):
    LAMBDA1 = "Lambda1"
    LAMBDA2 = "Lambda2"
    SOFT = "Soft"
    HARD = "Hard"


@dataclass(frozen=True)
class SolverConfig:
    a: float = 1.0
    sparsity_prior_r: int = 1
    epsilon: float = 0.01
    tol: float = 1e-8
    max_iter: int = 5000
    algorithm: Algorithm = Algorithm.IFTA

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a!r}")
        if int(self.sparsity_prior_r) != self.sparsity_prior_r or self.sparsity_prior_r < 1:
            raise ParameterError(
                f"sparsity_prior_r must be a positive integer, got {self.sparsity_prior_r!r}"
            )
        if not 0 < self.epsilon < 1:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be positive, got {self.tol!r}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ParameterError(f"max_iter must be a positive integer, got {self.max_iter!r}")

    def check_dimension(self, n: int) -> None:
        if self.sparsity_prior_r >= n and self.algorithm is not Algorithm.IHTA:
            raise ParameterError(
                f"sparsity_prior_r={self.sparsity_prior_r} must be smaller than n={n}"
            )
        if self.sparsity_prior_r > n:
            raise ParameterError(
                f"sparsity_prior_r={self.sparsity_prior_r} exceeds n={n}"
            )


@dataclass(frozen=True)
class AdaptiveLambda:
    lam: float
    regime: LambdaRegime
    threshold: float


@dataclass
class IterationRecord:
    """One line of the iteration trace.

    ``residual_norm`` is measured at the anchor of the step, i.e. before the
    update.
    """

    k: int
    lam: Optional[float]
    regime: str
    mu: float
    t_star: float
    nnz: int
    rel_change: float
    residual_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RecoveryResult:
    solution: np.ndarray
    iterations: int
    termination: Termination
    final_relative_change: float
    objective: float
    residual_norm: float
    fixed_point_residual: float
    lambda_trace: list = field(default_factory=list)
    algorithm: Algorithm = Algorithm.IFTA

    @property
    def converged(self) -> bool:
        return self.termination is Termination.CONVERGED

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm.value,
            "solution": self.solution.tolist(),
            "iterations": self.iterations,
            "termination": self.termination.value,
            "final_relative_change": self.final_relative_change,
            "objective": self.objective,
            "residual_norm": self.residual_norm,
            "fixed_point_residual": self.fixed_point_residual,
            "lambda_trace": [[lam, regime] for lam, regime in self.lambda_trace],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RecoveryResult":
        return cls(
            solution=np.asarray(doc["solution"], dtype=float),
            iterations=int(doc["iterations"]),
            termination=Termination(doc["termination"]),
            final_relative_change=float(doc["final_relative_change"]),
            objective=float(doc["objective"]),
            residual_norm=float(doc["residual_norm"]),
            fixed_point_residual=float(doc["fixed_point_residual"]),
            lambda_trace=[(lam, regime) for lam, regime in doc["lambda_trace"]],
            algorithm=Algorithm(doc.get("algorithm", "ifta")),
        )


def _descending_magnitudes(z):
    """Magnitudes of ``z`` sorted in decreasing order, ties by ascending index."""
    mags = np.abs(z)
    order = np.argsort(-mags, kind="stable")
    return mags, order


def _lambda_state(a, mu, lam) -> AdaptiveLambda:
    if lam <= 1.0 / (a * a * mu):
        return AdaptiveLambda(lam, LambdaRegime.LAMBDA1, _penalty.threshold_sub(a, lam * mu))
    return AdaptiveLambda(lam, LambdaRegime.LAMBDA2, _penalty.threshold_super(a, lam * mu))


def adaptive_lambda(a: float, mu: float, Bx, r: int) -> AdaptiveLambda:
    """Pick the regularization weight so that about ``r`` entries of ``Bx``
    survive fraction thresholding.

    ``lam1 = 2|Bx|_(r+1) / (a mu)`` is used when ``lam1 <= 1 / (a**2 mu)``,
    otherwise ``lam2 = (2a|Bx|_(r) + 1)**2 / (4 a**2 mu)``.  The returned
    threshold refers to the scaled parameter ``lam * mu``.
    """
    Bx = np.asarray(Bx, dtype=float)
    n = Bx.shape[0]
    if not 1 <= r < n:
        raise IndexError(f"need 1 <= r < n, got r={r}, n={n}")
    if not (a > 0 and mu > 0):
        raise ParameterError("a and mu must be positive")
    mags, order = _descending_magnitudes(Bx)
    return _adaptive_from_sorted(a, mu, mags[order[r - 1]], mags[order[r]])


def _adaptive_from_sorted(a, mu, mag_r, mag_r1) -> AdaptiveLambda:
    lam1 = 2.0 * mag_r1 / (a * mu)
    if lam1 <= 1.0 / (a * a * mu):
        return AdaptiveLambda(lam1, LambdaRegime.LAMBDA1, _penalty.threshold_sub(a, lam1 * mu))
    lam2 = (2.0 * a * mag_r + 1.0) ** 2 / (4.0 * a * a * mu)
    return AdaptiveLambda(lam2, LambdaRegime.LAMBDA2, _penalty.threshold_super(a, lam2 * mu))


def soft_threshold(z, tau):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - tau, 0.0)


def keep_top_r(z, r):
    """Zero all but the ``r`` largest-magnitude entries (ties: lowest index)."""
    z = np.asarray(z, dtype=float)
    if r >= z.shape[0]:
        return z.copy()
    out = np.zeros_like(z)
    idx = np.argsort(-np.abs(z), kind="stable")[:r]
    out[idx] = z[idx]
    return out


def _fraction_threshold(a, mu, z, state: AdaptiveLambda):
    out = np.zeros_like(z)
    keep = np.abs(z) > state.threshold
    if np.any(keep):
        out[keep] = _penalty.g_function(_penalty.PenaltyParams(a, state.lam * mu), z[keep])
    return out


class _Rule:
    """Thresholding rule plus whatever state it carries across iterations."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.lam_floor = None  # smallest positive IFTA lambda seen so far

    def __call__(self, z, mu):
        """Return ``(x_next, lam, regime, t_star)``."""
        cfg = self.cfg
        r = cfg.sparsity_prior_r
        n = z.shape[0]
        alg = cfg.algorithm
        if alg is Algorithm.IHTA:
            if r >= n:
                return z.copy(), None, LambdaRegime.HARD.value, 0.0
            mags, order = _descending_magnitudes(z)
            out = np.zeros_like(z)
            idx = order[:r]
            out[idx] = z[idx]
            return out, None, LambdaRegime.HARD.value, float(mags[order[r]])

        mags, order = _descending_magnitudes(z)
        mag_r, mag_r1 = mags[order[r - 1]], mags[order[r]]
        if alg is Algorithm.ISTA:
            tau = float(mag_r1)
            return soft_threshold(z, tau), 2.0 * tau / mu, LambdaRegime.SOFT.value, tau

        a = cfg.a
        state = _adaptive_from_sorted(a, mu, mag_r, mag_r1)
        if state.lam > 0:
            if self.lam_floor is None or state.lam < self.lam_floor:
                self.lam_floor = state.lam
            return _fraction_threshold(a, mu, z, state), state.lam, state.regime.value, state.threshold
        # z is already r-sparse: a zero lambda would switch thresholding off
        top = keep_top_r(z, r)
        if self.lam_floor is None:
            return top, 0.0, state.regime.value, 0.0
        state = _lambda_state(a, mu, self.lam_floor)
        return _fraction_threshold(a, mu, top, state), state.lam, state.regime.value, state.threshold


def _check_inputs(op, b, cfg, x0_init):
    m, n = op.shape
    b = np.asarray(b, dtype=float)
    if b.shape != (m,):
        raise DimensionError(f"b must have shape ({m},), got {b.shape}")
    cfg.check_dimension(n)
    if x0_init is None:
        x = np.zeros(n)
    else:
        x = np.array(x0_init, dtype=float)
        if x.shape != (n,):
            raise DimensionError(f"x0_init must have shape ({n},), got {x.shape}")
    return b, x


def _relative_change(x_new, x_old):
    change = float(np.linalg.norm(x_new - x_old))
    nrm = float(np.linalg.norm(x_new))
    return change / nrm if nrm > 0 else change


def objective_value(op, x, b, cfg: SolverConfig, lam) -> float:
    """Regularized objective at ``x`` for the configured algorithm.

    IFTA uses the fraction penalty, ISTA the l1 norm, IHTA the bare data fit.
    """
    F = op.matrix(op._check_point(x))
    fit = float(np.sum((F @ x - b) ** 2))
    if not lam:
        return fit
    if cfg.algorithm is Algorithm.IFTA:
        return fit + lam * _penalty.penalty(cfg.a, x)
    if cfg.algorithm is Algorithm.ISTA:
        return fit + lam * float(np.sum(np.abs(x)))
    return fit


def _step(op, x, b, cfg, start):
    F = op.matrix(x)
    est = _power_iteration(F, POWER_TOL, POWER_MAX_ITER, start)
    norm_sq = est.value
    if not est.converged:
        # nearly tied top singular values; settle it with a dense solve
        log.debug("power iteration stalled after %d steps, using eigvalsh", est.iterations)
        G = F @ F.T if F.shape[0] <= F.shape[1] else F.T @ F
        norm_sq = float(np.linalg.eigvalsh(G)[-1])
    mu = (1.0 - cfg.epsilon) / norm_sq
    resid = b - F @ x
    z = x + mu * (F.T @ resid)
    return z, mu, float(np.linalg.norm(resid)), est


def fixed_point_residual(op: QuasiLinearOperator, x, b, cfg: SolverConfig) -> float:
    """``||x - T(x)||`` where ``T`` is one iteration of the configured algorithm
    with its step size and regularization weight recomputed at ``x``."""
    b, x = _check_inputs(op, b, cfg, x)
    z, mu, _, _ = _step(op, x, b, cfg, None)
    x_next = _Rule(cfg)(z, mu)[0]
    return float(np.linalg.norm(x - x_next))


def _run(
    op: QuasiLinearOperator,
    b,
    cfg: SolverConfig,
    x0_init=None,
    callback: Optional[Callable[[IterationRecord, np.ndarray], None]] = None,
) -> RecoveryResult:
    b, x = _check_inputs(op, b, cfg, x0_init)
    rule = _Rule(cfg)
    lambda_trace = []
    start = None
    termination = Termination.MAX_ITER
    rel = math.inf
    lam = None
    k = 0
    for k in range(1, cfg.max_iter + 1):
        z, mu, resid_norm, est = _step(op, x, b, cfg, start)
        start = est.vector
        x_new, lam, regime, t_star = rule(z, mu)
        rel = _relative_change(x_new, x)
        lambda_trace.append((lam, regime))
        if callback is not None:
            rec = IterationRecord(
                k=k,
                lam=lam,
                regime=regime,
                mu=mu,
                t_star=t_star,
                nnz=int(np.count_nonzero(x_new)),
                rel_change=rel,
                residual_norm=resid_norm,
            )
            callback(rec, x)
        x = x_new
        if rel <= cfg.tol:
            termination = Termination.CONVERGED
            break

    F = op.matrix(x)
    return RecoveryResult(
        solution=x,
        iterations=k,
        termination=termination,
        final_relative_change=rel,
        objective=objective_value(op, x, b, cfg, lam),
        residual_norm=float(np.linalg.norm(F @ x - b)),
        fixed_point_residual=fixed_point_residual(op, x, b, cfg),
        lambda_trace=lambda_trace,
        algorithm=cfg.algorithm,
    )


def _with_algorithm(cfg: SolverConfig, alg: Algorithm) -> SolverConfig:
    if cfg.algorithm is alg:
        return cfg
    return SolverConfig(**{**asdict(cfg), "algorithm": alg})


def ifta_solve(op, b, cfg: SolverConfig, x0_init=None, callback=None) -> RecoveryResult:
    """Iterative fraction thresholding with adaptive regularization weight."""
    return _run(op, b, _with_algorithm(cfg, Algorithm.IFTA), x0_init, callback)


def ista_solve(op, b, cfg: SolverConfig, x0_init=None, callback=None) -> RecoveryResult:
    return _run(op, b, _with_algorithm(cfg, Algorithm.ISTA), x0_init, callback)


def ihta_solve(op, b, cfg: SolverConfig, x0_init=None, callback=None) -> RecoveryResult:
    return _run(op, b, _with_algorithm(cfg, Algorithm.IHTA), x0_init, callback)


def solve(op, b, cfg: SolverConfig, x0_init=None, callback=None) -> RecoveryResult:
    """Dispatch on ``cfg.algorithm``."""
    return _run(op, b, cfg, x0_init, callback)
