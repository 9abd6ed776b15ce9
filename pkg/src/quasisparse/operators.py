"""Quasi-linear measurement operators ``A(x) = F(x) x``.

An operator materializes the dense ``m x n`` matrix ``F(y)`` at any anchor
point ``y``.  Everything else (forward/adjoint products, the Landweber step,
spectral norms) is built on top of that single capability.
"""
from __future__ import annotations

import abc
import json
import math
import warnings
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ParameterError

__all__ = [
    "QuasiLinearOperator",
    "LinearOperator",
    "LogShiftOperator",
    "SpectralEstimate",
    "evaluate_matrix",
    "apply",
    "adjoint_apply",
    "landweber_step",
    "spectral_norm_sq",
    "operator_to_dict",
    "operator_from_dict",
    "dump_operator",
    "load_operator",
]

POWER_SEED = 0
POWER_TOL = 1e-8
POWER_MAX_ITER = 500


class QuasiLinearOperator(abc.ABC):
    """Matrix-valued map ``y -> F(y)`` with fixed shape ``(m, n)``."""

    def __init__(self, shape):
        m, n = (int(s) for s in shape)
        if m < 1 or n < 1:
            raise DimensionError(f"invalid operator shape {shape!r}")
        if m >= n:
            warnings.warn(
                f"operator has m={m} >= n={n}; not an underdetermined system",
                stacklevel=3,
            )
        self.shape = (m, n)

    @abc.abstractmethod
    def matrix(self, y: np.ndarray) -> np.ndarray:
        """Return ``F(y)``; ``y`` is already validated to length ``n``."""

    def _check_point(self, y, name="y"):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.shape[1],):
            raise DimensionError(
                f"{name} must have shape ({self.shape[1]},), got {y.shape}"
            )
        return y


class LinearOperator(QuasiLinearOperator):
    """Anchor-independent operator ``F(y) = A``."""

    def __init__(self, A):
        A = np.array(A, dtype=float)
        if A.ndim != 2:
            raise DimensionError("A must be a 2-D array")
        super().__init__(A.shape)
        A.setflags(write=False)
        self.A = A

    def matrix(self, y):
        return self.A


class LogShiftOperator(QuasiLinearOperator):
    """``F(y) = A1 + eta * ln(||y - x0|| + 1) * A2`` with ``A2`` all ones.

    ``ln(t + 1)`` is 1-Lipschitz on ``[0, inf)``, so
    ``||F(x) - F(y)||_F <= eta * sqrt(m * n) * ||x - y||``.
    """

    def __init__(self, A1, x0, eta=0.003):
        A1 = np.array(A1, dtype=float)
        if A1.ndim != 2:
            raise DimensionError("A1 must be a 2-D array")
        super().__init__(A1.shape)
        x0 = np.array(x0, dtype=float)
        if x0.shape != (self.shape[1],):
            raise DimensionError(
                f"x0 must have shape ({self.shape[1]},), got {x0.shape}"
            )
        if not (math.isfinite(eta) and eta >= 0):
            raise ParameterError(f"eta must be a nonnegative real, got {eta!r}")
        A1.setflags(write=False)
        x0.setflags(write=False)
        self.A1 = A1
        self.x0 = x0
        self.eta = float(eta)

    @property
    def lipschitz_constant(self) -> float:
        m, n = self.shape
        return self.eta * math.sqrt(m * n)

    def shift(self, y) -> float:
        """Scalar multiplying the all-ones matrix at anchor ``y``."""
        return self.eta * math.log1p(float(np.linalg.norm(y - self.x0)))

    def matrix(self, y):
        # adding a scalar broadcasts the all-ones A2
        return self.A1 + self.shift(y)


def evaluate_matrix(op: QuasiLinearOperator, y) -> np.ndarray:
    return op.matrix(op._check_point(y))


def apply(op: QuasiLinearOperator, anchor, x) -> np.ndarray:
    """``F(anchor) @ x``."""
    x = op._check_point(x, "x")
    return evaluate_matrix(op, anchor) @ x


def adjoint_apply(op: QuasiLinearOperator, anchor, v) -> np.ndarray:
    """``F(anchor).T @ v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (op.shape[0],):
        raise DimensionError(f"v must have shape ({op.shape[0]},), got {v.shape}")
    return evaluate_matrix(op, anchor).T @ v


def landweber_step(op: QuasiLinearOperator, y, b, mu) -> np.ndarray:
    """``y + mu * F(y).T @ (b - F(y) @ y)``."""
    y = op._check_point(y)
    b = np.asarray(b, dtype=float)
    if b.shape != (op.shape[0],):
        raise DimensionError(f"b must have shape ({op.shape[0]},), got {b.shape}")
    if mu < 0:
        raise ParameterError(f"mu must be nonnegative, got {mu!r}")
    F = op.matrix(y)
    return y + mu * (F.T @ (b - F @ y))


class SpectralEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int
    vector: np.ndarray


def _power_iteration(F, tol, max_iter, start):
    # iterate on the smaller Gram matrix; both share the nonzero spectrum
    G = F @ F.T if F.shape[0] <= F.shape[1] else F.T @ F
    k = G.shape[0]
    if start is None or start.shape != (k,) or not np.any(start):
        start = np.random.default_rng(POWER_SEED).standard_normal(k)
    v = start / np.linalg.norm(start)
    q_old = 0.0
    for it in range(1, max_iter + 1):
        w = G @ v
        q = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ParameterError("F(y) is zero on the power-iteration subspace")
        v = w / nw
        if abs(q - q_old) <= tol * abs(q):
            return SpectralEstimate(q, True, it, v)
        q_old = q
    return SpectralEstimate(q, False, max_iter, v)


def spectral_norm_sq(
    op: QuasiLinearOperator,
    y,
    tol: float = POWER_TOL,
    max_iter: int = POWER_MAX_ITER,
    start=None,
) -> SpectralEstimate:
    """Estimate ``||F(y)||_2**2`` by power iteration.

    Starts from a fixed seeded vector unless ``start`` (for instance the
    vector returned by a previous call) is given.  ``converged`` is False when
    the Rayleigh quotient has not settled to relative ``tol`` within
    ``max_iter`` steps; ``value`` is then the last estimate.
    """
    F = evaluate_matrix(op, y)
    if not np.any(F):
        raise ParameterError("F(y) is the zero matrix")
    return _power_iteration(F, tol, max_iter, start)


def operator_to_dict(op: QuasiLinearOperator) -> dict:
    if isinstance(op, LogShiftOperator):
        return {
            "kind": "logshift",
            "m": op.shape[0],
            "n": op.shape[1],
            "eta": op.eta,
            "x0": op.x0.tolist(),
            "A1": op.A1.ravel().tolist(),
            "A2_all_ones": True,
        }
    if isinstance(op, LinearOperator):
        return {
            "kind": "linear",
            "m": op.shape[0],
            "n": op.shape[1],
            "A": op.A.ravel().tolist(),
        }
    raise TypeError(f"cannot serialize {type(op).__name__}")


def operator_from_dict(doc: dict) -> QuasiLinearOperator:
    try:
        kind = doc.get("kind", "logshift")
        m, n = int(doc["m"]), int(doc["n"])
        if kind == "linear":
            return LinearOperator(np.reshape(np.asarray(doc["A"], dtype=float), (m, n)))
        if kind == "logshift":
            if not doc.get("A2_all_ones", True):
                raise ValueError("only an all-ones A2 is supported")
            A1 = np.reshape(np.asarray(doc["A1"], dtype=float), (m, n))
            return LogShiftOperator(A1, doc["x0"], eta=float(doc["eta"]))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed operator document: {exc}") from exc
    raise ValueError(f"unknown operator kind {kind!r}")


def dump_operator(op: QuasiLinearOperator, path) -> None:
    with open(path, "w") as fh:
        json.dump(operator_to_dict(op), fh)


def load_operator(path) -> QuasiLinearOperator:
    with open(path) as fh:
        return operator_from_dict(json.load(fh))
