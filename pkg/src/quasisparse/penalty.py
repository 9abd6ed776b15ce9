"""Fraction-function penalty and its closed-form thresholding operator.

The fraction function ``rho_a(t) = a|t| / (a|t| + 1)`` is a concave surrogate
for the l0 indicator.  Its scalar proximal map

    prox(gamma) = argmin_beta (beta - gamma)**2 + lam * rho_a(beta)

is a thresholding rule: zero below a threshold ``t*`` and given by a
trigonometric root formula above it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "PenaltyParams",
    "Regime",
    "ThresholdRegime",
    "rho",
    "penalty",
    "threshold_value",
    "g_function",
    "prox_scalar",
    "prox_vector",
    "scalar_objective",
]

# slack tolerated on the arccos argument before it is treated as misuse
ARCCOS_CLAMP_TOL = 1e-9


def _check_a(a):
    if not a > 0:
        raise ParameterError(f"shape parameter a must be positive, got {a!r}")


@dataclass(frozen=True)
class PenaltyParams:
    """Shape ``a`` and weight ``lam`` of the fraction penalty.

    Inside the solvers ``lam`` carries the product of the regularization
    weight and the step size.
    """

    a: float
    lam: float

    def __post_init__(self):
        _check_a(self.a)
        if not self.lam > 0:
            raise ParameterError(f"lam must be positive, got {self.lam!r}")


class Regime(str, enum.Enum):
    SUB_CRITICAL = "SubCritical"
    SUPER_CRITICAL = "SuperCritical"


@dataclass(frozen=True)
class ThresholdRegime:
    regime: Regime
    threshold: float


def rho(a, t):
    """Fraction function ``a|t| / (a|t| + 1)``; works on scalars and arrays."""
    _check_a(a)
    at = a * np.abs(t)
    out = at / (at + 1.0)
    return float(out) if np.ndim(out) == 0 else out


def penalty(a, x):
    """Sum of :func:`rho` over the entries of ``x``."""
    _check_a(a)
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.sum(rho(a, x)))


def threshold_sub(a, lam):
    return lam * a / 2.0


def threshold_super(a, lam):
    return math.sqrt(lam) - 1.0 / (2.0 * a)


def threshold_value(p: PenaltyParams) -> ThresholdRegime:
    """Threshold below which :func:`prox_scalar` returns exactly zero."""
    if p.lam <= 1.0 / (p.a * p.a):
        return ThresholdRegime(Regime.SUB_CRITICAL, threshold_sub(p.a, p.lam))
    return ThresholdRegime(Regime.SUPER_CRITICAL, threshold_super(p.a, p.lam))


def arccos_argument(p: PenaltyParams, gamma):
    """Raw (unclamped) argument of the arccos in :func:`g_function`."""
    return 27.0 * p.lam * p.a**2 / (4.0 * (1.0 + p.a * np.abs(gamma)) ** 3) - 1.0


def g_function(p: PenaltyParams, gamma):
    """Nonzero branch of the fraction thresholding rule.

    Only meaningful for ``|gamma| >= t*``.  Arguments of the arccos within
    ``ARCCOS_CLAMP_TOL`` of ``[-1, 1]`` are clamped; anything further out
    raises :class:`DomainError`.
    """
    gamma_arr = np.asarray(gamma, dtype=float)
    arg = arccos_argument(p, gamma_arr)
    if np.any(arg > 1.0 + ARCCOS_CLAMP_TOL) or np.any(arg < -1.0 - ARCCOS_CLAMP_TOL):
        raise DomainError(
            "arccos argument out of range; gamma is below the threshold "
            f"for a={p.a}, lam={p.lam}"
        )
    phi = np.arccos(np.clip(arg, -1.0, 1.0))
    scale = (1.0 + p.a * np.abs(gamma_arr)) / 3.0
    mag = (scale * (1.0 + 2.0 * np.cos(phi / 3.0 - np.pi / 3.0)) - 1.0) / p.a
    out = np.sign(gamma_arr) * mag
    return float(out) if out.ndim == 0 else out


def prox_scalar(p: PenaltyParams, gamma: float) -> float:
    """Global minimizer of ``(beta - gamma)**2 + lam * rho_a(beta)``."""
    t_star = threshold_value(p).threshold
    if abs(gamma) <= t_star:
        return 0.0
    return g_function(p, gamma)


def prox_vector(p: PenaltyParams, x) -> np.ndarray:
    """Componentwise :func:`prox_scalar` (the iterative thresholding operator)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    keep = np.abs(x) > threshold_value(p).threshold
    if np.any(keep):
        out[keep] = g_function(p, x[keep])
    return out


def scalar_objective(p: PenaltyParams, beta, gamma):
    """``(beta - gamma)**2 + lam * rho_a(beta)``, the function the prox minimizes."""
    return (beta - gamma) ** 2 + p.lam * rho(p.a, beta)
