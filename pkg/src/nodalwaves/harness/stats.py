"""Normality and limit-law tests for standardized nodal lengths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from ..errors import DomainError, InsufficientDataError
from ..fields import make_rng


def standardize(x: ArrayLike) -> np.ndarray:
    """(x - mean) / sd with the unbiased sd; constant samples map to zeros.

    A spread at the level of rounding error in the mean counts as constant.
    """
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    scale = float(np.max(np.abs(x))) if x.size else 0.0
    if sd <= 16 * np.finfo(float).eps * scale:
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def lag1_autocorrelation(x: ArrayLike) -> float:
    x = np.asarray(x, dtype=float) - np.mean(x)
    den = float(np.dot(x, x))
    return 0.0 if den == 0 else float(np.dot(x[:-1], x[1:]) / den)


@dataclass(frozen=True)
class KSReport:
    ks_stat: float
    p_value: float
    verdict: str
    n: int
    alpha: float


def clt_test(samples: ArrayLike, alpha: float = 0.01) -> KSReport:
    """One-sample KS distance of standardized samples to N(0, 1)."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 50:
        raise InsufficientDataError(f"clt_test needs at least 50 samples, got {x.size}")
    res = stats.kstest(x, "norm")
    verdict = "reject" if res.pvalue < alpha else "consistent"
    return KSReport(float(res.statistic), float(res.pvalue), verdict, int(x.size), alpha)


def nclt_draws(eta: float, size: int, seed: int) -> np.ndarray:
    """Draws of (2 - (1 - eta) Z1^2 - (1 + eta) Z2^2) / (2 sqrt(1 + eta^2))."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    z = make_rng(seed).standard_normal((2, size))
    return (2.0 - (1 - eta) * z[0] ** 2 - (1 + eta) * z[1] ** 2) / (2.0 * np.sqrt(1 + eta * eta))


@dataclass(frozen=True)
class NCLTReport:
    eta: float
    ks_stat: float
    p_value: float
    normal_ks_stat: float
    normal_p_value: float
    n: int
    draws: int

    @property
    def closer_to_limit(self) -> bool:
        return self.ks_stat < self.normal_ks_stat


def nclt_compare(samples: ArrayLike, eta: float, draws: int = 100_000, seed: int = 0) -> NCLTReport:
    """Two-sample KS against simulated limit-law draws, alongside KS against N(0, 1)."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise InsufficientDataError(f"nclt_compare needs at least 100 samples, got {x.size}")
    ref = nclt_draws(eta, draws, seed)
    two = stats.ks_2samp(x, ref)
    one = stats.kstest(x, "norm")
    return NCLTReport(float(eta), float(two.statistic), float(two.pvalue), float(one.statistic),
                      float(one.pvalue), int(x.size), int(draws))
