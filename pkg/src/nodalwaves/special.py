"""Bessel functions and derivatives of the Berry covariance J0(|x - y|).

Derivatives of the isotropic profile are obtained from the Jacobi-Anger
expansion.  Writing ``u = t (cos phi, sin phi)``,

    d^g J0(|u|) = i^|g| sum_m c_m i^m J_m(t) exp(i m phi),

where ``c_m`` are the Fourier coefficients of ``cos^g1 sin^g2``.  Every term
is finite at ``t = 0`` (``J_m(0) = delta_m0``), so diagonal limits come out
exactly without any 0/0 handling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
from numpy.typing import ArrayLike
from scipy import special as _sp

from .errors import DomainError

MultiIndex = tuple[int, int]


def bessel_j(order: int, t: ArrayLike) -> np.ndarray | float:
    """Bessel function of the first kind J_order(t) for order in {0, 1, 2}.

    Accepts scalars or arrays; negative or non-finite arguments raise.
    """
    if order not in (0, 1, 2):
        raise DomainError(f"unsupported Bessel order {order!r}; expected 0, 1 or 2")
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    if np.any(arr < 0):
        raise DomainError("Bessel argument must be nonnegative")
    out = _sp.jv(order, arr)
    return float(out) if out.ndim == 0 else out


def multi_indices(max_order: int) -> list[MultiIndex]:
    """All 2D multi-indices of total degree <= max_order, graded order."""
    if max_order < 0:
        raise DomainError("max_order must be nonnegative")
    return [(d - k, k) for d in range(max_order + 1) for k in range(d + 1)]


@lru_cache(maxsize=None)
def _trig_coeffs(a: int, b: int) -> tuple[tuple[int, complex], ...]:
    """Fourier coefficients of cos(x)^a sin(x)^b as (m, c_m) pairs."""
    # Laurent polynomial in z = e^{ix}, stored with offset a + b.
    poly = np.array([1.0 + 0j])
    cos_p = np.array([0.5, 0.0, 0.5], dtype=complex)
    sin_p = np.array([-0.5 / 1j, 0.0, 0.5 / 1j], dtype=complex)
    for _ in range(a):
        poly = np.convolve(poly, cos_p)
    for _ in range(b):
        poly = np.convolve(poly, sin_p)
    deg = a + b
    return tuple((k - deg, complex(c)) for k, c in enumerate(poly) if abs(c) > 1e-15)


def j0_profile_deriv(gamma: MultiIndex, u: ArrayLike, scale: float = 1.0) -> np.ndarray:
    """Partial derivative d^gamma of ``scale * J0(|u|)`` at points ``u`` of shape (..., 2)."""
    u = np.asarray(u, dtype=float)
    t = np.hypot(u[..., 0], u[..., 1])
    phi = np.arctan2(u[..., 1], u[..., 0])
    order = gamma[0] + gamma[1]
    acc = np.zeros(t.shape, dtype=complex)
    for m, c in _trig_coeffs(*gamma):
        acc += c * (1j ** m) * _sp.jv(m, t) * np.exp(1j * m * phi)
    return scale * np.real((1j ** order) * acc)


@dataclass(frozen=True)
class KernelDerivs:
    """Mixed partials d^alpha_x d^beta_y K(x, y) at one separation x - y."""

    t: float
    entries: dict[tuple[MultiIndex, MultiIndex], float] = field(default_factory=dict)

    def __getitem__(self, key: tuple[MultiIndex, MultiIndex]) -> float:
        return self.entries[key]


def berry_kernel_derivs(separation_vector: ArrayLike, max_order: int = 3,
                        scale: float = 1.0) -> KernelDerivs:
    """All d^alpha_x d^beta_y [scale J0(|x - y|)] with |alpha|, |beta| <= max_order.

    ``separation_vector`` is ``x - y``.  Since the kernel depends on ``x - y``
    only, d_y = -d_u and the entry equals (-1)^|beta| d^(alpha+beta) J0(|u|).
    """
    if max_order > 3:
        raise DomainError("max_order is capped at 3")
    u = np.asarray(separation_vector, dtype=float)
    if u.shape != (2,) or not np.all(np.isfinite(u)):
        raise DomainError("separation_vector must be a finite 2-vector")
    idx = multi_indices(max_order)
    cache: dict[MultiIndex, float] = {}
    entries = {}
    for al in idx:
        for be in idx:
            g = (al[0] + be[0], al[1] + be[1])
            if g not in cache:
                cache[g] = float(j0_profile_deriv(g, u, scale))
            entries[(al, be)] = (-1) ** (be[0] + be[1]) * cache[g]
    return KernelDerivs(t=float(np.hypot(*u)), entries=entries)


# ---------------------------------------------------------------------------
# Exact power series, used where closed forms suffer catastrophic cancellation
# (conditional covariances near the diagonal).

SERIES_TERMS = 24


@lru_cache(maxsize=None)
def bessel_series(order: int, terms: int = SERIES_TERMS) -> tuple[Fraction, ...]:
    """Exact rational Taylor coefficients of J_order(t) in powers of t."""
    coeffs = [Fraction(0)] * (2 * terms + order)
    for k in range(terms):
        coeffs[2 * k + order] = Fraction((-1) ** k, 2 ** (2 * k + order) * factorial(k) * factorial(k + order))
    return tuple(coeffs)


def series_mul(p: tuple[Fraction, ...], q: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return tuple(out)


def series_add(*terms: tuple[Fraction, tuple[Fraction, ...]]) -> tuple[Fraction, ...]:
    """Linear combination sum_k w_k p_k of coefficient tuples."""
    n = max(len(p) for _, p in terms)
    out = [Fraction(0)] * n
    for w, p in terms:
        for i, a in enumerate(p):
            out[i] += w * a
    return tuple(out)


def series_eval(p: tuple[Fraction, ...], t: ArrayLike, shift: int = 0) -> np.ndarray:
    """Evaluate sum_k p_k t^(k - shift); the first ``shift`` coefficients must vanish."""
    if any(c != 0 for c in p[:shift]):
        raise ValueError("cannot shift a series with nonzero leading coefficients")
    c = np.array([float(x) for x in p[shift:]])
    return np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), c)
