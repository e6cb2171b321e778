"""Lattice points on circles and the induced spectral measures on the unit circle."""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError
from .kernels import PlaneWaveKernel

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class LatticeSet:
    """Integer points xi with xi_1^2 + xi_2^2 = n, sorted by angle."""

    n: int
    points: np.ndarray

    @property
    def cardinality(self) -> int:
        return int(len(self.points))

    def __len__(self) -> int:
        return self.cardinality

    def angles(self) -> np.ndarray:
        return np.mod(np.arctan2(self.points[:, 1], self.points[:, 0]), TWO_PI)

    def half(self) -> np.ndarray:
        """One representative per antipodal pair {xi, -xi}."""
        p = self.points
        keep = (p[:, 0] > 0) | ((p[:, 0] == 0) & (p[:, 1] > 0))
        return p[keep]


@dataclass(frozen=True)
class SpectralMeasure:
    """Atomic probability measure on [0, 2pi), atoms sorted by angle."""

    angles: np.ndarray
    masses: np.ndarray

    @classmethod
    def from_angles(cls, angles: ArrayLike, masses: ArrayLike | None = None) -> "SpectralMeasure":
        th = np.mod(np.asarray(angles, dtype=float).ravel(), TWO_PI)
        if masses is None:
            w = np.full(th.shape, 1.0 / th.size)
        else:
            w = np.asarray(masses, dtype=float).ravel()
        order = np.argsort(th, kind="stable")
        return cls(angles=th[order], masses=w[order])

    @classmethod
    def from_lattice(cls, lat: LatticeSet) -> "SpectralMeasure":
        if lat.cardinality == 0:
            raise DomainError(f"n={lat.n} is not a sum of two squares; spectral measure undefined")
        return cls.from_angles(lat.angles())


def lattice_points(n: int) -> LatticeSet:
    """Exhaustive enumeration of Lambda_n; empty when n is not a sum of two squares."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    pts = []
    for a in range(-isqrt(n), isqrt(n) + 1):
        rem = n - a * a
        b = isqrt(rem)
        if b * b == rem:
            pts.append((a, b))
            if b:
                pts.append((a, -b))
    arr = np.array(pts, dtype=np.int64).reshape(-1, 2)
    if len(arr):
        th = np.mod(np.arctan2(arr[:, 1], arr[:, 0]), TWO_PI)
        arr = arr[np.argsort(th, kind="stable")]
    return LatticeSet(n=n, points=arr)


def is_sum_of_two_squares(n: int) -> bool:
    return lattice_points(n).cardinality > 0


def r2(n: int) -> int:
    """Representation count r_2(n) = 4 (d_1(n) - d_3(n)) by the divisor formula."""
    if n < 1:
        raise DomainError("n must be positive")
    d1 = d3 = 0
    for d in range(1, isqrt(n) + 1):
        if n % d == 0:
            for e in {d, n // d}:
                if e % 4 == 1:
                    d1 += 1
                elif e % 4 == 3:
                    d3 += 1
    return 4 * (d1 - d3)


def mu_hat4(m: SpectralMeasure) -> float:
    """Fourth Fourier coefficient; the sine part vanishes by the symmetries of Lambda_n."""
    return float(np.sum(m.masses * np.cos(4.0 * m.angles)))


def mu_hat4_imag(m: SpectralMeasure) -> float:
    return float(np.sum(m.masses * np.sin(4.0 * m.angles)))


def _cdf_steps(m: SpectralMeasure):
    """Distinct atom locations and CDF value F(t) = mu[0, t] on [theta_k, theta_{k+1})."""
    th, idx = np.unique(m.angles, return_inverse=True)
    mass = np.bincount(idx, weights=m.masses)
    return th, np.cumsum(mass)


def kol_distance(m: SpectralMeasure) -> float:
    """sup_t |mu[0, t] - t / 2pi| evaluated exactly at atoms and their left limits."""
    th, F = _cdf_steps(m)
    right = np.append(th[1:], TWO_PI)
    cands = [np.abs(F - th / TWO_PI), np.abs(F - right / TWO_PI)]
    if th[0] > 0:
        cands.append(np.array([th[0] / TWO_PI]))
    return float(max(np.max(c) for c in cands))


def _abs_linear_integral(ga: np.ndarray, gb: np.ndarray, length: np.ndarray) -> np.ndarray:
    """Integral of |g| for g linear from ga to gb over an interval of given length."""
    same = ga * gb >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        split = length * (ga * ga + gb * gb) / (2.0 * (np.abs(ga) + np.abs(gb)))
    return np.where(same, length * (np.abs(ga) + np.abs(gb)) / 2.0, split)


def w1_distance(m: SpectralMeasure) -> float:
    """Integral over [0, 2pi] of |mu[0, t] - t / 2pi|, exact piecewise-linear integration."""
    th, F = _cdf_steps(m)
    left = np.concatenate([[0.0], th])
    right = np.concatenate([th, [TWO_PI]])
    level = np.concatenate([[0.0], F])
    ga = level - left / TWO_PI
    gb = level - right / TWO_PI
    return float(np.sum(_abs_linear_integral(ga, gb, right - left)))


def arithmetic_cov(lat: LatticeSet, v: ArrayLike) -> np.ndarray | float:
    """Covariance (1/N_n) sum_xi cos<v, xi / sqrt(n)> of the rescaled arithmetic wave."""
    if lat.cardinality == 0:
        raise DomainError(f"empty lattice for n={lat.n}")
    v = np.asarray(v, dtype=float)
    k = lat.points / np.sqrt(lat.n)
    out = np.cos(v @ k.T).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def arithmetic_kernel(n: int | LatticeSet, scale: float = 1.0, rescaled: bool = True) -> PlaneWaveKernel:
    """Stationary kernel of T_n; rescaled coordinates by default (x -> T_n(x / 2 pi sqrt n))."""
    lat = n if isinstance(n, LatticeSet) else lattice_points(n)
    if lat.cardinality == 0:
        raise DomainError(f"n={lat.n} is not a sum of two squares")
    k = lat.points / np.sqrt(lat.n) if rescaled else 2.0 * np.pi * lat.points
    w = np.full(lat.cardinality, 1.0 / lat.cardinality)
    return PlaneWaveKernel(k, w, scale=scale, name=f"arithmetic(n={lat.n})")


def lattice_summary(n: int) -> dict:
    """JSON-ready summary used by the ``lattice-info`` subcommand."""
    lat = lattice_points(n)
    out = {"n": lat.n, "N_n": lat.cardinality, "points": lat.points.tolist()}
    if lat.cardinality:
        m = SpectralMeasure.from_lattice(lat)
        out.update(mu_hat4=mu_hat4(m), kol=kol_distance(m), w1=w1_distance(m))
    else:
        out.update(mu_hat4=None, kol=None, w1=None)
    return out
