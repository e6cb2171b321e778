"""Stationary covariance kernels with analytic mixed partial derivatives.

A stationary kernel is described by its profile k(u), u = x - y.  Mixed
partials follow from d_y = -d_u:

    E[d^a X(x) d^b X(y)] = (-1)^|b| (d^(a+b) k)(x - y).
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import hermite_e
from numpy.typing import ArrayLike

from .special import MultiIndex, j0_profile_deriv


class StationaryKernel:
    """Base class; subclasses implement :meth:`profile`."""

    def profile(self, gamma: MultiIndex, u: ArrayLike) -> np.ndarray:
        raise NotImplementedError

    def cov(self, alpha: MultiIndex, beta: MultiIndex, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        u = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        g = (alpha[0] + beta[0], alpha[1] + beta[1])
        return (-1) ** (beta[0] + beta[1]) * self.profile(g, u)

    def __call__(self, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        return self.cov((0, 0), (0, 0), x, y)

    @property
    def variance(self) -> float:
        return float(self.profile((0, 0), np.zeros(2)))

    def __add__(self, other: "StationaryKernel") -> "SumKernel":
        return SumKernel(self, other)

    def __rmul__(self, c: float) -> "ScaledKernel":
        return ScaledKernel(self, float(c))


class BerryKernel(StationaryKernel):
    """scale * J0(|u|); unit variance by default."""

    def __init__(self, scale: float = 1.0):
        self.scale = float(scale)

    def profile(self, gamma, u):
        return j0_profile_deriv(gamma, u, self.scale)

    def __repr__(self):
        return f"BerryKernel(scale={self.scale})"


class PlaneWaveKernel(StationaryKernel):
    """Finite cosine mixture k(u) = scale * sum_j w_j cos<u, k_j>.

    Covers the arithmetic covariance (wavevectors xi / sqrt(n), weights 1/N_n)
    and the exact covariance of the equispaced-direction Berry sampler.
    """

    def __init__(self, wavevectors: ArrayLike, weights: ArrayLike, scale: float = 1.0, name: str = "plane_waves"):
        self.wavevectors = np.asarray(wavevectors, dtype=float).reshape(-1, 2)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.scale = float(scale)
        self.name = name

    def profile(self, gamma, u):
        u = np.asarray(u, dtype=float)
        k = self.wavevectors
        order = gamma[0] + gamma[1]
        amp = self.weights * k[:, 0] ** gamma[0] * k[:, 1] ** gamma[1]
        phase = u @ k.T
        # d^g cos(<u,k>) = Re(i^|g| k^g e^{i<u,k>})
        if order % 2 == 0:
            base = np.cos(phase) * (-1) ** (order // 2)
        else:
            base = -np.sin(phase) * (-1) ** (order // 2)
        return self.scale * (base @ amp)

    def __repr__(self):
        return f"PlaneWaveKernel({self.name}, {len(self.weights)} waves, scale={self.scale})"


class GaussianKernel(StationaryKernel):
    """amplitude * exp(-|u|^2 / (2 length^2))."""

    def __init__(self, amplitude: float = 1.0, length: float = 1.0):
        self.amplitude = float(amplitude)
        self.length = float(length)

    @staticmethod
    def _d1(n: int, x: np.ndarray, ell: float) -> np.ndarray:
        # d^n/dx^n exp(-x^2/2l^2) = (-1/l)^n He_n(x/l) exp(-x^2/2l^2)
        c = np.zeros(n + 1)
        c[n] = 1.0
        z = x / ell
        return (-1.0 / ell) ** n * hermite_e.hermeval(z, c) * np.exp(-0.5 * z * z)

    def profile(self, gamma, u):
        u = np.asarray(u, dtype=float)
        return self.amplitude * self._d1(gamma[0], u[..., 0], self.length) * self._d1(gamma[1], u[..., 1], self.length)

    def __repr__(self):
        return f"GaussianKernel(amplitude={self.amplitude}, length={self.length})"


class SumKernel(StationaryKernel):
    def __init__(self, *parts: StationaryKernel):
        self.parts = parts

    def profile(self, gamma, u):
        return sum(p.profile(gamma, u) for p in self.parts)

    def __repr__(self):
        return " + ".join(repr(p) for p in self.parts)


class ScaledKernel(StationaryKernel):
    def __init__(self, base: StationaryKernel, factor: float):
        self.base = base
        self.factor = factor

    def profile(self, gamma, u):
        return self.factor * self.base.profile(gamma, u)

    def __repr__(self):
        return f"{self.factor}*{self.base!r}"
