"""Exact Gaussian sampling of Berry-type and arithmetic random waves on grids.

Fields are finite trigonometric sums

    f(x) = sum_j a_j cos<x, k_j> + b_j sin<x, k_j>

with i.i.d. Gaussian amplitudes, so samples are exactly Gaussian and their
gradients are available in closed form.  Grid evaluation factorises through
cos(x1 k1 + x2 k2) = cos cos - sin sin and costs one matrix product.

Array convention: ``values[i, j] = f(x0 + i h, y0 + j h)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from numpy.typing import ArrayLike

from .errors import ConfigError, DomainError, NotPSDError
from .kernels import PlaneWaveKernel
from .lattice import lattice_points

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output step; the declared seed-mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def replicate_seed(master: int, index: int) -> int:
    """Seed of replicate ``index``: splitmix64(splitmix64(master) xor index)."""
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(index) & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


@dataclass(frozen=True)
class Grid:
    """Square-cell grid with ``nx * ny`` nodes; periodic grids omit the wrap-around node."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    period: float | None = None

    @classmethod
    def for_disk(cls, r: float, h: float, center: tuple[float, float] = (0.0, 0.0)) -> "Grid":
        """Smallest node-aligned square containing the closed disk B_r(center)."""
        if r <= 0 or h <= 0:
            raise ConfigError("radius and spacing must be positive")
        n = int(np.ceil(2.0 * r / h - 1e-9)) + 1
        half = (n - 1) * h / 2.0
        return cls((center[0] - half, center[1] - half), float(h), n, n)

    @classmethod
    def torus(cls, period: float, n: int) -> "Grid":
        return cls((0.0, 0.0), period / n, int(n), int(n), float(period))

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.ny)

    def contains_disk(self, r: float, center=(0.0, 0.0), tol: float = 1e-9) -> bool:
        x, y = self.x, self.y
        return (x[0] <= center[0] - r + tol and x[-1] >= center[0] + r - tol
                and y[0] <= center[1] - r + tol and y[-1] >= center[1] + r - tol)

    def as_dict(self) -> dict:
        return {"origin": list(self.origin), "h": self.h, "nx": self.nx, "ny": self.ny, "period": self.period}


@dataclass(frozen=True)
class FieldSpec:
    """What is being sampled: ``berry`` (J directions), ``arithmetic`` (n) or ``custom``."""

    kind: str
    J: int | None = None
    n: int | None = None
    scale: float = 1.0
    coords: str = "rescaled"
    kernel: object = None

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.kind == "berry":
            if self.J is None or self.J < 4 or self.J % 2:
                raise ConfigError(f"Berry sampler needs an even direction count J >= 4, got {self.J}")
        elif self.kind == "arithmetic":
            if self.n is None or lattice_points(self.n).cardinality == 0:
                raise DomainError(f"n={self.n} is not a sum of two squares")
            if self.coords not in ARITHMETIC_COORDS:
                raise ConfigError(f"coords must be one of {sorted(ARITHMETIC_COORDS)}")
        elif self.kind != "custom":
            raise ConfigError(f"unknown field kind {self.kind!r}")

    def describe(self) -> dict:
        d = {"kind": self.kind, "scale": self.scale}
        if self.kind == "berry":
            d["J"] = self.J
        elif self.kind == "arithmetic":
            d.update(n=self.n, coords=self.coords)
        else:
            d["kernel"] = repr(self.kernel)
        return d


# coordinate factor c in T_n(x) -> frequencies c * xi
ARITHMETIC_COORDS = {
    "rescaled": lambda n: 1.0 / np.sqrt(n),   # x -> T_n(x / 2 pi sqrt n), Berry scaling
    "unit": lambda n: 2.0 * np.pi,            # torus [0,1)^2, Laplacian eigenvalue -4 pi^2 n
    "standard": lambda n: 1.0,                # torus [0, 2pi)^2, Laplacian eigenvalue -n
}


@dataclass(frozen=True)
class PlaneWaveSum:
    """Realisation sum_j a_j cos<x,k_j> + b_j sin<x,k_j>."""

    wavevectors: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def _coeffs(self, deriv: tuple[int, int]):
        k = self.wavevectors
        order = deriv[0] + deriv[1]
        # a cos + b sin = Re((a - ib) e^{i theta}); d^g multiplies by i^|g| k^g
        c = (self.a - 1j * self.b) * (1j ** order) * k[:, 0] ** deriv[0] * k[:, 1] ** deriv[1]
        return c.real, -c.imag

    def evaluate(self, x: ArrayLike, y: ArrayLike, deriv: tuple[int, int] = (0, 0)) -> np.ndarray:
        """Values (or a partial derivative) on the tensor grid x (rows) by y (columns)."""
        a, b = self._coeffs(deriv)
        k = self.wavevectors
        px = np.outer(np.asarray(x, dtype=float), k[:, 0])
        py = np.outer(np.asarray(y, dtype=float), k[:, 1])
        c1, s1 = np.cos(px), np.sin(px)
        c2, s2 = np.cos(py), np.sin(py)
        left = np.hstack([c1, s1])
        right = np.vstack([(a * c2 + b * s2).T, (b * c2 - a * s2).T])
        return left @ right

    def at_points(self, pts: ArrayLike, deriv: tuple[int, int] = (0, 0)) -> np.ndarray:
        a, b = self._coeffs(deriv)
        ph = np.asarray(pts, dtype=float) @ self.wavevectors.T
        return np.cos(ph) @ a + np.sin(ph) @ b


@dataclass(frozen=True)
class SampledField:
    grid: Grid
    values: np.ndarray
    seed: int
    spec: FieldSpec
    gradient: tuple[np.ndarray, np.ndarray] | None = None
    waves: PlaneWaveSum | None = field(default=None, repr=False, compare=False)

    @property
    def periodic(self) -> bool:
        return self.grid.period is not None

    def header(self) -> dict:
        return {"grid": self.grid.as_dict(), "seed": self.seed, "spec": self.spec.describe()}


def berry_directions(J: int) -> np.ndarray:
    """J/2 equispaced unit vectors on the half circle [0, pi)."""
    th = 2.0 * np.pi * np.arange(J // 2) / J
    return np.column_stack([np.cos(th), np.sin(th)])


def berry_sampler_kernel(J: int, scale: float = 1.0) -> PlaneWaveKernel:
    """Exact covariance (2/J) sum_j cos<u, k_j> of :func:`sample_berry`: a J-point trapezoid rule for J0."""
    if J < 4 or J % 2:
        raise ConfigError(f"J must be even and >= 4, got {J}")
    return PlaneWaveKernel(berry_directions(J), np.full(J // 2, 2.0 / J), scale=scale, name=f"berry(J={J})")


def berry_sampler_error(J: int, diameter: float) -> float:
    """Bound 2 max_{t <= diameter} |J_J(t)| on the sampler covariance error |k_J - J0|."""
    from scipy.special import jv
    t = np.linspace(0.0, diameter, 512)
    return float(2.0 * np.max(np.abs(jv(J, t))))


def auto_directions(diameter: float, tol: float = 1e-12, minimum: int = 64) -> int:
    """Smallest power-of-two J >= minimum whose covariance error on [0, diameter] is below tol."""
    J = minimum
    while berry_sampler_error(J, diameter) > tol:
        J *= 2
    return J


def _draw_waves(k: np.ndarray, amp: float, seed: int) -> PlaneWaveSum:
    rng = make_rng(seed)
    ab = rng.standard_normal((2, len(k)))
    return PlaneWaveSum(k, amp * ab[0], amp * ab[1])


def berry_waves(J: int, seed: int, scale: float = 1.0) -> PlaneWaveSum:
    FieldSpec("berry", J=J, scale=scale)
    return _draw_waves(berry_directions(J), np.sqrt(2.0 * scale / J), seed)


def arithmetic_waves(n: int, seed: int, coords: str = "rescaled", scale: float = 1.0) -> PlaneWaveSum:
    FieldSpec("arithmetic", n=n, coords=coords, scale=scale)
    lat = lattice_points(n)
    k = lat.half() * ARITHMETIC_COORDS[coords](n)
    return _draw_waves(k, np.sqrt(2.0 * scale / lat.cardinality), seed)


def _realise(waves: PlaneWaveSum, grid: Grid, seed: int, spec: FieldSpec, gradients: bool) -> SampledField:
    vals = waves.evaluate(grid.x, grid.y)
    grad = None
    if gradients:
        grad = (waves.evaluate(grid.x, grid.y, (1, 0)), waves.evaluate(grid.x, grid.y, (0, 1)))
    return SampledField(grid, vals, int(seed), spec, grad, waves)


def sample_berry(J: int, grid: Grid, seed: int, gradients: bool = False, scale: float = 1.0) -> SampledField:
    """Exact Gaussian b_J(x) = sqrt(2/J) sum_{j<J/2} a_j cos<x,k_j> + b_j sin<x,k_j>."""
    spec = FieldSpec("berry", J=J, scale=scale)
    return _realise(berry_waves(J, seed, scale), grid, seed, spec, gradients)


def sample_arithmetic(n: int, grid: Grid, seed: int, coords: str = "rescaled",
                      gradients: bool = False, scale: float = 1.0) -> SampledField:
    """Arithmetic wave with one Gaussian pair per antipodal pair {xi, -xi}.

    ``coords`` selects the frame: ``rescaled`` (covariance arithmetic_cov),
    ``unit`` (torus [0,1)^2) or ``standard`` (torus [0,2pi)^2).
    """
    spec = FieldSpec("arithmetic", n=n, coords=coords, scale=scale)
    return _realise(arithmetic_waves(n, seed, coords, scale), grid, seed, spec, gradients)


def sample_custom(kernel: Callable, grid: Grid, seed: int) -> SampledField:
    """Dense-covariance sample on a (small) grid for an arbitrary kernel."""
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    vals = sample_from_kernel(kernel, pts, seed).reshape(grid.nx, grid.ny)
    return SampledField(grid, vals, int(seed), FieldSpec("custom", kernel=kernel))


def strip_iter(waves: PlaneWaveSum, grid: Grid, rows: int = 512) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (row offset, values) strips; consecutive strips share one row for marching squares."""
    x = grid.x
    y = grid.y
    start = 0
    while start < grid.nx - 1:
        stop = min(start + rows, grid.nx - 1)
        yield start, waves.evaluate(x[start:stop + 1], y)
        start = stop


def covariance_matrix(kernel: Callable, points: ArrayLike) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    C = np.asarray(kernel(p[:, None, :], p[None, :, :]), dtype=float)
    return 0.5 * (C + C.T)


def psd_sqrt(C: np.ndarray, fail_tol: float = 1e-6) -> np.ndarray:
    """Symmetric square root; eigenvalues below -fail_tol * trace raise NotPSDError."""
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    tr = max(float(np.trace(C)), np.finfo(float).tiny)
    if w.min() < -fail_tol * tr:
        raise NotPSDError(f"covariance has eigenvalue {w.min():.3e} < -{fail_tol:g} * trace")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def sample_from_kernel(kernel: Callable, points: ArrayLike, seed: int, size: int | None = None) -> np.ndarray:
    """Exact multivariate-normal draw(s) with covariance kernel(points_i, points_j)."""
    root = psd_sqrt(covariance_matrix(kernel, points))
    rng = make_rng(seed)
    if size is None:
        return root @ rng.standard_normal(root.shape[0])
    return rng.standard_normal((size, root.shape[0])) @ root


def save_field(sf: SampledField, path: str | Path) -> Path:
    """Dump a grid as CSV (``#``-prefixed JSON header, row-major) or ``.npz``."""
    path = Path(path)
    if path.suffix == ".npz":
        np.savez(path, values=sf.values, header=json.dumps(sf.header()))
    else:
        with path.open("w") as fh:
            fh.write("# " + json.dumps(sf.header(), sort_keys=True) + "\n")
            np.savetxt(fh, sf.values, delimiter=",", fmt="%.17g")
    return path


def load_field_csv(path: str | Path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        header = json.loads(fh.readline()[2:])
        values = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, values
