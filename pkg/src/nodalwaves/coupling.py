"""Nystrom discretizations of block kernel operators and square-root couplings.

The operator over multi-indices S(M) acts on vector functions on the disk B_R.
On a quadrature rule (x_i, w_i) it becomes the symmetric matrix with entries
sqrt(w_i w_j) K_ab(x_i, x_j), rows and columns ordered multi-index-major.
For two such matrices A, B and one standard Gaussian vector g, the pair
sqrt(A) g, sqrt(B) g has E|sqrt(A) g - sqrt(B) g|^2 = |sqrt(A) - sqrt(B)|_HS^2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, InsufficientDataError, NotPSDError
from .fields import make_rng
from .special import MultiIndex, multi_indices

SYM_TOL = 1e-12
CLAMP_TOL = 1e-8
FAIL_TOL = 1e-6


class FunctionKernel:
    """Adapter turning a plain callable k(x, y) into an order-0 covariance source."""

    max_order = 0

    def __init__(self, fn: Callable, name: str = "function"):
        self.fn = fn
        self.name = name

    def cov(self, alpha, beta, x, y):
        if alpha != (0, 0) or beta != (0, 0):
            raise ConfigError(f"{self.name} provides no derivatives")
        return np.asarray(self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)


def _as_source(kernel):
    return kernel if hasattr(kernel, "cov") else FunctionKernel(kernel)


# ---------------------------------------------------------------------------
# Disk quadrature

def _quadrant_area(x: np.ndarray, y: np.ndarray, R: float) -> np.ndarray:
    """Area of the disk part of [0, x] x [0, y] for x, y >= 0."""
    x = np.minimum(x, R)
    y = np.minimum(y, R)
    us = np.sqrt(np.maximum((R - y) * (R + y), 0.0))

    def P(u):
        # atan2 form: arcsin(u / R) loses half the digits near u = R
        c = np.sqrt(np.maximum((R - u) * (R + u), 0.0))
        return 0.5 * (u * c + R * R * np.arctan2(u, c))

    return np.where(x <= us, x * y, y * us + P(x) - P(us))


def _signed_area(x, y, R):
    return np.sign(x) * np.sign(y) * _quadrant_area(np.abs(x), np.abs(y), R)


def cell_disk_area(x0, x1, y0, y1, R: float) -> np.ndarray:
    """Exact area of [x0, x1] x [y0, y1] intersected with the disk of radius R at the origin."""
    return (_signed_area(x1, y1, R) - _signed_area(x0, y1, R)
            - _signed_area(x1, y0, R) + _signed_area(x0, y0, R))


@lru_cache(maxsize=32)
def disk_quadrature(R: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the clipped-cell rule on B_R.

    Interior cells use their centres; boundary cells use the centroid of the
    clipped cell, estimated on a 16 x 16 sub-grid.
    """
    m = int(np.ceil(R / h))
    e = h * np.arange(-m, m + 1)
    X0, Y0 = np.meshgrid(e[:-1], e[:-1], indexing="ij")
    X0, Y0 = X0.ravel(), Y0.ravel()
    w = cell_disk_area(X0, X0 + h, Y0, Y0 + h, R)
    keep = w > 1e-12 * h * h
    X0, Y0, w = X0[keep], Y0[keep], w[keep]
    nodes = np.column_stack([X0 + h / 2, Y0 + h / 2])
    full = np.abs(w - h * h) <= 1e-12 * h * h
    sub = (np.arange(16) + 0.5) / 16 * h
    for k in np.nonzero(~full)[0]:
        px, py = np.meshgrid(X0[k] + sub, Y0[k] + sub, indexing="ij")
        inside = px ** 2 + py ** 2 <= R * R
        if inside.any():
            nodes[k] = (px[inside].mean(), py[inside].mean())
    return nodes, w


# ---------------------------------------------------------------------------
# Operators

@dataclass
class DiscretizedOperator:
    """Symmetric Nystrom matrix of a block kernel operator on B_R."""

    R: float
    M: int
    h: float
    nodes: np.ndarray
    weights: np.ndarray
    indices: list[MultiIndex]
    matrix: np.ndarray
    symmetrized: bool = False
    name: str = ""
    _eig: tuple | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs, eigenvalues in decreasing order."""
        if self._eig is None:
            lam, V = np.linalg.eigh(self.matrix)
            self._eig = (lam[::-1], V[:, ::-1])
        return self._eig

    def eigenvalues(self) -> np.ndarray:
        return self.eigh()[0]

    def unweight(self) -> np.ndarray:
        """Matrix entries divided by sqrt(w_i w_j): kernel values at the nodes."""
        sw = np.tile(np.sqrt(self.weights), len(self.indices))
        return self.matrix / np.outer(sw, sw)

    def covariance_source(self, matrix: np.ndarray | None = None) -> "NodeCovariance":
        return NodeCovariance(self.nodes, self.weights, self.indices, self.matrix if matrix is None else matrix)


class NodeCovariance:
    """Covariance source defined at quadrature nodes by a weighted block matrix."""

    def __init__(self, nodes: np.ndarray, weights: np.ndarray, indices: list[MultiIndex], matrix: np.ndarray,
                 tol: float = 1e-9):
        self.nodes = nodes
        self.weights = weights
        self.indices = list(indices)
        self.matrix = matrix
        self.tol = tol
        self.max_order = max(a[0] + a[1] for a in self.indices)

    def node_index(self, pts: ArrayLike) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = ((p[:, None, :] - self.nodes[None, :, :]) ** 2).sum(-1)
        i = np.argmin(d2, axis=1)
        if np.any(np.sqrt(d2[np.arange(len(p)), i]) > self.tol):
            raise DomainError("point is not a quadrature node")
        return i

    def cov(self, alpha, beta, x, y):
        i, j = self.node_index(x), self.node_index(y)
        n = len(self.nodes)
        a, b = self.indices.index(tuple(alpha)), self.indices.index(tuple(beta))
        v = self.matrix[a * n + i, b * n + j] / np.sqrt(self.weights[i] * self.weights[j])
        return v


def default_operator_spacing(R: float) -> float:
    return R / 20.0


def build_operator(kernel, M: int, R: float, h: float | None = None) -> DiscretizedOperator:
    """Nystrom matrix sqrt(w_i w_j) K_ab(x_i, x_j), multi-indices a, b in S(M)."""
    if int(M) != M or not 0 <= M <= 3:
        raise ConfigError("M must be an integer in [0, 3]")
    if R < 1:
        raise ConfigError("R must be at least 1")
    h = default_operator_spacing(R) if h is None else float(h)
    if not 0 < h <= R / 10 + 1e-15:
        raise ConfigError(f"h={h} must lie in (0, R/10]")
    src = _as_source(kernel)
    nodes, w = disk_quadrature(float(R), h)
    idx = multi_indices(int(M))
    n = len(nodes)
    A = np.empty((n * len(idx), n * len(idx)))
    X, Y = nodes[:, None, :], nodes[None, :, :]
    sw = np.sqrt(w)
    for a, al in enumerate(idx):
        for b, be in enumerate(idx):
            A[a * n:(a + 1) * n, b * n:(b + 1) * n] = np.asarray(src.cov(al, be, X, Y)) * np.outer(sw, sw)
    asym = float(np.max(np.abs(A - A.T)))
    if asym > SYM_TOL * max(1.0, float(np.max(np.abs(A)))):
        raise ConfigError(f"kernel is not symmetric: max asymmetry {asym:.3g}")
    sym = asym > 0
    if sym:
        A = 0.5 * (A + A.T)
    return DiscretizedOperator(float(R), int(M), h, nodes, w, idx, A, sym, repr(kernel))


def diagonal_trace(kernel, op: DiscretizedOperator) -> float:
    """sum_a sum_i w_i K_aa(x_i, x_i), evaluated directly from the kernel."""
    src = _as_source(kernel)
    return float(sum(np.sum(op.weights * np.asarray(src.cov(a, a, op.nodes, op.nodes))) for a in op.indices))


def _sqrt_matrix(A: np.ndarray, lam: np.ndarray | None = None, V: np.ndarray | None = None) -> np.ndarray:
    if lam is None:
        lam, V = np.linalg.eigh(A)
    tr = max(float(np.trace(A)), np.finfo(float).tiny)
    if lam.min() < -FAIL_TOL * tr:
        raise NotPSDError(f"eigenvalue {lam.min():.3e} below -{FAIL_TOL:g} * trace")
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def operator_sqrt(op: DiscretizedOperator) -> DiscretizedOperator:
    """Symmetric PSD square root; small negative eigenvalues are clamped to zero."""
    lam, V = op.eigh()
    S = _sqrt_matrix(op.matrix, lam, V)
    S = 0.5 * (S + S.T)
    return DiscretizedOperator(op.R, op.M, op.h, op.nodes, op.weights, op.indices, S, True,
                               f"sqrt({op.name})")


def psd_violation(op: DiscretizedOperator) -> float:
    """Most negative eigenvalue relative to the trace (0 when PSD)."""
    return max(0.0, -float(op.eigenvalues()[-1]) / op.trace)


# ---------------------------------------------------------------------------
# Coupling

@dataclass(frozen=True)
class CouplingResult:
    hs_sq_distance: float
    bound_rhs: float
    sobolev_bound: float
    eta: float
    trace_diff: float
    hs_diff: float
    trace_sqrt_k: float
    trace_k: float
    op_sq_distance: float
    op_diff: float
    fitted_constant: float
    M: int
    R: float
    h: float

    @property
    def slack(self) -> float:
        return self.bound_rhs - self.hs_sq_distance

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"slack": self.slack}


def sobolev_form(eta: float, R: float) -> float:
    """eta |B_R| + sqrt(eta) |B_R|^(1/2) R^(7/2)."""
    area = np.pi * R * R
    return eta * area + np.sqrt(eta) * np.sqrt(area) * R ** 3.5


def _sym_op_norm(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(A))))


def coupling_from_operators(opK: DiscretizedOperator, opC: DiscretizedOperator) -> CouplingResult:
    sK, sC = operator_sqrt(opK).matrix, operator_sqrt(opC).matrix
    D = sK - sC
    hs_sq = float(np.sum(D * D))
    diff = opK.matrix - opC.matrix
    tr_diff = abs(opK.trace - opC.trace)
    hs = float(np.linalg.norm(diff))
    tr_sqrt = float(np.trace(sK))
    rhs = tr_diff + 2.0 * np.sqrt(hs) * tr_sqrt
    sw = np.tile(np.sqrt(opK.weights), len(opK.indices))
    eta = float(np.max(np.abs(diff) / np.outer(sw, sw)))
    op_sq = _sym_op_norm(D) ** 2
    op_diff = _sym_op_norm(diff)
    form = sobolev_form(eta, opK.R)
    return CouplingResult(hs_sq, rhs, form, eta, tr_diff, hs, tr_sqrt, opK.trace, op_sq, op_diff,
                          hs_sq / form if form > 0 else 0.0, opK.M, opK.R, opK.h)


def coupling_bound(K, C, M: int, R: float, h: float | None = None) -> CouplingResult:
    """Both sides of |sqrt K - sqrt C|_HS^2 <= |Tr K - Tr C| + 2 |K - C|_HS^(1/2) Tr sqrt K."""
    return coupling_from_operators(build_operator(K, M, R, h), build_operator(C, M, R, h))


@dataclass(frozen=True)
class CoupledSample:
    X: np.ndarray
    Y: np.ndarray
    cross: np.ndarray
    op_k: DiscretizedOperator
    op_c: DiscretizedOperator
    seed: int

    def sobolev_sq_distance(self) -> np.ndarray:
        """sum_a sum_i w_i (X - Y)^2 per replicate: the discrete W^(M,2) distance squared."""
        w = np.tile(self.op_k.weights, len(self.op_k.indices))
        return ((self.X - self.Y) ** 2 * w).sum(axis=-1)

    def cross_source(self) -> NodeCovariance:
        return self.op_k.covariance_source(self.cross)


def sample_coupled(K, C, M: int, R: float, h: float | None = None, seed: int = 0,
                   size: int | None = None, ops: tuple[DiscretizedOperator, DiscretizedOperator] | None = None
                   ) -> CoupledSample:
    """X = sqrt(K) g, Y = sqrt(C) g for a shared standard Gaussian g, returned as node values.

    Rows of X and Y follow the operator ordering (multi-index-major).  ``cross``
    is the weighted cross-covariance sqrt(K) sqrt(C).
    """
    opK, opC = ops if ops is not None else (build_operator(K, M, R, h), build_operator(C, M, R, h))
    sK = operator_sqrt(opK).matrix
    sC = sK if opC is opK else operator_sqrt(opC).matrix
    rng = make_rng(seed)
    g = rng.standard_normal(sK.shape[0] if size is None else (size, sK.shape[0]))
    sw = np.tile(np.sqrt(opK.weights), len(opK.indices))
    X = (g @ sK) / sw
    Y = (g @ sC) / sw
    return CoupledSample(X, Y, sK @ sC, opK, opC, seed)


# ---------------------------------------------------------------------------
# Sobolev embedding constant

def _disk_rule(n_r: int = 24, n_phi: int = 64):
    x, w = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * (x + 1)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    P = np.stack([np.outer(rho, np.cos(phi)), np.outer(rho, np.sin(phi))], -1).reshape(-1, 2)
    W = np.outer(0.5 * w * rho, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    return P, W


def _wave_derivs(k, amp, phase, pts, gamma):
    """d^gamma of sum_j amp_j cos(<k_j, x> + phase_j)."""
    order = gamma[0] + gamma[1]
    arg = pts @ k.T + phase
    base = np.cos(arg + order * np.pi / 2)
    return base @ (amp * k[:, 0] ** gamma[0] * k[:, 1] ** gamma[1])


def _battery(size: int = 200, seed: int = 20240611, band: float = 3.0):
    rng = make_rng(seed)
    for _ in range(size):
        m = int(rng.integers(1, 6))
        rad = band * rng.random(m)
        ang = 2 * np.pi * rng.random(m)
        yield (np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]),
               rng.standard_normal(m), 2 * np.pi * rng.random(m))


def c1_and_sobolev_sq(k, amp, phase, M: int, quad=None, sup_pts=None) -> tuple[float, float]:
    """C^1 norm on B_1 (sup grid) and W^(M,2)(B_1) norm squared (polar quadrature)."""
    P, W = quad if quad is not None else _disk_rule()
    S = sup_pts if sup_pts is not None else _disk_rule(40, 160)[0]
    c1 = max(float(np.max(np.abs(_wave_derivs(k, amp, phase, S, g)))) for g in multi_indices(1))
    wsq = sum(float(np.sum(W * _wave_derivs(k, amp, phase, P, g) ** 2)) for g in multi_indices(M))
    return c1, wsq


@lru_cache(maxsize=None)
def sobolev_constant(M: int) -> float:
    """Smallest A with |u|_C1 <= A |u|_W(M,2) over the seeded band-limited battery on B_1."""
    quad, sup = _disk_rule(), _disk_rule(40, 160)[0]
    best = 0.0
    for k, amp, phase in _battery():
        c1, wsq = c1_and_sobolev_sq(k, amp, phase, M, quad, sup)
        best = max(best, c1 / np.sqrt(wsq))
    return best


def sobolev_to_sup(w_norm_sq: float, M: int, R: float) -> float:
    """C^1 bound A_cal R^(M-1) |u|_W(M,2) on B_R."""
    if int(M) != M or M < 3:
        raise ConfigError("sobolev_to_sup needs an integer M >= 3")
    if w_norm_sq < 0:
        raise DomainError("w_norm_sq must be nonnegative")
    return sobolev_constant(int(M)) * R ** (M - 1) * np.sqrt(w_norm_sq)


# ---------------------------------------------------------------------------
# Spectra

@dataclass(frozen=True)
class DecayReport:
    exponent: float
    intercept: float
    reliable: int
    bound_exponent: float
    scaled_max: float
    bounded: bool
    eigenvalues: np.ndarray


def eigen_decay_check(op: DiscretizedOperator, ell: int, d: int = 2, rel_floor: float = 1e-10) -> DecayReport:
    """Log-log fit of the eigenvalues above rel_floor * lambda_1."""
    lam = op.eigenvalues()
    rel = lam[lam > rel_floor * lam[0]]
    if rel.size < 10:
        raise InsufficientDataError(f"only {rel.size} reliable eigenvalues (need 10)")
    n = np.arange(1, rel.size + 1)
    slope, icpt = np.polyfit(np.log(n), np.log(rel), 1)
    scaled = rel * n ** ((ell + 1) / d) / op.R ** (ell + 1 + d)
    half = scaled.size // 2
    bounded = bool(np.max(scaled[half:]) <= np.max(scaled[:half]))
    return DecayReport(float(slope), float(icpt), int(rel.size), -(ell + 1) / d,
                       float(scaled.max()), bounded, rel)


def save_spectrum(op: DiscretizedOperator, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "eigenvalue"])
        for i, v in enumerate(op.eigenvalues(), 1):
            wr.writerow([i, repr(float(v))])
    return path


def mercer_eval(op: DiscretizedOperator, kernel, x: ArrayLike, y: ArrayLike,
                alpha: MultiIndex = (0, 0), beta: MultiIndex = (0, 0), rel_floor: float = 1e-10) -> np.ndarray:
    """sum_j lambda_j e_j^a(x) e_j^b(y) over reliable eigenpairs, eigenfunctions by Nystrom extension."""
    src = _as_source(kernel)
    lam, V = op.eigh()
    keep = lam > rel_floor * lam[0]
    lam, V = lam[keep], V[:, keep]
    sw = np.sqrt(op.weights)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))

    def feats(p, a):
        rows = [np.asarray(src.cov(a, b, p[:, None, :], op.nodes[None, :, :])) * sw for b in op.indices]
        return np.concatenate(rows, axis=1) @ V / lam          # e_j^a(p)

    ex, ey = feats(x, alpha), feats(y, beta)
    return np.sum(ex * ey * lam, axis=1)


# ---------------------------------------------------------------------------
# Radius budget

LOG_RADIUS_TURN = 4.0 / 25.0
LOG_LAMBDA_MIN_LARGE = 25 * LOG_RADIUS_TURN - 4 * np.log(LOG_RADIUS_TURN)


@dataclass(frozen=True)
class AdmissibleRadius:
    r: float
    a: float
    log_lambda: float
    branch: str

    def residual(self) -> float:
        lr = np.log(self.r)
        return abs(np.expm1(25 * lr - 4 * np.log(abs(lr)) - np.log(self.log_lambda)))


def admissible_radius(lam: float | None = None, *, log_lambda: float | None = None) -> AdmissibleRadius:
    """Largest r with r^25 / (log r)^4 = log(lambda), and a = sqrt(r^17 / log lambda).

    In log form 25 s - 4 log|s| = log log lambda with s = log r.  For
    log lambda above the minimum of r^25 / (log r)^4 on r > 1 the largest root
    lies beyond r = e^(4/25); otherwise the only root lies in (0, 1).  Pass
    ``log_lambda`` directly when lambda itself overflows a float.
    """
    if (lam is None) == (log_lambda is None):
        raise ConfigError("give exactly one of lam and log_lambda")
    L = float(np.log(float(lam))) if log_lambda is None else float(log_lambda)
    if not np.isfinite(L) or L <= 1.0:
        raise DomainError("admissible_radius needs lambda > e")
    target = np.log(L)

    def g(s):
        return 25 * s - 4 * np.log(abs(s)) - target

    if target >= LOG_LAMBDA_MIN_LARGE:
        lo, hi, branch = LOG_RADIUS_TURN, LOG_RADIUS_TURN + 1.0, "large"
        while g(hi) < 0:
            hi *= 2
    else:
        lo, hi, branch = -1.0, -1e-300, "small"
        while g(lo) > 0:
            lo *= 2
    s = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    r = float(np.exp(s))
    return AdmissibleRadius(r, float(np.sqrt(r ** 17 / L)), float(L), branch)
