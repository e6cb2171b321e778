"""Kac-Rice two-point functions, disk variance and singular-pair analysis.

Conditional expectations E[|Z| |W|] of Gaussian gradient pairs use the
Laplace representation

    |z| = (1 / 2 sqrt(pi)) int_0^inf (1 - exp(-s |z|^2)) s^(-3/2) ds,

which turns the expectation into a smooth double integral of
det(I + 2 S D(s, u))^(-1/2).  Trapezoidal quadrature in log s, log u
converges geometrically, so the 1e-10 intensity identity is reachable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Protocol, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.signal import fftconvolve

from .errors import ConfigError, NearSingularError, RegimeError
from .kernels import BerryKernel, StationaryKernel
from .special import (bessel_j, bessel_series, multi_indices,
                      series_add, series_eval, series_mul)

H0 = 0.125
INTENSITY = 1.0 / (2.0 * np.sqrt(2.0))
RHO_MIN = 1e-12
DET_MIN = 1e-4
GRAD = ((1, 0), (0, 1))

_LOG_STEP = 0.5
_LOG_MAX = 64.0
_X = np.arange(-_LOG_MAX, _LOG_MAX + 0.5 * _LOG_STEP, _LOG_STEP)
_S = np.exp(_X)
_W = _LOG_STEP * np.exp(-0.5 * _X)   # ds s^(-3/2) = s^(-1/2) d(log s)


class CovarianceSource(Protocol):
    def cov(self, alpha, beta, x, y) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# Gaussian norm moments

def norm_mean(S: ArrayLike) -> np.ndarray:
    """E|Z| for Z ~ N(0, S), S of shape (..., 2, 2)."""
    S = np.asarray(S, dtype=float)
    tr = S[..., 0, 0] + S[..., 1, 1]
    det = S[..., 0, 0] * S[..., 1, 1] - S[..., 0, 1] ** 2
    sc = np.where(tr > 0, tr / 2.0, 1.0)
    a = (tr / sc)[..., None]
    b = (det / sc ** 2)[..., None]
    s = _S
    one = -np.expm1(-0.5 * np.log1p(2.0 * a * s + 4.0 * b * s * s))
    return np.sqrt(sc) * (one @ _W) / (2.0 * np.sqrt(np.pi))


def _principal_coeffs(S: np.ndarray) -> np.ndarray:
    """c[p, q] = 2^(p+q) * sum of principal minors with p rows in Z and q in W."""
    c = np.zeros(S.shape[:-2] + (3, 3))
    c[..., 0, 0] = 1.0
    for k in range(1, 5):
        for I in combinations(range(4), k):
            p = sum(1 for i in I if i < 2)
            q = k - p
            sub = S[..., list(I), :][..., :, list(I)]
            c[..., p, q] += 2.0 ** k * np.linalg.det(sub)
    return c


def norm_product_mean(S: ArrayLike, chunk: int = 48) -> np.ndarray:
    """E[|Z| |W|] for (Z, W) ~ N(0, S), S of shape (..., 4, 4), Z = first two coordinates."""
    S = np.asarray(S, dtype=float)
    shape = S.shape[:-2]
    S = S.reshape(-1, 4, 4)
    sz = np.sqrt(np.maximum((S[:, 0, 0] + S[:, 1, 1]) / 2.0, 1e-300))
    sw = np.sqrt(np.maximum((S[:, 2, 2] + S[:, 3, 3]) / 2.0, 1e-300))
    d = np.concatenate([np.repeat(1 / sz[:, None], 2, 1), np.repeat(1 / sw[:, None], 2, 1)], axis=1)
    Sn = S * d[:, :, None] * d[:, None, :]
    c = _principal_coeffs(Sn)
    out = np.empty(len(S))
    s = _S
    for lo in range(0, len(S), chunk):
        cc = c[lo:lo + chunk]
        lps = np.log1p(cc[:, 1, 0, None] * s + cc[:, 2, 0, None] * s * s)
        lpu = np.log1p(cc[:, 0, 1, None] * s + cc[:, 0, 2, None] * s * s)
        dpq = cc[:, 1:, 1:] - cc[:, 1:, 0, None] * cc[:, 0, None, 1:]
        sp = np.stack([s, s * s])                       # (2, n)
        num = np.einsum("bpq,pi,qj->bij", dpq, sp, sp)
        ratio = num * np.exp(-lps[:, :, None] - lpu[:, None, :])
        ratio = np.maximum(ratio, -1.0 + 1e-16)
        G = (np.expm1(-0.5 * lps)[:, :, None] * np.expm1(-0.5 * lpu)[:, None, :]
             + np.exp(-0.5 * (lps[:, :, None] + lpu[:, None, :])) * np.expm1(-0.5 * np.log1p(ratio)))
        out[lo:lo + chunk] = np.einsum("i,bij,j->b", _W, G, _W) / (4 * np.pi)
    return (out * sz * sw).reshape(shape)


def _paired_norm_product(A: np.ndarray, b: np.ndarray, D: np.ndarray) -> float:
    """E[|Z| |W|] when (Z_k, W_k), k = 1, 2, are independent pairs.

    Pair k has variances A_k, covariance b_k and determinant D_k = A_k^2 - b_k^2,
    the determinant being supplied separately so it keeps full relative accuracy.
    """
    if np.any(D <= 0) or np.any(A <= 0):
        raise NearSingularError("conditional covariance is not positive definite")
    sc = float(np.sum(A)) / 2.0
    A, b, D = A / sc, b / sc, D / sc ** 2
    s = _S
    L = [np.log1p(2 * a * s) for a in A]
    lps = L[0] + L[1]
    lr = np.zeros((s.size, s.size))
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(2):
            f = s / (1 + 2 * A[k] * s)
            x = 4 * b[k] ** 2 * np.outer(f, f)
            big = np.log1p(2 * A[k] * (s[:, None] + s[None, :]) + 4 * D[k] * np.outer(s, s)) - L[k][:, None] - L[k][None, :]
            lr += np.where(x < 0.5, np.log1p(-np.minimum(x, 0.5)), big)
    one = np.expm1(-0.5 * lps)
    G = np.outer(one, one) + np.exp(-0.5 * (lps[:, None] + lps[None, :])) * np.expm1(-0.5 * lr)
    return sc * float(_W @ G @ _W) / (4 * np.pi)


def gh_norm_product(S: ArrayLike, order: int = 40) -> float:
    """E[|Z| |W|] by tensor Gauss-Hermite cubature after diagonalizing S (cross-check route)."""
    S = np.asarray(S, dtype=float)
    lam, V = np.linalg.eigh(S)
    B = V * np.sqrt(np.clip(lam, 0, None))
    x, w = np.polynomial.hermite_e.hermegauss(order)
    w = w / np.sqrt(2 * np.pi)
    g = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    wg = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    total = 0.0
    for x0, w0 in zip(x, w):
        xi = np.column_stack([np.full(len(g), x0), g])
        v = xi @ B.T
        total += w0 * float(np.sum(wg * np.hypot(v[:, 0], v[:, 1]) * np.hypot(v[:, 2], v[:, 3])))
    return total


# ---------------------------------------------------------------------------
# Berry conditional covariance

@lru_cache(maxsize=None)
def _berry_series():
    one = (Fraction(1),)
    J0, J1, J2 = bessel_series(0), bessel_series(1), bessel_series(2)
    rho = series_add((Fraction(1), one), (Fraction(-1), series_mul(J0, J0)))
    n1 = series_add((Fraction(1, 2), rho), (Fraction(-1), series_mul(J1, J1)))
    j1p = series_add((Fraction(1, 2), J0), (Fraction(-1, 2), J2))
    n2 = series_add((Fraction(1), series_mul(j1p, rho)), (Fraction(-1), series_mul(J0, series_mul(J1, J1))))
    d = J1[1:]                                      # J1(t) / t
    half = (Fraction(1, 2),)
    return {
        "rho": rho, "n1": n1, "n2": n2,
        "n1m": series_add((1, n1), (-1, n2)), "n1p": series_add((1, n1), (1, n2)),
        "d": d, "cm": series_add((1, half), (-1, d)), "cp": series_add((1, half), (1, d)),
    }


_SERIES_T = 2.0


def berry_blocks(t: float) -> dict[str, float]:
    """Entries of the Berry conditional covariance at separation t along axis 1.

    Returns rho = 1 - J0^2 together with the along-axis pair (a, b) and the
    transverse pair (c, d), plus a -/+ b and c -/+ d in cancellation-free form.
    """
    t = float(t)
    if t < _SERIES_T:
        p = _berry_series()
        rho = float(series_eval(p["rho"], t))
        a_m = float(series_eval(p["n1m"], t)) / rho
        a_p = float(series_eval(p["n1p"], t)) / rho
        a = float(series_eval(p["n1"], t)) / rho
        b = float(series_eval(p["n2"], t)) / rho
        d = float(series_eval(p["d"], t))
        c_m = float(series_eval(p["cm"], t))
        c_p = float(series_eval(p["cp"], t))
    else:
        j0, j1, j2 = (bessel_j(k, t) for k in range(3))
        rho = 1.0 - j0 * j0
        j1p = 0.5 * (j0 - j2)
        a = 0.5 - j1 * j1 / rho
        b = j1p - j0 * j1 * j1 / rho
        a_m, a_p = a - b, a + b
        d = j1 / t
        c_m, c_p = 0.5 - d, 0.5 + d
    return dict(rho=rho, a=a, b=b, c=0.5, d=d, a_m=a_m, a_p=a_p, c_m=c_m, c_p=c_p)


@dataclass(frozen=True)
class ConditionalCov:
    """Covariance of (grad X(x), grad X(y)) given X(x) = X(y) = 0."""

    t: float
    sigma22_det: float
    matrix: np.ndarray

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))


def _berry_rho(t: float) -> float:
    if t < _SERIES_T:
        return float(series_eval(_berry_series()["rho"], t))
    return 1.0 - bessel_j(0, t) ** 2


def sigma_tilde(t: float) -> ConditionalCov:
    """Berry conditional covariance, separation t along the first axis.

    Coordinates are ordered (d1 X(x), d2 X(x), d1 X(y), d2 X(y)).
    """
    t = float(t)
    if not np.isfinite(t) or t <= 0:
        raise NearSingularError(f"separation t={t} must be positive")
    if _berry_rho(t) <= RHO_MIN:
        raise NearSingularError(f"rho(t) <= {RHO_MIN} at t={t}")
    bl = berry_blocks(t)
    M = np.zeros((4, 4))
    M[0, 0] = M[2, 2] = bl["a"]
    M[0, 2] = M[2, 0] = bl["b"]
    M[1, 1] = M[3, 3] = bl["c"]
    M[1, 3] = M[3, 1] = bl["d"]
    return ConditionalCov(t, bl["rho"], M)


def berry_det(t: float) -> float:
    """det of the Berry conditional covariance in factored form."""
    bl = berry_blocks(t)
    return bl["a_m"] * bl["a_p"] * bl["c_m"] * bl["c_p"]


# ---------------------------------------------------------------------------
# Two-point functions

def _check_t(t: np.ndarray):
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise NearSingularError("separations must be positive and finite")


def two_point_F0(t: ArrayLike) -> np.ndarray | float:
    """Berry two-point function E[|grad X(x)| |grad X(y)| | X(x)=X(y)=0] p(0, 0) at |x - y| = t."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    _check_t(arr)
    out = np.empty(arr.shape)
    for i, ti in enumerate(arr.ravel()):
        bl = berry_blocks(ti)
        if bl["rho"] <= RHO_MIN:
            raise NearSingularError(f"rho(t) <= {RHO_MIN} at t={ti}")
        A = np.array([bl["a"], bl["c"]])
        b = np.array([bl["b"], bl["d"]])
        D = np.array([bl["a_m"] * bl["a_p"], bl["c_m"] * bl["c_p"]])
        out.flat[i] = _paired_norm_product(A, b, D) / (2 * np.pi * np.sqrt(bl["rho"]))
    return float(out[0]) if np.ndim(t) == 0 else out


def _pts(p, n) -> np.ndarray:
    return np.broadcast_to(np.asarray(p, dtype=float), (n, 2))


def joint_covariance(ka: CovarianceSource, kb: CovarianceSource, kx: CovarianceSource,
                     x: ArrayLike, y: ArrayLike) -> np.ndarray:
    """Covariance of (grad A(x), grad B(y), A(x), B(y)), shape (P, 6, 6).

    ``kx.cov(alpha, beta, x, y)`` is E[d^alpha A(x) d^beta B(y)].
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    P = max(len(x), len(y))
    x, y = _pts(x, P), _pts(y, P)
    idx = [("A", g) for g in GRAD] + [("B", g) for g in GRAD] + [("A", (0, 0)), ("B", (0, 0))]
    S = np.empty((P, 6, 6))
    for i, (fi, ai) in enumerate(idx):
        for j, (fj, aj) in enumerate(idx):
            if j < i:
                continue
            if fi == "A" and fj == "A":
                v = ka.cov(ai, aj, x, x)
            elif fi == "B" and fj == "B":
                v = kb.cov(ai, aj, y, y)
            elif fi == "A":
                v = kx.cov(ai, aj, x, y)
            else:
                v = kx.cov(aj, ai, x, y)
            S[:, i, j] = S[:, j, i] = v
    return S


def condition_on_values(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient covariance given both values vanish, and det of the value block."""
    S11, S12, S22 = S[:, :4, :4], S[:, :4, 4:], S[:, 4:, 4:]
    det = S22[:, 0, 0] * S22[:, 1, 1] - S22[:, 0, 1] ** 2
    inv = np.empty_like(S22)
    inv[:, 0, 0] = S22[:, 1, 1]
    inv[:, 1, 1] = S22[:, 0, 0]
    inv[:, 0, 1] = inv[:, 1, 0] = -S22[:, 0, 1]
    inv /= det[:, None, None]
    St = S11 - S12 @ inv @ np.swapaxes(S12, 1, 2)
    return 0.5 * (St + np.swapaxes(St, 1, 2)), det


def two_point(ka: CovarianceSource, kb: CovarianceSource, kx: CovarianceSource,
              x: ArrayLike, y: ArrayLike) -> np.ndarray:
    """Kac-Rice two-point function of the zero sets of A (at x) and B (at y)."""
    S = joint_covariance(ka, kb, kx, x, y)
    St, det = condition_on_values(S)
    if np.any(det <= RHO_MIN):
        raise NearSingularError(f"value covariance determinant {det.min():.3g} <= {RHO_MIN}")
    return norm_product_mean(St) / (2 * np.pi * np.sqrt(det))


def intensity(kernel: CovarianceSource, x: ArrayLike = (0.0, 0.0)) -> np.ndarray | float:
    """Zero-set length density E[|grad X(x)| | X(x)=0] p_X(x)(0)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.asarray(kernel.cov((0, 0), (0, 0), x, x), dtype=float)
    c = np.stack([kernel.cov(g, (0, 0), x, x) for g in GRAD], -1)
    Gm = np.empty(x.shape[:1] + (2, 2))
    for i, a in enumerate(GRAD):
        for j, b in enumerate(GRAD):
            Gm[:, i, j] = kernel.cov(a, b, x, x)
    Gc = Gm - c[:, :, None] * c[:, None, :] / v[:, None, None]
    out = norm_mean(Gc) / np.sqrt(2 * np.pi * v)
    return float(out[0]) if len(out) == 1 else out


@dataclass(frozen=True)
class TwoPointValues:
    t: float
    F0: float
    H0: float
    F_lambda: float | None = None
    G_lambda: float | None = None
    H_lambda: float | None = None
    L_lambda: float | None = None


def two_point_values(t: float, perturbed: StationaryKernel | None = None,
                     cross: CovarianceSource | None = None,
                     direction: Sequence[float] = (1.0, 0.0)) -> TwoPointValues:
    """F0 and H0 for the Berry field; the perturbed family when a kernel C is supplied.

    F_lambda uses C alone, G_lambda pairs Berry at x with C at y through
    ``cross``, H_lambda = I_C(x) I_C(y) and L_lambda = I_K(x) I_C(y), where I
    denotes the one-point length density.
    """
    t = float(t)
    F0 = float(two_point_F0(t))
    if perturbed is None:
        return TwoPointValues(t, F0, H0)
    e = np.asarray(direction, dtype=float)
    x, y = t * e / np.linalg.norm(e), np.zeros(2)
    K = BerryKernel()
    Fl = float(two_point(perturbed, perturbed, perturbed, x, y)[0])
    Gl = float(two_point(K, perturbed, cross, x, y)[0]) if cross is not None else None
    Ic_x, Ic_y = float(intensity(perturbed, x)), float(intensity(perturbed, y))
    return TwoPointValues(t, F0, H0, Fl, Gl, Ic_x * Ic_y, float(intensity(K, x)) * Ic_y)


# ---------------------------------------------------------------------------
# Disk variance

_T_FIRST = 0.5


@lru_cache(maxsize=8)
def _gl(n: int):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=4096)
def _panel(k: int, width: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes, weights and F0 - H0 on the k-th regular panel (k < 0: t = s^2 head)."""
    t, wt = _head_rule(width, nodes) if k < 0 else _regular_rule(k, width, nodes)
    return t, wt * (two_point_F0(t) - H0)


def _head_rule(width: float, nodes: int):
    """t = s^2 on [0, T_FIRST], split into equal s-panels (one per 0.25 of panel width)."""
    x, w = _gl(2 * nodes)
    m = max(1, int(round(0.25 / width)))
    e = np.linspace(0.0, np.sqrt(_T_FIRST), m + 1)
    s = (e[:-1, None] + 0.5 * np.diff(e)[:, None] * (x + 1)).ravel()
    ws = (0.5 * np.diff(e)[:, None] * w).ravel()
    return s * s, ws * 2 * s


def _regular_rule(k: int, width: float, nodes: int):
    x, w = _gl(nodes)
    lo = _T_FIRST + k * width
    return lo + 0.5 * width * (x + 1), 0.5 * width * w


def overlap_area(r: float, t: ArrayLike) -> np.ndarray:
    """Area of the intersection of two radius-r disks at centre distance t."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 2 * r)
    return 2 * r * r * np.arccos(t / (2 * r)) - 0.5 * t * np.sqrt(np.maximum(4 * r * r - t * t, 0.0))


def pair_distance_weight(r: float, t: ArrayLike) -> np.ndarray:
    """lambda_r(t) = 2 pi t gamma_r(t): density of |x - y| for x, y in the disk (unnormalized)."""
    t = np.asarray(t, dtype=float)
    return 2 * np.pi * t * overlap_area(r, t)


def _radial_rule(r: float, width: float, nodes: int):
    """Panel layout on [0, 2r]: head with t = s^2, regular panels, tail with t = 2r - v^2."""
    K = max(0, int(np.floor((2 * r - _T_FIRST) / width - 0.5)))
    tail_lo = _T_FIRST + K * width
    x, w = _gl(2 * nodes)
    hi = np.sqrt(2 * r - tail_lo)
    v = 0.5 * hi * (x + 1)
    return K, 2 * r - v * v, 0.5 * hi * w * 2 * v


def variance_disk(r: float, panel_width: float = 0.25, nodes: int = 8) -> float:
    """Var of the Berry nodal length in a radius-r disk by Kac-Rice radial quadrature."""
    r = float(r)
    if not np.isfinite(r) or r < 1:
        raise ConfigError(f"variance_disk needs r >= 1, got {r}")
    K, t_tail, w_tail = _radial_rule(r, panel_width, nodes)
    total = 0.0
    for k in range(-1, K):
        t, wf = _panel(k, panel_width, nodes)
        total += float(np.sum(wf * pair_distance_weight(r, t)))
    total += float(np.sum(w_tail * (two_point_F0(t_tail) - H0) * pair_distance_weight(r, t_tail)))
    return total


def distance_weight_total(r: float, panel_width: float = 0.25, nodes: int = 8) -> float:
    """Quadrature of lambda_r over [0, 2r] on the variance rule; equals (pi r^2)^2."""
    K, t_tail, w_tail = _radial_rule(r, panel_width, nodes)
    t, w = _head_rule(panel_width, nodes)
    total = float(np.sum(w * pair_distance_weight(r, t)))
    for k in range(K):
        t, w = _regular_rule(k, panel_width, nodes)
        total += float(np.sum(w * pair_distance_weight(r, t)))
    return total + float(np.sum(w_tail * pair_distance_weight(r, t_tail)))


def asymptotic_variance(r: float) -> float:
    return r * r * np.log(r) / 256.0


# ---------------------------------------------------------------------------
# Cell second moment

def kernel_deviation(kernel: StationaryKernel, reference: StationaryKernel, u: np.ndarray,
                     max_order: int = 1) -> float:
    """sup over u and alpha, beta in S(max_order) of |K_ab - R_ab| for stationary kernels."""
    gammas = {(a[0] + b[0], a[1] + b[1]) for a in multi_indices(max_order) for b in multi_indices(max_order)}
    return float(max(np.max(np.abs(kernel.profile(g, u) - reference.profile(g, u))) for g in gammas))


def cell_second_moment(kernel: StationaryKernel | None = None, N: int = 2,
                       center: Sequence[float] = (0.0, 0.0), n_angle: int = 12, n_radial: int = 16,
                       eta_max: float = 0.1) -> float:
    """E[L(Q)^2] for the square Q of side 1/N centred at ``center``.

    The double integral over Q x Q is written in the difference variable
    u = x - y with overlap weight (1/N - |u1|)(1/N - |u2|) and integrated in
    polar coordinates: eight angular sectors split at multiples of pi/4, and
    Gauss-Legendre in the radius (the 1/|u| singularity cancels the Jacobian).
    """
    if N < 1:
        raise ConfigError("N must be a positive integer")
    side = 1.0 / N
    berry = BerryKernel()
    if kernel is None:
        kernel = berry
    g = np.linspace(-side, side, 21)
    U = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    eta = kernel_deviation(kernel, berry, U)
    if eta > eta_max:
        raise RegimeError(f"kernel deviates from Berry by eta={eta:.3g} > {eta_max} on Q x Q")
    xa, wa = _gl(n_angle)
    xr, wr = _gl(n_radial)
    c = np.asarray(center, dtype=float)
    total = 0.0
    for sec in range(8):
        lo = sec * np.pi / 4
        phi = lo + np.pi / 8 * (xa + 1)
        wphi = np.pi / 8 * wa
        rmax = side / np.maximum(np.abs(np.cos(phi)), np.abs(np.sin(phi)))
        rho = 0.5 * rmax[:, None] * (xr[None, :] + 1)
        wrho = 0.5 * rmax[:, None] * wr[None, :]
        u = np.stack([rho * np.cos(phi)[:, None], rho * np.sin(phi)[:, None]], -1).reshape(-1, 2)
        if kernel is berry:
            F = two_point_F0(np.hypot(u[:, 0], u[:, 1]))
        else:
            F = two_point(kernel, kernel, kernel, c + 0.5 * u, c - 0.5 * u)
        ov = (side - np.abs(u[:, 0])) * (side - np.abs(u[:, 1]))
        total += float(np.sum((wphi[:, None] * wrho * rho).ravel() * F * ov))
    return total


# ---------------------------------------------------------------------------
# Singular pairs

@dataclass(frozen=True)
class SingularPairsResult:
    r: float
    N: int
    eps: float
    count: int
    l6_integral: float
    cubes: int
    refined: int

    @property
    def count_ratio(self) -> float:
        return self.count / (self.r ** 2 * np.log(self.r))

    @property
    def l6_ratio(self) -> float:
        return self.l6_integral / np.log(self.r)


_S1_GAMMAS = tuple(sorted({(a[0] + b[0], a[1] + b[1]) for a in multi_indices(1) for b in multi_indices(1)}))


def _max_abs_deriv(kernel: StationaryKernel, u: np.ndarray) -> np.ndarray:
    return np.max(np.stack([np.abs(kernel.profile(g, u)) for g in _S1_GAMMAS]), axis=0)


def _disk_cubes(r: float, N: int) -> tuple[np.ndarray, int]:
    m = int(np.ceil(r * N)) + 1
    z = np.arange(-m, m)
    dx = np.maximum.reduce([z / N, np.zeros(z.size), -(z + 1) / N])
    inside = dx[:, None] ** 2 + dx[None, :] ** 2 < r * r
    return inside, m


def _offset_max(kernel, dx, dy, N, n_probe, chunk=4096):
    o = np.linspace(-1.0 / N, 1.0 / N, n_probe)
    O = np.stack(np.meshgrid(o, o, indexing="ij"), -1).reshape(-1, 2)
    out = np.empty(dx.size)
    for lo in range(0, dx.size, chunk):
        c = np.column_stack([dx[lo:lo + chunk], dy[lo:lo + chunk]]) / N
        u = c[:, None, :] + O[None, :, :]
        out[lo:lo + chunk] = _max_abs_deriv(kernel, u).max(axis=1)
    return out


def l6_integral(r: float, kernel: StationaryKernel | None = None, panel: float = 0.5,
                nodes: int = 8, n_angle: int = 48) -> float:
    """max over alpha, beta in S(1) of the integral of |K_ab|^6 over the disk of radius 4r."""
    kernel = kernel or BerryKernel()
    R = 4.0 * r
    npan = int(np.ceil(R / panel))
    edges = np.linspace(0, R, npan + 1)
    x, w = _gl(nodes)
    rho = (edges[:-1, None] + 0.5 * np.diff(edges)[:, None] * (x + 1)).ravel()
    wr = (0.5 * np.diff(edges)[:, None] * w).ravel()
    phi = 2 * np.pi * np.arange(n_angle) / n_angle
    u = np.stack([rho[:, None] * np.cos(phi), rho[:, None] * np.sin(phi)], -1)
    best = 0.0
    for g in _S1_GAMMAS:
        v = kernel.profile(g, u) ** 6
        best = max(best, float(np.sum(wr * rho * v.mean(axis=1)) * 2 * np.pi))
    return best


def singular_pairs(r: float, N: int = 2, eps: float = 0.1, kernel: StationaryKernel | None = None,
                   probe: int = 3, refine: int = 17, lipschitz: float = 1.0) -> SingularPairsResult:
    """Ordered singular cube pairs among the 1/N-cubes meeting B_r, and the L6 integral.

    A pair with offset d is singular when max |d^gamma k(u)|, |gamma| <= 2,
    exceeds ``eps`` somewhere on d/N + (-1/N, 1/N)^2.  The offset square is
    probed on the (2 probe - 1)^2 grid of point differences of a probe x probe
    grid per cube; offsets within ``lipschitz`` times the probe gap of the
    threshold are re-probed on a refine x refine grid.
    """
    if int(N) != N or N < 1:
        raise ConfigError("N must be a positive integer")
    if not (0 < eps < 0.5):
        raise ConfigError("eps must lie in (0, 1/2)")
    kernel = kernel or BerryKernel()
    inside, m = _disk_cubes(r, N)
    ind = inside.astype(float)
    auto = np.rint(fftconvolve(ind, ind[::-1, ::-1])).astype(np.int64)
    di, dj = np.nonzero(auto > 0)
    pairs = auto[di, dj]
    dx, dy = di - (2 * m - 1), dj - (2 * m - 1)
    n_probe = 2 * probe - 1
    val = _offset_max(kernel, dx, dy, N, n_probe)
    gap = (2.0 / N) / (n_probe - 1)
    near = (val <= eps) & (val > eps - lipschitz * gap / np.sqrt(2))
    if near.any():
        val[near] = _offset_max(kernel, dx[near], dy[near], N, refine)
    count = int(pairs[val > eps].sum())
    return SingularPairsResult(float(r), int(N), float(eps), count, l6_integral(r, kernel),
                               int(inside.sum()), int(near.sum()))


# ---------------------------------------------------------------------------
# Discrepancy between kernels

def conditional_det(ka, kb, kx, x, y) -> np.ndarray:
    St, _ = condition_on_values(joint_covariance(ka, kb, kx, x, y))
    return np.linalg.det(St)


def find_t0(kernel: CovarianceSource | None = None, t_probe: ArrayLike | None = None,
            threshold: float = DET_MIN) -> float:
    """Smallest probed t beyond which det of the conditional covariance exceeds ``threshold``."""
    if t_probe is None:
        t_probe = np.linspace(0.05, 40.0, 800)
    t = np.asarray(t_probe, dtype=float)
    if kernel is None:
        d = np.array([berry_det(ti) for ti in t])
    else:
        x = np.column_stack([t, np.zeros_like(t)])
        d = conditional_det(kernel, kernel, kernel, x, np.zeros(2))
    bad = np.nonzero(~(d > threshold))[0]
    if bad.size == 0:
        return float(t[0])
    if bad[-1] == t.size - 1:
        raise RegimeError("determinant stays below threshold at the largest probed t")
    return float(t[bad[-1] + 1])


@dataclass(frozen=True)
class DiscrepancyReport:
    t_grid: np.ndarray
    eta: float
    zeta: float
    max_dF: float
    max_dG: float
    ratio_F: float
    ratio_G: float
    F0: np.ndarray
    F_B: np.ndarray
    G: np.ndarray
    min_det: float
    extras: dict = field(default_factory=dict)


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return num / den


def _sup_dev(k1, k2, x, y, orders) -> float:
    best = 0.0
    for a in orders:
        for b in orders:
            for p, q in ((x, y), (x, x), (y, y)):
                best = max(best, float(np.max(np.abs(np.asarray(k1.cov(a, b, p, q)) - np.asarray(k2.cov(a, b, p, q))))))
    return best


def kacrice_discrepancy(kernel_a: CovarianceSource, kernel_b: CovarianceSource,
                        cross: CovarianceSource | None, t_grid: ArrayLike,
                        origin: Sequence[float] = (0.0, 0.0), direction: Sequence[float] = (1.0, 0.0),
                        max_order: int | None = None) -> DiscrepancyReport:
    """Deviation of the two-point functions of B and of the pair (A, B) from those of A.

    Points are x = origin + t e and y = origin.  eta is the sup deviation of
    B from A, zeta that of the cross covariance from A, both over derivative
    orders S(max_order) at the probed pairs.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t <= 0):
        raise ConfigError("t_grid must be a nonempty list of positive separations")
    if cross is None:
        cross = kernel_b
    if max_order is None:
        caps = [getattr(k, "max_order", 3) for k in (kernel_a, kernel_b, cross)]
        max_order = min(caps)
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    y = np.broadcast_to(np.asarray(origin, dtype=float), (t.size, 2))
    x = y + t[:, None] * e
    dets = np.concatenate([conditional_det(kernel_a, kernel_a, kernel_a, x, y),
                           conditional_det(kernel_b, kernel_b, kernel_b, x, y),
                           conditional_det(kernel_a, kernel_b, cross, x, y)])
    if np.any(~(dets > DET_MIN)):
        raise RegimeError(f"t0 violation: conditional determinant {np.nanmin(dets):.3g} <= {DET_MIN} on t_grid")
    orders = multi_indices(max_order)
    eta = _sup_dev(kernel_a, kernel_b, x, y, orders)
    zeta = _sup_dev(kernel_a, cross, x, y, orders)
    F0 = two_point(kernel_a, kernel_a, kernel_a, x, y)
    FB = two_point(kernel_b, kernel_b, kernel_b, x, y)
    G = two_point(kernel_a, kernel_b, cross, x, y)
    dF = float(np.max(np.abs(F0 - FB)))
    dG = float(np.max(np.abs(F0 - G)))
    return DiscrepancyReport(t, eta, zeta, dF, dG, _ratio(dF, eta), _ratio(dG, zeta), F0, FB, G,
                             float(dets.min()), {"max_order": max_order})
