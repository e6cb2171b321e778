"""Kac-Rice densities, two-point functions and disk variances."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nodalwaves.errors import ConfigError, NearSingularError, RegimeError
from nodalwaves.fields import make_rng
from nodalwaves.kacrice import (H0, INTENSITY, asymptotic_variance, berry_blocks, berry_det,
                                cell_second_moment, condition_on_values, find_t0, gh_norm_product,
                                intensity, joint_covariance, kacrice_discrepancy, l6_integral, norm_mean,
                                norm_product_mean, sigma_tilde, singular_pairs, two_point, two_point_F0,
                                two_point_values, variance_disk)
from nodalwaves.kernels import BerryKernel, GaussianKernel
from nodalwaves.special import bessel_j

BERRY = BerryKernel()


def random_cov(rng, dim):
    A = rng.standard_normal((dim, dim))
    return A @ A.T + 0.1 * np.eye(dim)


# -- Gaussian norm moments ---------------------------------------------------

def test_norm_mean_isotropic():
    # |Z| for Z ~ N(0, s^2 I_2) is Rayleigh with mean s sqrt(pi / 2)
    S = np.array([[[4.0, 0.0], [0.0, 4.0]]])
    assert norm_mean(S)[0] == pytest.approx(2 * np.sqrt(np.pi / 2), rel=1e-12)


def test_norm_mean_degenerate_axis():
    # Z = (X, 0) with X ~ N(0, 1): E|X| = sqrt(2 / pi)
    S = np.array([[[1.0, 0.0], [0.0, 0.0]]])
    assert norm_mean(S)[0] == pytest.approx(np.sqrt(2 / np.pi), rel=1e-10)


def test_norm_product_independent_blocks():
    rng = make_rng(1)
    A, B = random_cov(rng, 2), random_cov(rng, 2)
    S = np.zeros((4, 4))
    S[:2, :2], S[2:, 2:] = A, B
    expect = norm_mean(A[None])[0] * norm_mean(B[None])[0]
    assert norm_product_mean(S[None])[0] == pytest.approx(expect, rel=1e-11)


def test_norm_product_identical_vectors():
    # W = Z gives E|Z|^2 = trace
    rng = make_rng(2)
    A = random_cov(rng, 2)
    S = np.block([[A, A], [A, A]])
    assert norm_product_mean(S[None])[0] == pytest.approx(np.trace(A), rel=1e-10)


@given(st.integers(0, 10 ** 6))
@settings(max_examples=8, deadline=None)
def test_norm_product_against_gauss_hermite(seed):
    S = random_cov(make_rng(seed), 4)
    assert norm_product_mean(S[None])[0] == pytest.approx(gh_norm_product(S), rel=3e-3)


def test_norm_product_against_monte_carlo():
    rng = make_rng(3)
    S = random_cov(rng, 4)
    Z = rng.standard_normal((400_000, 4)) @ np.linalg.cholesky(S).T
    v = np.hypot(Z[:, 0], Z[:, 1]) * np.hypot(Z[:, 2], Z[:, 3])
    assert norm_product_mean(S[None])[0] == pytest.approx(v.mean(), abs=4 * v.std() / np.sqrt(v.size))


# -- Berry conditional covariance -------------------------------------------

def test_intensity_of_berry():
    assert intensity(BERRY) == pytest.approx(INTENSITY, rel=1e-13)
    assert intensity(2.5 * BERRY) == pytest.approx(INTENSITY, rel=1e-13)
    # length density scales with the frequency sqrt(lambda)
    # gradient covariance I / l^2: E|grad| = sqrt(pi / 2) / l, density 1 / sqrt(2 pi)
    assert intensity(GaussianKernel(1.0, 0.5)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("t", [0.3, 1.0, 1.99, 2.0, 3.7, 12.0])
def test_sigma_tilde_matches_general_conditioning(t):
    S = joint_covariance(BERRY, BERRY, BERRY, [[t, 0.0]], [[0.0, 0.0]])
    St, det = condition_on_values(S)
    ct = sigma_tilde(t)
    atol = 1e-9 if t < 1 else 1e-12
    assert np.allclose(ct.matrix, St[0], atol=atol)
    assert ct.sigma22_det == pytest.approx(1 - bessel_j(0, t) ** 2, rel=1e-12)
    # the isotropic entry is J1(t)/t
    assert ct.matrix[1, 3] == pytest.approx(bessel_j(1, t) / t, rel=1e-12)


def test_series_and_closed_form_agree_at_switch():
    lo, hi = berry_blocks(2.0 - 1e-12), berry_blocks(2.0)
    for key in ("a", "b", "d", "a_m", "a_p"):
        assert lo[key] == pytest.approx(hi[key], rel=1e-11, abs=1e-14)


def test_small_t_asymptotics():
    t = 1e-2
    bl = berry_blocks(t)
    assert bl["a_p"] == pytest.approx(t ** 4 / 2304, rel=1e-3)
    assert bl["a_m"] == pytest.approx(t ** 2 / 16, rel=1e-3)
    assert berry_det(t) > 0


def test_sigma_tilde_rejects_degenerate():
    for t in (0.0, -1.0, np.nan):
        with pytest.raises(NearSingularError):
            sigma_tilde(t)
    with pytest.raises(NearSingularError):
        sigma_tilde(1e-7)


def test_F0_against_general_two_point():
    for t in (0.7, 2.5, 9.0):
        g = two_point(BERRY, BERRY, BERRY, [[t, 0.0]], [[0.0, 0.0]])[0]
        assert two_point_F0(t) == pytest.approx(g, rel=1e-9)
    # isotropy: direction does not matter
    g = two_point(BERRY, BERRY, BERRY, [[1.5, 2.0]], [[0.0, 0.0]])[0]
    assert two_point_F0(2.5) == pytest.approx(g, rel=1e-9)


def test_F0_limits():
    assert two_point_F0(30.0) == pytest.approx(H0, rel=0.02)
    assert H0 == pytest.approx(INTENSITY ** 2)
    # integrable 1/t behaviour near the diagonal
    small = np.array([1e-3, 2e-3])
    assert np.all(np.isfinite(two_point_F0(small)))
    assert two_point_F0(1e-3) * 1e-3 == pytest.approx(two_point_F0(2e-3) * 2e-3, rel=0.05)


def test_two_point_values_family():
    v = two_point_values(3.0)
    assert v.F_lambda is None and v.H0 == H0
    C = BERRY + 0.01 * GaussianKernel(1.0, 1.0)
    w = two_point_values(3.0, C, cross=C)
    assert w.F_lambda == pytest.approx(v.F0, rel=0.05)
    assert w.H_lambda == pytest.approx(intensity(C) ** 2, rel=1e-12)


# -- Disk variance ------------------------------------------------------------

def lens_area(r, t):
    return 2 * r * r * np.arccos(t / (2 * r)) - 0.5 * t * np.sqrt(4 * r * r - t * t)


def test_variance_disk_against_adaptive_quadrature():
    r = 2.0
    f = lambda t: 2 * np.pi * t * lens_area(r, t) * (two_point_F0(t) - H0)
    ref, _ = integrate.quad(f, 0, 2 * r, points=[0.5, 1.0, 2.0], limit=200, epsabs=1e-11)
    assert variance_disk(r) == pytest.approx(ref, rel=1e-7)


def test_variance_disk_refinement_and_value():
    v = variance_disk(8.0)
    assert v == pytest.approx(7.27977, rel=1e-5)
    assert variance_disk(8.0, 0.125, 8) == pytest.approx(v, rel=1e-9)
    with pytest.raises(ConfigError):
        variance_disk(0.5)
    assert asymptotic_variance(np.e) == pytest.approx(np.e ** 2 / 256)


def test_cell_second_moment():
    m = cell_second_moment(N=2)
    assert m == pytest.approx(0.0419096, rel=1e-5)
    assert cell_second_moment(N=2, n_angle=24, n_radial=32) == pytest.approx(m, rel=1e-6)
    assert m > (0.25 * INTENSITY) ** 2
    # stationarity: centre is irrelevant
    C = BERRY + 0.01 * GaussianKernel(1.0, 1.0)
    assert cell_second_moment(C, N=2, center=(3.0, 1.0), n_angle=6, n_radial=8) == pytest.approx(
        cell_second_moment(C, N=2, n_angle=6, n_radial=8), rel=1e-9)
    with pytest.raises(RegimeError):
        cell_second_moment(BERRY + 0.5 * GaussianKernel(1.0, 1.0), N=2)


# -- Singular pairs -------------------------------------------------------------

def brute_singular(r, N, eps, probe=17):
    """All ordered pairs of 1/N-cubes meeting B_r, dense sup over the offset square."""
    m = int(np.ceil(r * N)) + 1
    cubes = []
    for i in range(-m, m):
        for j in range(-m, m):
            dx = max(i / N, 0, -(i + 1) / N)
            dy = max(j / N, 0, -(j + 1) / N)
            if dx * dx + dy * dy < r * r:
                cubes.append((i, j))
    o = np.linspace(-1 / N, 1 / N, probe)
    O = np.stack(np.meshgrid(o, o, indexing="ij"), -1).reshape(-1, 2)
    gam = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    cache = {}
    count = 0
    for a in cubes:
        for b in cubes:
            d = (a[0] - b[0], a[1] - b[1])
            if d not in cache:
                u = np.array(d) / N + O
                cache[d] = max(np.max(np.abs(BERRY.profile(g, u))) for g in gam)
            count += cache[d] > eps
    return count, len(cubes)


@pytest.mark.parametrize("eps", [0.2, 0.3, 0.45])
def test_singular_pairs_brute_force(eps):
    res = singular_pairs(2.0, N=2, eps=eps)
    count, cubes = brute_singular(2.0, 2, eps)
    assert res.cubes == cubes
    assert res.count == count


def test_singular_pairs_validation_and_monotone():
    with pytest.raises(ConfigError):
        singular_pairs(2.0, eps=0.6)
    with pytest.raises(ConfigError):
        singular_pairs(2.0, N=0)
    a, b = singular_pairs(3.0, eps=0.2), singular_pairs(3.0, eps=0.4)
    assert a.count >= b.count >= a.cubes  # diagonal pairs are always singular


def test_l6_integral_against_quad():
    # |d^g J0|^6 is maximised by g = 0; radial integral of J0^6
    ref, _ = integrate.quad(lambda t: 2 * np.pi * t * bessel_j(0, t) ** 6, 0, 8, limit=400)
    assert l6_integral(2.0) == pytest.approx(ref, rel=1e-6)


# -- Discrepancy ----------------------------------------------------------------

def test_find_t0():
    t0 = find_t0()
    assert t0 == pytest.approx(1.75, abs=0.06)
    assert berry_det(t0) > 1e-4


def test_discrepancy_identical_kernels():
    rep = kacrice_discrepancy(BERRY, BERRY, None, np.linspace(2, 10, 9))
    assert rep.eta == 0 and rep.max_dF == 0 and rep.ratio_F == 0


def test_discrepancy_scaling_is_invisible():
    # nodal sets do not see the amplitude
    # B = sqrt(1.02) X has cross covariance sqrt(1.02) J0
    rep = kacrice_discrepancy(BERRY, 1.02 * BERRY, np.sqrt(1.02) * BERRY, np.linspace(2, 10, 9))
    assert rep.eta > 0.01 and rep.max_dF < 1e-12 and rep.max_dG < 1e-12


def test_discrepancy_linear_response():
    t = np.linspace(2, 8, 7)
    bump = GaussianKernel(1.0, 1.0)
    r1 = kacrice_discrepancy(BERRY, BERRY + 0.02 * bump, None, t)
    r2 = kacrice_discrepancy(BERRY, BERRY + 0.01 * bump, None, t)
    assert r2.ratio_F == pytest.approx(r1.ratio_F, rel=0.05)
    assert r2.eta == pytest.approx(r1.eta / 2, rel=1e-12)


def test_discrepancy_t0_violation():
    with pytest.raises(RegimeError, match="t0"):
        kacrice_discrepancy(BERRY, BERRY, None, [0.2, 3.0])
    with pytest.raises(ConfigError):
        kacrice_discrepancy(BERRY, BERRY, None, [])
