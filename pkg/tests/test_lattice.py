"""Lattice points, spectral measures and their distances to the uniform law."""

from math import isqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nodalwaves.errors import DomainError
from nodalwaves.lattice import (SpectralMeasure, arithmetic_cov, arithmetic_kernel, is_sum_of_two_squares,
                                kol_distance, lattice_points, lattice_summary, mu_hat4, mu_hat4_imag, r2,
                                w1_distance)

from oracles import brute_kol, brute_mu4, brute_points, brute_w1


def test_spot_values():
    lat = lattice_points(5)
    assert lat.cardinality == 8
    m = SpectralMeasure.from_lattice(lat)
    assert mu_hat4(m) == pytest.approx(-0.28, abs=1e-12)
    assert kol_distance(SpectralMeasure.from_lattice(lattice_points(1))) == pytest.approx(0.25, abs=1e-15)
    assert lattice_points(3).cardinality == 0
    assert lattice_points(25).cardinality == 12


@pytest.mark.parametrize("n", range(1, 400))
def test_against_brute_force(n):
    lat = lattice_points(n)
    pts = brute_points(n)
    assert lat.cardinality == len(pts) == r2(n)
    assert sorted(map(tuple, lat.points.tolist())) == sorted(pts)
    if pts:
        m = SpectralMeasure.from_lattice(lat)
        assert mu_hat4(m) == pytest.approx(brute_mu4(n, pts), abs=1e-12)
        assert kol_distance(m) == pytest.approx(brute_kol(pts), abs=1e-12)
        assert w1_distance(m) == pytest.approx(brute_w1(pts), abs=1e-12)
        assert abs(mu_hat4_imag(m)) < 1e-12


def test_points_sorted_by_angle_and_symmetric():
    lat = lattice_points(65)
    th = lat.angles()
    assert np.all(np.diff(th) >= 0)
    s = set(map(tuple, lat.points.tolist()))
    assert all((-a, -b) in s and (b, a) in s for a, b in s)
    assert len(lat.half()) == lat.cardinality // 2


def test_invalid_n():
    for bad in (0, -3, 2.5):
        with pytest.raises(DomainError):
            lattice_points(bad)
    with pytest.raises(DomainError):
        arithmetic_kernel(3)
    with pytest.raises(DomainError):
        SpectralMeasure.from_lattice(lattice_points(7))


def test_uniform_measure_limits():
    m = SpectralMeasure.from_angles(2 * np.pi * (np.arange(4000) + 0.5) / 4000)
    assert kol_distance(m) == pytest.approx(1 / 8000, rel=1e-9)
    assert w1_distance(m) < 1e-3
    assert abs(mu_hat4(m)) < 1e-12


@given(st.lists(st.floats(0, 2 * np.pi - 1e-9), min_size=1, max_size=30))
@settings(max_examples=60, deadline=None)
def test_kol_bounds_w1(angles):
    m = SpectralMeasure.from_angles(angles)
    k, w = kol_distance(m), w1_distance(m)
    assert 0 <= k <= 1
    assert 0 <= w <= 2 * np.pi * k + 1e-12


def test_arithmetic_covariance():
    lat = lattice_points(25)
    assert arithmetic_cov(lat, [0.0, 0.0]) == pytest.approx(1.0)
    K = arithmetic_kernel(25)
    v = np.array([0.7, -1.9])
    assert float(K(v, np.zeros(2))) == pytest.approx(arithmetic_cov(lat, v), abs=1e-14)
    # isotropic second moments: E[(d1 T)^2] = 1/2 on the rescaled frame
    assert float(K.cov((1, 0), (1, 0), np.zeros(2), np.zeros(2))) == pytest.approx(0.5)


def test_summary_json_ready():
    s = lattice_summary(10)
    assert s["N_n"] == 8 and len(s["points"]) == 8
    assert lattice_summary(7)["mu_hat4"] is None
    assert is_sum_of_two_squares(13) and not is_sum_of_two_squares(21)
