"""Acceptance suite: one PASS/FAIL line per criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed in the
"acceptance criteria" section of the terminal summary.  ``python3
tests/test_acceptance.py`` runs the same suite quietly.  The full suite takes about
seventeen minutes on one core, most of it Monte Carlo.
"""

from __future__ import annotations

import time
from collections import defaultdict
from math import isqrt, pi

import numpy as np
import pytest

from nodalwaves.coupling import (build_operator, coupling_from_operators, eigen_decay_check,
                                 sample_coupled)
from nodalwaves.fields import make_rng
from nodalwaves.harness.cli import main
from nodalwaves.harness.config import arithmetic_config, berry_config
from nodalwaves.harness.experiments import mc_nodal_experiment
from nodalwaves.harness.stats import nclt_compare, nclt_draws
from nodalwaves.kacrice import singular_pairs, variance_disk
from nodalwaves.kernels import BerryKernel, GaussianKernel
from nodalwaves.lattice import (SpectralMeasure, arithmetic_kernel, kol_distance, lattice_points, mu_hat4,
                                r2, w1_distance)

from conftest import ACCEPTANCE_LINES
from oracles import brute_kol, brute_mu4, brute_w1

BERRY = BerryKernel()


def report(k: int, ok: bool, detail: str, t0: float, tag: str = "") -> None:
    line = f"CRITERION {k}{tag}: {'PASS' if ok else 'FAIL'}  {detail}  [{time.perf_counter() - t0:.0f}s]"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def test_criterion_01_berry_mean():
    t0 = time.perf_counter()
    cfg = berry_config(20.0, 200, seed=20240601, h=0.01)
    res = mc_nodal_experiment(cfg)
    density = res.mean / (pi * 20.0 ** 2)
    target = 1 / (2 * np.sqrt(2))
    ok = abs(density / target - 1) <= 0.02
    report(1, ok, f"mean/(pi r^2) = {density:.5f}, target {target:.5f} +/- 2% (J={cfg.field.J}, M=200)", t0)
    assert ok


def test_criterion_02_variance_vs_monte_carlo():
    t0 = time.perf_counter()
    cfg = berry_config(8.0, 2000, seed=20240602)
    res = mc_nodal_experiment(cfg)
    kr = variance_disk(8.0)
    rel = abs(kr / res.variance - 1)
    ok = rel <= 0.15
    report(2, ok, f"variance_disk(8) = {kr:.4f}, MC variance = {res.variance:.4f} (M=2000), rel diff {rel:.3f} <= 0.15", t0)
    assert ok


def test_criterion_03_variance_constant_trend():
    t0 = time.perf_counter()
    radii = [16.0, 32.0, 64.0]
    ratios = [variance_disk(r) / (r * r * np.log(r)) * 256 for r in radii]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    in_band = 0.6 <= ratios[-1] <= 1.6
    ok = decreasing and in_band
    report(3, ok, f"256 Var/(r^2 log r) at r=16,32,64 = {', '.join(f'{v:.3f}' for v in ratios)}; "
                  f"decreasing={decreasing}, r=64 in [0.6,1.6]={in_band}", t0)
    assert ok


def test_criterion_04_clt_proxy():
    t0 = time.perf_counter()
    cfg = berry_config(48.0, 400, seed=20240604, kind="clt")
    res = mc_nodal_experiment(cfg)
    ok = res.ks_stat <= 0.09
    report(4, ok, f"KS distance = {res.ks_stat:.4f} <= 0.09 (p = {res.p_value:.3f}, r=48, M=400, J={cfg.field.J})", t0)
    assert ok


def test_criterion_05_arithmetic_mean():
    t0 = time.perf_counter()
    cfg = arithmetic_config(1, 500, domain="torus", coords="standard", seed=20240605)
    res = mc_nodal_experiment(cfg)
    target = np.sqrt(2) * pi ** 2
    ok = abs(res.mean / target - 1) <= 0.02
    report(5, ok, f"mean = {res.mean:.4f}, target sqrt(2) pi^2 = {target:.4f} +/- 2% (torus [0,2pi)^2, n=1, M=500)", t0)
    assert ok


def test_criterion_06_non_gaussian_limit():
    t0 = time.perf_counter()
    draws = nclt_draws(1.0, 10_000, seed=20240606)
    rep = nclt_compare(draws, 1.0, draws=100_000, seed=6)
    rejects = rep.normal_p_value < 1e-3
    variances = {eta: float(nclt_draws(eta, 1_000_000, seed=7).var()) for eta in (0.0, 0.5, 1.0)}
    unit = all(abs(v - 1) <= 0.02 for v in variances.values())
    ok = rejects and unit
    report(6, ok, f"KS vs N(0,1) p = {rep.normal_p_value:.2e} < 1e-3; limit-law variances "
                  f"{', '.join(f'eta={e}: {v:.4f}' for e, v in variances.items())} within 0.02 of 1", t0)
    assert ok


def _random_pair(rng):
    """Berry or arithmetic reference kernel against a perturbed partner."""
    kind = int(rng.integers(4))
    ell = float(rng.uniform(0.3, 2.0))
    delta = float(rng.uniform(0.0, 0.3))
    if kind == 0:
        return BERRY, BERRY + delta * GaussianKernel(1.0, ell)
    if kind == 1:
        return BERRY, (1.0 + delta) * BERRY
    if kind == 2:
        n = int(rng.choice([5, 25, 65, 85, 325]))
        return BERRY, arithmetic_kernel(n)
    return BERRY + delta * GaussianKernel(1.0, ell), GaussianKernel(float(rng.uniform(0.5, 1.5)), ell)


def test_criterion_07_coupling_bound():
    t0 = time.perf_counter()
    rng = make_rng(20240607)
    violations = 0
    worst = np.inf
    for _ in range(100):
        K, C = _random_pair(rng)
        M = int(rng.integers(2))
        R = float(rng.choice([1.0, 1.5, 2.0]))
        res = coupling_from_operators(build_operator(K, M, R, R / 10), build_operator(C, M, R, R / 10))
        slack = res.bound_rhs - res.hs_sq_distance + 1e-8 * res.trace_k
        worst = min(worst, res.slack / max(res.bound_rhs, 1e-300))
        violations += slack < 0
    C = BERRY + 0.1 * GaussianKernel(1.0, 0.8)
    cs = sample_coupled(BERRY, C, 0, 2.0, 0.2, seed=20240617, size=500)
    hs = coupling_from_operators(cs.op_k, cs.op_c).hs_sq_distance
    d = cs.sobolev_sq_distance()
    se = d.std(ddof=1) / np.sqrt(d.size)
    iso = abs(d.mean() - hs) <= 3 * se
    ok = violations == 0 and iso
    report(7, ok, f"violations = {violations}/100 (min relative slack {worst:.3f}); isometry: MC mean "
                  f"{d.mean():.5f} vs |sqrt K - sqrt C|_HS^2 = {hs:.5f}, |diff| = {abs(d.mean() - hs) / se:.2f} SE <= 3", t0)
    assert ok


def test_criterion_08_eigenvalue_decay():
    t0 = time.perf_counter()
    op = build_operator(BERRY, 0, 2.0)
    rep = eigen_decay_check(op, ell=3)
    ok = rep.exponent <= -2
    report(8, ok, f"fitted exponent = {rep.exponent:.3f} <= -2 over {rep.reliable} reliable eigenvalues "
                  f"(M=0, R=2, h={op.h})", t0)
    assert ok


def test_criterion_09_lattice_oracles():
    t0 = time.perf_counter()
    limit = 10_000
    m = isqrt(limit)
    buckets = defaultdict(list)
    for a in range(-m, m + 1):
        for b in range(-m, m + 1):
            if 0 < a * a + b * b <= limit:
                buckets[a * a + b * b].append((a, b))
    mismatches = []
    worst = 0.0
    for n in range(1, limit + 1):
        lat = lattice_points(n)
        pts = buckets.get(n, [])
        if lat.cardinality != len(pts) or r2(n) != len(pts):
            mismatches.append(n)
            continue
        if not pts:
            continue
        if sorted(map(tuple, lat.points.tolist())) != sorted(pts):
            mismatches.append(n)
            continue
        meas = SpectralMeasure.from_lattice(lat)
        errs = (abs(mu_hat4(meas) - brute_mu4(n, pts)), abs(kol_distance(meas) - brute_kol(pts)),
                abs(w1_distance(meas) - brute_w1(pts)))
        worst = max(worst, *errs)
        if max(errs) > 1e-9:
            mismatches.append(n)
    spots = (lattice_points(5).cardinality == 8
             and abs(mu_hat4(SpectralMeasure.from_lattice(lattice_points(5))) + 0.28) <= 1e-9
             and abs(kol_distance(SpectralMeasure.from_lattice(lattice_points(1))) - 0.25) <= 1e-9)
    ok = not mismatches and spots
    report(9, ok, f"{len(buckets)} values of n <= 10^4 in S checked, mismatches = {len(mismatches)}, "
                  f"max real error {worst:.1e}; spot values ok = {spots}", t0)
    assert ok


def _singular_trend(eps):
    rows = [singular_pairs(r, N=2, eps=eps) for r in (8.0, 16.0, 32.0, 64.0)]
    counts = [s.count_ratio for s in rows]
    l6 = [s.l6_ratio for s in rows]
    dec = lambda v: all(b < a for a, b in zip(v, v[1:]))
    return counts, l6, dec(counts), dec(l6)


def test_criterion_10_singular_pairs():
    t0 = time.perf_counter()
    counts, l6, dc, dl = _singular_trend(0.1)
    ok = dc and dl
    report(10, ok, f"eps=0.1: count/(r^2 log r) = {', '.join(f'{v:.0f}' for v in counts)} (decreasing={dc}); "
                   f"L6/log r = {', '.join(f'{v:.3f}' for v in l6)} (decreasing={dl})", t0)
    t1 = time.perf_counter()
    c3, l3, dc3, dl3 = _singular_trend(0.3)
    report(10, dc3 and dl3, f"supplementary eps=0.3: count/(r^2 log r) = {', '.join(f'{v:.0f}' for v in c3)} "
                            f"(decreasing={dc3}); L6 decreasing={dl3}", t1, tag=".s")
    assert ok


RERUNS = [
    (["mc-experiment", "--r", "3", "--M", "8", "--h", "0.02", "--seed", "5"], ["replicates.csv", "summary.csv"]),
    (["mc-experiment", "--kind", "arithmetic", "--n", "5", "--domain", "torus", "--coords", "standard",
      "--M", "8", "--h", "0.02", "--seed", "5"], ["replicates.csv", "summary.csv"]),
    (["phase-transition", "--n", "5,25", "--alpha", "3", "--M", "6", "--h", "0.02", "--seed", "5"],
     ["phase_transition.csv"]),
    (["kacrice-variance", "--r", "2,4"], ["kacrice_variance.csv"]),
    (["singular-pairs", "--r", "2,3", "--eps", "0.3"], ["singular_pairs.csv"]),
    (["nodal-length", "--r", "3", "--h", "0.02", "--seed", "5"], ["nodal_length.csv"]),
    (["lattice-info", "--n", "5,25,65"], ["lattice_info.csv"]),
    (["coupling-bound", "--kernel-b", "berry+0.05*gauss:1:0.7", "--R", "1", "--h", "0.1", "--spectrum"],
     ["spectrum_a.csv", "spectrum_b.csv"]),
]


def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    samples = tmp_path / "samples.csv"
    samples.write_text("x\n" + "\n".join(repr(float(v)) for v in make_rng(1).standard_normal(120)) + "\n")
    runs = RERUNS + [(["clt-test", "--input", str(samples), "--eta", "0.5", "--seed", "5"], ["clt_test.csv"])]
    differing = []
    checked = 0
    for k, (argv, files) in enumerate(runs):
        for rep in ("a", "b"):
            assert main(argv + ["--out", str(tmp_path / f"{k}{rep}")]) == 0
        for f in files:
            checked += 1
            if (tmp_path / f"{k}a" / f).read_bytes() != (tmp_path / f"{k}b" / f).read_bytes():
                differing.append(f"{argv[0]}:{f}")
    ok = not differing
    report(11, ok, f"{checked} CSV outputs from {len(runs)} commands re-run with the same seed; "
                   f"byte-identical = {ok}{'' if ok else ' ' + ', '.join(differing)}", t0)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
