"""Independent brute-force reference implementations used by the tests."""

from math import isqrt, pi


def brute_points(n):
    m = isqrt(n)
    return [(a, b) for a in range(-m, m + 1) for b in range(-m, m + 1) if a * a + b * b == n]


def brute_mu4(n, pts):
    """Re((a + ib)^4) / n^2 averaged: exact integer arithmetic."""
    return sum(a ** 4 - 6 * a * a * b * b + b ** 4 for a, b in pts) / (n * n * len(pts))


def _angles(pts):
    import math
    return sorted(math.atan2(b, a) % (2 * pi) for a, b in pts)


def brute_kol(pts):
    """sup |F - t/2pi| over right values and left limits at every atom, plus t = 0."""
    th = _angles(pts)
    N = len(th)
    best = 0.0
    for t in th:
        right = sum(1 for s in th if s <= t) / N
        left = sum(1 for s in th if s < t) / N
        best = max(best, abs(right - t / (2 * pi)), abs(left - t / (2 * pi)))
    return best


def brute_w1(pts):
    """Piecewise integral of |c - s| in s = t / 2pi via the antiderivative sign(s - c)(s - c)^2 / 2."""
    th = _angles(pts)
    N = len(th)
    knots = [0.0] + [t / (2 * pi) for t in th] + [1.0]
    F = lambda s, c: (1 if s >= c else -1) * (s - c) ** 2 / 2
    total = 0.0
    for k in range(len(knots) - 1):
        a, b = knots[k], knots[k + 1]
        if b <= a:
            continue
        c = sum(1 for t in th if t / (2 * pi) <= a) / N
        total += F(b, c) - F(a, c)
    return 2 * pi * total
