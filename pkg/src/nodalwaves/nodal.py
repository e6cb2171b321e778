"""Nodal-set extraction by marching squares and length measurement on disks or the torus."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError, DomainError
from .fields import FieldSpec, Grid, PlaneWaveSum, SampledField, strip_iter


@dataclass(frozen=True)
class Disk:
    r: float
    center: tuple[float, float] = (0.0, 0.0)

    def describe(self) -> dict:
        return {"type": "disk", "r": self.r, "center": list(self.center)}


@dataclass(frozen=True)
class Torus:
    def describe(self) -> dict:
        return {"type": "torus"}


@dataclass(frozen=True)
class NodalResult:
    length: float
    segment_count: int
    h: float
    domain: Disk | Torus
    perturbed: bool = False


def default_spacing(r: float) -> float:
    """r / 1000 clipped to [0.005, 0.02]."""
    return float(np.clip(r / 1000.0, 0.005, 0.02))


def _perturb_zeros(v: np.ndarray) -> tuple[np.ndarray, bool]:
    zero = v == 0.0
    if not zero.any():
        return v, False
    sd = float(np.std(v)) or 1.0
    v = v.copy()
    v[zero] = 1e-12 * sd
    return v, True


def cell_segments(values: np.ndarray, x0: float, y0: float, h: float, periodic: bool = False,
                  center_value: Callable[[np.ndarray], np.ndarray] | None = None):
    """Marching-squares segments of the zero level set.

    Returns ``(p, q, perturbed)`` with segment endpoint arrays of shape (m, 2).
    Saddle cells are split according to the sign of ``center_value`` at the
    cell centre (bilinear average when not supplied).
    """
    v, perturbed = _perturb_zeros(np.asarray(values, dtype=float))
    if periodic:
        v = np.pad(v, ((0, 1), (0, 1)), mode="wrap")
    s = (v > 0).view(np.uint8)
    code = s[:-1, :-1] + 2 * s[1:, :-1] + 4 * s[1:, 1:] + 8 * s[:-1, 1:]
    ii, jj = np.nonzero((code != 0) & (code != 15))
    code = code[ii, jj]
    v00, v10, v11, v01 = v[ii, jj], v[ii + 1, jj], v[ii + 1, jj + 1], v[ii, jj + 1]
    xi = x0 + h * ii
    yj = y0 + h * jj
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = np.stack([
            np.column_stack([xi + h * v00 / (v00 - v10), yj]),          # bottom: 00-10
            np.column_stack([xi + h, yj + h * v10 / (v10 - v11)]),      # right: 10-11
            np.column_stack([xi + h * v01 / (v01 - v11), yj + h]),      # top: 01-11
            np.column_stack([xi, yj + h * v00 / (v00 - v01)]),          # left: 00-01
        ], axis=1)
    b0, b1, b2, b3 = code & 1, (code >> 1) & 1, (code >> 2) & 1, (code >> 3) & 1
    cross = np.column_stack([b0 != b1, b1 != b2, b2 != b3, b3 != b0])
    saddle = (code == 5) | (code == 10)

    ns = ~saddle
    rows, cols = np.nonzero(cross[ns])
    cols = cols.reshape(-1, 2)
    sub = pts[ns]
    r = np.arange(len(sub))
    p_list = [sub[r, cols[:, 0]]]
    q_list = [sub[r, cols[:, 1]]]

    if saddle.any():
        sp = pts[saddle]
        cx = xi[saddle] + h / 2
        cy = yj[saddle] + h / 2
        if center_value is None:
            vc = 0.25 * (v00[saddle] + v10[saddle] + v11[saddle] + v01[saddle])
        else:
            vc = center_value(np.column_stack([cx, cy]))
        c00 = b0[saddle].astype(bool)
        same00 = (vc > 0) == c00
        # centre joins 00 and 11: corners 10 and 01 are cut off
        p_list += [sp[:, 0], np.where(same00[:, None], sp[:, 3], sp[:, 1])]
        q_list += [np.where(same00[:, None], sp[:, 1], sp[:, 3]), np.where(same00[:, None], sp[:, 2], sp[:, 2])]
    p = np.concatenate(p_list)
    q = np.concatenate(q_list)
    # canonical endpoint order keeps lengths identical under f -> -f
    swap = (q[:, 0] < p[:, 0]) | ((q[:, 0] == p[:, 0]) & (q[:, 1] < p[:, 1]))
    p2 = np.where(swap[:, None], q, p)
    q2 = np.where(swap[:, None], p, q)
    return p2, q2, perturbed


def clipped_lengths(p: np.ndarray, q: np.ndarray, disk: Disk) -> np.ndarray:
    """Length of each segment pq inside the closed disk (exact line-circle intersection)."""
    c = np.asarray(disk.center, dtype=float)
    d = q - p
    f = p - c
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", f, d)
    cc = np.einsum("ij,ij->i", f, f) - disk.r ** 2
    disc = b * b - 4 * a * cc
    out = np.zeros(len(p))
    ok = (disc > 0) & (a > 0)
    sq = np.sqrt(disc[ok])
    lo = (-b[ok] - sq) / (2 * a[ok])
    hi = (-b[ok] + sq) / (2 * a[ok])
    frac = np.clip(np.minimum(hi, 1.0) - np.maximum(lo, 0.0), 0.0, None)
    out[ok] = frac * np.sqrt(a[ok])
    return out


def _center_sampler(sf: SampledField):
    if sf.waves is None:
        return None
    return lambda pts: sf.waves.at_points(pts)


def _check_disk(grid: Grid, disk: Disk):
    if not grid.contains_disk(disk.r, disk.center):
        raise DomainError(f"disk of radius {disk.r} exceeds the grid footprint")


def nodal_segments(field: SampledField, domain: Disk | Torus):
    """All segments (clipped lengths attached) for plotting or inspection."""
    g = field.grid
    if isinstance(domain, Torus):
        if not field.periodic:
            raise DomainError("torus domain requires a periodic grid")
        p, q, pert = cell_segments(field.values, g.origin[0], g.origin[1], g.h, True, _center_sampler(field))
        lengths = np.hypot(*(q - p).T)
    else:
        _check_disk(g, domain)
        p, q, pert = cell_segments(field.values, g.origin[0], g.origin[1], g.h, False, _center_sampler(field))
        lengths = clipped_lengths(p, q, domain)
    return p, q, lengths, pert


def nodal_length(field: SampledField, domain: Disk | Torus, h: float | None = None) -> NodalResult:
    """H^1 measure of the zero set inside ``domain`` by marching squares."""
    if h is not None and not np.isclose(h, field.grid.h, rtol=1e-12, atol=0.0):
        raise ConfigError(f"h={h} differs from the field grid spacing {field.grid.h}")
    _, _, lengths, pert = nodal_segments(field, domain)
    keep = lengths > 0
    return NodalResult(float(np.sum(lengths[keep])), int(keep.sum()), field.grid.h, domain, pert)


def nodal_length_streamed(waves: PlaneWaveSum, grid: Grid, disk: Disk, rows: int = 256) -> NodalResult:
    """Disk nodal length evaluating the field strip by strip (bounded memory)."""
    _check_disk(grid, disk)
    total = 0.0
    count = 0
    pert = False
    center = lambda pts: waves.at_points(pts)
    y0 = grid.origin[1]
    for start, strip in strip_iter(waves, grid, rows):
        x0 = grid.origin[0] + start * grid.h
        p, q, pt = cell_segments(strip, x0, y0, grid.h, False, center)
        ell = clipped_lengths(p, q, disk)
        total += float(np.sum(ell))
        count += int(np.count_nonzero(ell > 0))
        pert |= pt
    return NodalResult(total, count, grid.h, disk, pert)


def field_from_function(f: Callable[[np.ndarray, np.ndarray], np.ndarray], grid: Grid) -> SampledField:
    """Wrap a deterministic function as a SampledField (tests and demos)."""
    X, Y = np.meshgrid(grid.x, grid.y, indexing="ij")
    return SampledField(grid, np.asarray(f(X, Y), dtype=float), 0, FieldSpec("custom", kernel=f))


@dataclass(frozen=True)
class RefineReport:
    results: list[NodalResult]
    differences: list[float]
    ratios: list[float]
    extrapolated: float


def refine_check(field: SampledField | Callable, domain: Disk | Torus, h_sequence: Iterable[float],
                 order: float = 2.0) -> RefineReport:
    """Nodal lengths on successively finer grids with a Richardson estimate.

    ``field`` is either a sampled trigonometric field (re-evaluated at each h)
    or a plain function f(X, Y).
    """
    hs = [float(h) for h in h_sequence]
    if len(hs) < 2 or any(b >= a for a, b in zip(hs, hs[1:])):
        raise ConfigError("h_sequence must be strictly decreasing with at least two entries")
    results = []
    for h in hs:
        if isinstance(domain, Torus):
            if not isinstance(field, SampledField) or field.grid.period is None:
                raise ConfigError("torus refinement needs a periodic sampled field")
            n = int(round(field.grid.period / h))
            grid = Grid.torus(field.grid.period, n)
        else:
            grid = Grid.for_disk(domain.r, h, domain.center)
        if isinstance(field, SampledField):
            if field.waves is None:
                raise ConfigError("refinement needs a field with an analytic representation")
            sf = SampledField(grid, field.waves.evaluate(grid.x, grid.y), field.seed, field.spec, None, field.waves)
        else:
            sf = field_from_function(field, grid)
        results.append(nodal_length(sf, domain))
    L = [r.length for r in results]
    diffs = [b - a for a, b in zip(L, L[1:])]
    ratios = [abs(a / b) if b != 0 else float("inf") for a, b in zip(diffs, diffs[1:])]
    q = hs[-2] / hs[-1]
    extrap = L[-1] + (L[-1] - L[-2]) / (q ** order - 1.0)
    return RefineReport(results, diffs, ratios, extrap)


def save_segments(p: np.ndarray, q: np.ndarray, path: str | Path) -> Path:
    path = Path(path)
    np.savetxt(path, np.hstack([p, q]), delimiter=",", header="x1,y1,x2,y2", comments="", fmt="%.12g")
    return path
