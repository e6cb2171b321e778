"""Monte Carlo nodal-length experiments with reproducible seeds and CSV/JSON output."""

from __future__ import annotations

import csv
import json
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy

from ..errors import ConfigError, DomainError, NodalWavesError
from ..fields import Grid, arithmetic_waves, berry_waves, replicate_seed
from ..kacrice import asymptotic_variance, variance_disk
from ..lattice import SpectralMeasure, kol_distance, lattice_points, mu_hat4, w1_distance
from ..nodal import Disk, Torus, default_spacing, nodal_length, nodal_length_streamed
from ..fields import SampledField
from .config import ExperimentConfig, to_dict
from .stats import clt_test, standardize

SQRT8 = 2.0 * np.sqrt(2.0)


def fmt(v) -> str:
    """Shortest round-trip representation, so CSV bytes depend only on the values."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return path


def manifest(extra: dict) -> dict:
    from .. import __version__
    return {"package_version": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()} | extra


def write_manifest(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=fmt) + "\n")
    return path


def reference_mean(cfg: ExperimentConfig) -> float:
    """Area times the length intensity sqrt(lambda) / (2 sqrt 2) of the sampled field."""
    spec = cfg.field
    if spec.kind == "berry":
        lam = 1.0
    else:
        from ..fields import ARITHMETIC_COORDS
        lam = spec.n * ARITHMETIC_COORDS[spec.coords](spec.n) ** 2
    area = np.pi * cfg.r ** 2 if cfg.domain == "disk" else cfg.period ** 2
    return float(area * np.sqrt(lam) / SQRT8)


@dataclass
class ExperimentResult:
    lengths: np.ndarray
    seeds: list[int]
    mean: float
    variance: float
    standardized: np.ndarray
    ks_stat: float | None
    p_value: float | None
    reference: dict
    config_hash: str
    wall_time: float
    config: ExperimentConfig
    extras: dict = field(default_factory=dict)

    @property
    def mean_ratio(self) -> float:
        return self.mean / self.reference["mean"]

    def summary_row(self) -> dict:
        d = {"M": len(self.lengths), "mean": self.mean, "variance": self.variance,
             "mean_reference": self.reference["mean"], "mean_ratio": self.mean_ratio,
             "ks_stat": self.ks_stat, "p_value": self.p_value}
        if "variance" in self.reference:
            d["variance_reference"] = self.reference["variance"]
            d["variance_ratio"] = self.variance / self.reference["variance"]
        return d

    def write(self, out: str | Path) -> dict[str, Path]:
        out = Path(out)
        rep = write_csv(out / "replicates.csv", ["replicate", "seed", "length", "standardized"],
                        ((i, s, L, z) for i, (s, L, z) in enumerate(zip(self.seeds, self.lengths, self.standardized))))
        summ = self.summary_row()
        sp = write_csv(out / "summary.csv", list(summ), [list(summ.values())])
        man = write_manifest(out / "manifest.json", manifest({
            "config": to_dict(self.config), "config_hash": self.config_hash,
            "seeds": self.seeds, "wall_time": self.wall_time, "reference": self.reference}))
        return {"replicates": rep, "summary": sp, "manifest": man}


def _replicate_length(cfg: ExperimentConfig, seed: int) -> float:
    spec = cfg.field
    h = cfg.spacing
    if spec.kind == "berry":
        waves = berry_waves(spec.J, seed, spec.scale)
    elif spec.kind == "arithmetic":
        waves = arithmetic_waves(spec.n, seed, spec.coords, spec.scale)
    else:
        raise ConfigError("Monte Carlo experiments support berry and arithmetic fields")
    if cfg.domain == "disk":
        return nodal_length_streamed(waves, Grid.for_disk(cfg.r, h), Disk(cfg.r)).length
    n = int(round(cfg.period / h))
    grid = Grid.torus(cfg.period, n)
    sf = SampledField(grid, waves.evaluate(grid.x, grid.y), seed, spec, None, waves)
    return nodal_length(sf, Torus()).length


def _run_one(cfg: ExperimentConfig, i: int, seed: int) -> float:
    try:
        return _replicate_length(cfg, seed)
    except NodalWavesError as exc:
        raise type(exc)(f"replicate {i} (seed {seed}) failed: {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"replicate {i} (seed {seed}) failed: {exc}") from exc


def mc_nodal_experiment(cfg: ExperimentConfig, with_kacrice: bool | None = None) -> ExperimentResult:
    """M independent nodal-length replicates with split seeds and summary statistics."""
    t0 = time.perf_counter()
    seeds = [replicate_seed(cfg.seed, i) for i in range(cfg.M)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            lengths = list(ex.map(lambda a: _run_one(cfg, *a), enumerate(seeds)))
    else:
        lengths = [_run_one(cfg, i, s) for i, s in enumerate(seeds)]
    L = np.asarray(lengths, dtype=float)
    z = standardize(L)
    ks = p = None
    if L.size >= 50:
        rep = clt_test(z)
        ks, p = rep.ks_stat, rep.p_value
    ref = {"mean": reference_mean(cfg)}
    if cfg.domain == "disk" and cfg.field.kind in ("berry", "arithmetic"):
        ref["variance"] = asymptotic_variance(cfg.r) if cfg.r > 1 else float("nan")
        if with_kacrice if with_kacrice is not None else cfg.kind == "variance":
            ref["kacrice_variance"] = variance_disk(cfg.r)
    return ExperimentResult(L, seeds, float(L.mean()), float(L.var(ddof=1)), z, ks, p, ref,
                            cfg.hash(), time.perf_counter() - t0, cfg)


# ---------------------------------------------------------------------------
# Phase transition on shrinking balls

@dataclass(frozen=True)
class PhaseRow:
    n: int
    N_n: int
    alpha: float
    mean: float
    variance: float
    variance_ratio: float
    kacrice_ratio: float
    kol: float
    w1: float
    eta: float
    out_of_regime: bool


PHASE_COLUMNS = list(PhaseRow.__dataclass_fields__)


def phase_transition_experiment(n_list: Sequence[int], alpha_rule: float | Callable[[int], float], M: int,
                                seed: int = 0, h: float | None = None, min_points: int = 8,
                                kol_max: float = 0.1, threads: int = 1) -> list[PhaseRow]:
    """Nodal-length statistics of the rescaled arithmetic wave on B_alpha for each n.

    Rows with fewer than ``min_points`` lattice points or Kol(mu_n) above
    ``kol_max`` are flagged out of regime; they are still computed.
    """
    from .config import arithmetic_config
    rule = alpha_rule if callable(alpha_rule) else (lambda n, a=float(alpha_rule): a)
    rows = []
    for k, n in enumerate(n_list):
        lat = lattice_points(int(n))
        if lat.cardinality == 0:
            raise DomainError(f"n={n} is not a sum of two squares")
        alpha = float(rule(int(n)))
        if alpha < 2:
            raise ConfigError(f"alpha={alpha} must be at least 2")
        cfg = arithmetic_config(int(n), M, domain="disk", coords="rescaled", r=alpha,
                                seed=replicate_seed(seed, 10_000 + k), h=h or default_spacing(alpha),
                                threads=threads)
        res = mc_nodal_experiment(cfg, with_kacrice=False)
        m = SpectralMeasure.from_lattice(lat)
        kol = kol_distance(m)
        rows.append(PhaseRow(int(n), lat.cardinality, alpha, res.mean, res.variance,
                             res.variance / asymptotic_variance(alpha),
                             res.variance / variance_disk(alpha), kol, w1_distance(m), abs(mu_hat4(m)),
                             bool(lat.cardinality < min_points or kol > kol_max)))
    return rows
