"""Experiment configuration and key-value config files."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..fields import ARITHMETIC_COORDS, FieldSpec, auto_directions
from ..nodal import default_spacing

KINDS = ("mean", "variance", "clt", "phase_transition", "coupling_discrepancy")
TORUS_PERIOD = {"standard": lambda n: 2 * np.pi, "unit": lambda n: 1.0,
                "rescaled": lambda n: 2 * np.pi * np.sqrt(n)}


@dataclass(frozen=True)
class ExperimentConfig:
    field: FieldSpec
    domain: str = "disk"
    r: float | None = None
    M: int = 100
    h: float | None = None
    seed: int = 0
    out: str | None = None
    kind: str = "mean"
    threads: int = 1
    bands: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if int(self.M) != self.M or self.M < 2:
            raise ConfigError("replicate count M must be an integer >= 2")
        if self.h is not None and not self.h > 0:
            raise ConfigError("h must be positive")
        if self.domain == "disk":
            if self.r is None or not self.r >= 1:
                raise ConfigError("disk experiments need r >= 1")
        elif self.domain == "torus":
            if self.field.kind != "arithmetic":
                raise ConfigError("torus experiments need an arithmetic field")
        else:
            raise ConfigError(f"unknown domain {self.domain!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @property
    def spacing(self) -> float:
        if self.h is not None:
            return float(self.h)
        if self.domain == "disk":
            return default_spacing(self.r)
        return self.period / 1024

    @property
    def period(self) -> float:
        return TORUS_PERIOD[self.field.coords](self.field.n)

    def describe(self) -> dict:
        d = {"field": self.field.describe(), "domain": self.domain, "r": self.r, "M": self.M,
             "h": self.spacing, "seed": self.seed, "kind": self.kind, "bands": self.bands}
        return d

    def hash(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def berry_config(r: float, M: int, seed: int = 0, h: float | None = None, J: int | None = None,
                 kind: str = "mean", **kw) -> ExperimentConfig:
    """Berry disk experiment; J defaults to the smallest certified direction count for B_r."""
    J = J or auto_directions(2 * r)
    return ExperimentConfig(FieldSpec("berry", J=J), "disk", r, M, h, seed, kind=kind, **kw)


def arithmetic_config(n: int, M: int, domain: str = "torus", coords: str = "standard", r: float | None = None,
                      seed: int = 0, h: float | None = None, kind: str = "mean", **kw) -> ExperimentConfig:
    if coords not in ARITHMETIC_COORDS:
        raise ConfigError(f"coords must be one of {sorted(ARITHMETIC_COORDS)}")
    return ExperimentConfig(FieldSpec("arithmetic", n=n, coords=coords), domain, r, M, h, seed, kind=kind, **kw)


def read_config_file(path: str | Path) -> dict[str, str]:
    """Flat key-value pairs; an optional section header is ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text()
    if not text.lstrip().startswith("["):
        text = "[config]\n" + text
    cp = configparser.ConfigParser()
    cp.optionxform = str                      # keys such as M and N are case sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    out: dict[str, str] = {}
    for sec in cp.sections():
        out.update({k.replace("-", "_"): v for k, v in cp[sec].items()})
    return out


def to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["field"] = cfg.field.describe()
    return d
