"""Command-line interface: ``nodalwaves <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical-regime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DomainError, RegimeError
from ..fields import (Grid, auto_directions, arithmetic_waves, berry_waves, save_field, SampledField,
                      FieldSpec)
from ..kernels import BerryKernel, GaussianKernel, StationaryKernel
from ..lattice import arithmetic_kernel, lattice_summary
from ..nodal import Disk, Torus, default_spacing, nodal_length
from .config import TORUS_PERIOD, arithmetic_config, berry_config, read_config_file
from .experiments import (PHASE_COLUMNS, fmt, manifest, mc_nodal_experiment, phase_transition_experiment,
                          write_csv, write_manifest)
from .stats import clt_test, nclt_compare

EXIT_CONFIG = 2
EXIT_REGIME = 3


def _floats(s: str) -> list[float]:
    return [float(v) for v in str(s).replace(",", " ").split()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in str(s).replace(",", " ").split()]


def parse_kernel(spec: str) -> StationaryKernel:
    """Kernel expression: terms joined by '+', each '[c*]name[:args]'.

    Names: ``berry``, ``arithmetic:n``, ``gauss[:amplitude[:length]]``.
    Example: ``berry+0.01*gauss:1:0.5``.
    """
    total = None
    for term in spec.replace(" ", "").split("+"):
        coef = 1.0
        if "*" in term:
            c, term = term.split("*", 1)
            coef = float(c)
        name, *args = term.split(":")
        if name == "berry":
            k = BerryKernel()
        elif name == "arithmetic":
            if len(args) != 1:
                raise ConfigError("arithmetic kernel needs n, e.g. arithmetic:25")
            k = arithmetic_kernel(int(args[0]))
        elif name in ("gauss", "gaussian"):
            k = GaussianKernel(*(float(a) for a in args))
        else:
            raise ConfigError(f"unknown kernel {name!r}")
        k = k if coef == 1.0 else coef * k
        total = k if total is None else total + k
    if total is None:
        raise ConfigError("empty kernel expression")
    return total


def _out(args, name: str) -> Path:
    return Path(args.out) / name


def _print_csv(path: Path):
    sys.stdout.write(path.read_text())


def _field_waves(args, seed: int):
    if args.kind == "berry":
        J = args.J or auto_directions(2 * (args.r or 1.0))
        return berry_waves(J, seed), FieldSpec("berry", J=J)
    if args.n is None:
        raise ConfigError("arithmetic fields need --n")
    return arithmetic_waves(args.n, seed, args.coords), FieldSpec("arithmetic", n=args.n, coords=args.coords)


def _field_grid(args):
    if args.domain == "torus":
        if args.kind != "arithmetic":
            raise ConfigError("torus domain needs --kind arithmetic")
        period = TORUS_PERIOD[args.coords](args.n)
        n = int(round(period / (args.h or period / 1024)))
        return Grid.torus(period, n), Torus()
    if args.r is None:
        raise ConfigError("disk domain needs --r")
    h = args.h or default_spacing(args.r)
    return Grid.for_disk(args.r, h), Disk(args.r)


def cmd_sample_field(args) -> int:
    waves, spec = _field_waves(args, args.seed)
    grid, _ = _field_grid(args)
    sf = SampledField(grid, waves.evaluate(grid.x, grid.y), args.seed, spec, None, waves)
    path = save_field(sf, _ensure(args) / "field.csv")
    write_manifest(_out(args, "manifest.json"), manifest({"command": "sample-field", "seed": args.seed,
                                                         "header": sf.header(), "file": path.name}))
    print(path)
    return 0


def _ensure(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_nodal_length(args) -> int:
    waves, spec = _field_waves(args, args.seed)
    grid, dom = _field_grid(args)
    sf = SampledField(grid, waves.evaluate(grid.x, grid.y), args.seed, spec, None, waves)
    res = nodal_length(sf, dom)
    path = write_csv(_out(args, "nodal_length.csv"), ["seed", "length", "segments", "h", "perturbed"],
                     [[args.seed, res.length, res.segment_count, res.h, res.perturbed]])
    write_manifest(_out(args, "manifest.json"), manifest({"command": "nodal-length", "header": sf.header(),
                                                         "domain": dom.describe()}))
    _print_csv(path)
    return 0


def cmd_mc_experiment(args) -> int:
    if args.kind == "berry":
        cfg = berry_config(args.r, args.M, args.seed, args.h, args.J, kind=args.experiment, threads=args.threads)
    else:
        if args.n is None:
            raise ConfigError("arithmetic experiments need --n")
        cfg = arithmetic_config(args.n, args.M, args.domain, args.coords, args.r, args.seed, args.h,
                                kind=args.experiment, threads=args.threads)
    res = mc_nodal_experiment(cfg)
    paths = res.write(_ensure(args))
    _print_csv(paths["summary"])
    return 0


def _read_samples(path: str, column: str | None) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input {p} not found")
    lines = [ln for ln in p.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    head = lines[0].split(",")
    try:
        float(head[0])
        rows, names = lines, None
    except ValueError:
        rows, names = lines[1:], head
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"non-numeric sample in {p}: {exc}") from exc
    if names is None:
        return data[:, 0]
    col = column or ("standardized" if "standardized" in names else names[-1])
    if col not in names:
        raise ConfigError(f"column {col!r} not in {names}")
    return data[:, names.index(col)]


def cmd_clt_test(args) -> int:
    x = _read_samples(args.input, args.column)
    if args.standardize:
        from .stats import standardize
        x = standardize(x)
    rows, header = [], ["n", "ks_stat", "p_value", "verdict"]
    rep = clt_test(x, args.alpha)
    row = [rep.n, rep.ks_stat, rep.p_value, rep.verdict]
    if args.eta is not None:
        nr = nclt_compare(x, args.eta, seed=args.seed)
        header += ["eta", "nclt_ks_stat", "nclt_p_value"]
        row += [nr.eta, nr.ks_stat, nr.p_value]
    rows.append(row)
    path = write_csv(_out(args, "clt_test.csv"), header, rows)
    write_manifest(_out(args, "manifest.json"), manifest({"command": "clt-test", "input": str(args.input)}))
    _print_csv(path)
    return 0


def cmd_phase_transition(args) -> int:
    rows = phase_transition_experiment(_ints(args.n), args.alpha, args.M, args.seed, args.h,
                                       threads=args.threads)
    path = write_csv(_out(args, "phase_transition.csv"), PHASE_COLUMNS,
                     ([getattr(r, c) for c in PHASE_COLUMNS] for r in rows))
    write_manifest(_out(args, "manifest.json"), manifest({"command": "phase-transition", "seed": args.seed,
                                                         "n": _ints(args.n), "alpha": args.alpha, "M": args.M}))
    _print_csv(path)
    return 0


def cmd_kacrice_variance(args) -> int:
    from ..kacrice import asymptotic_variance, variance_disk
    rows = []
    for r in _floats(args.r):
        v = variance_disk(r)
        rows.append([r, v, v / asymptotic_variance(r) if r > 1 else float("nan")])
    path = write_csv(_out(args, "kacrice_variance.csv"), ["r", "variance", "ratio_to_asymptotic"], rows)
    write_manifest(_out(args, "manifest.json"), manifest({"command": "kacrice-variance", "r": _floats(args.r)}))
    _print_csv(path)
    return 0


def cmd_singular_pairs(args) -> int:
    from ..kacrice import singular_pairs
    rows = []
    for r in _floats(args.r):
        s = singular_pairs(r, args.N, args.eps)
        rows.append([s.r, s.N, s.eps, s.count, s.count_ratio, s.l6_integral, s.l6_ratio])
    path = write_csv(_out(args, "singular_pairs.csv"),
                     ["r", "N", "eps", "count", "count_ratio", "l6_integral", "l6_ratio"], rows)
    write_manifest(_out(args, "manifest.json"), manifest({"command": "singular-pairs", "N": args.N,
                                                         "eps": args.eps}))
    _print_csv(path)
    return 0


def cmd_coupling_bound(args) -> int:
    from ..coupling import build_operator, coupling_from_operators, save_spectrum
    K, C = parse_kernel(args.kernel_a), parse_kernel(args.kernel_b)
    opK, opC = build_operator(K, args.M, args.R, args.h), build_operator(C, args.M, args.R, args.h)
    res = coupling_from_operators(opK, opC)
    out = _ensure(args)
    data = {"kernel_a": args.kernel_a, "kernel_b": args.kernel_b} | res.as_dict()
    (out / "coupling_bound.json").write_text(json.dumps(data, indent=2, sort_keys=True, default=fmt) + "\n")
    if args.spectrum:
        save_spectrum(opK, out / "spectrum_a.csv")
        save_spectrum(opC, out / "spectrum_b.csv")
    print(json.dumps(data, indent=2, sort_keys=True, default=fmt))
    return 0


def cmd_lattice_info(args) -> int:
    out = _ensure(args)
    summaries = [lattice_summary(n) for n in _ints(args.n)]
    (out / "lattice_info.json").write_text(json.dumps(summaries, indent=2) + "\n")
    path = write_csv(out / "lattice_info.csv", ["n", "N_n", "mu_hat4", "kol", "w1"],
                     ([s["n"], s["N_n"], s["mu_hat4"], s["kol"], s["w1"]] for s in summaries))
    _print_csv(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nodalwaves", description="Nodal lengths of Gaussian random waves")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", type=str, default=None)
    common.add_argument("--out", type=str, default="results")
    common.add_argument("--threads", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)

    def field_args(sp):
        sp.add_argument("--kind", choices=["berry", "arithmetic"], default="berry")
        sp.add_argument("--J", type=int, default=None)
        sp.add_argument("--n", type=int, default=None)
        sp.add_argument("--coords", choices=["rescaled", "unit", "standard"], default="standard")
        sp.add_argument("--domain", choices=["disk", "torus"], default="disk")
        sp.add_argument("--r", type=float, default=None)
        sp.add_argument("--h", type=float, default=None)

    sp = sub.add_parser("sample-field", parents=[common])
    field_args(sp)
    sp.set_defaults(func=cmd_sample_field)
    sp = sub.add_parser("nodal-length", parents=[common])
    field_args(sp)
    sp.set_defaults(func=cmd_nodal_length)
    sp = sub.add_parser("mc-experiment", parents=[common])
    field_args(sp)
    sp.add_argument("--M", type=int, default=100)
    sp.add_argument("--experiment", choices=["mean", "variance", "clt"], default="mean")
    sp.set_defaults(func=cmd_mc_experiment)
    sp = sub.add_parser("clt-test", parents=[common])
    sp.add_argument("--input", required=True)
    sp.add_argument("--column", default=None)
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.add_argument("--eta", type=float, default=None)
    sp.set_defaults(func=cmd_clt_test)
    sp = sub.add_parser("phase-transition", parents=[common])
    sp.add_argument("--n", required=True, help="comma-separated list")
    sp.add_argument("--alpha", type=float, default=8.0)
    sp.add_argument("--M", type=int, default=100)
    sp.add_argument("--h", type=float, default=None)
    sp.set_defaults(func=cmd_phase_transition)
    sp = sub.add_parser("kacrice-variance", parents=[common])
    sp.add_argument("--r", required=True, help="comma-separated radii")
    sp.set_defaults(func=cmd_kacrice_variance)
    sp = sub.add_parser("singular-pairs", parents=[common])
    sp.add_argument("--r", required=True)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.set_defaults(func=cmd_singular_pairs)
    sp = sub.add_parser("coupling-bound", parents=[common])
    sp.add_argument("--kernel-a", default="berry")
    sp.add_argument("--kernel-b", required=True)
    sp.add_argument("--M", type=int, default=0)
    sp.add_argument("--R", type=float, default=2.0)
    sp.add_argument("--h", type=float, default=None)
    sp.add_argument("--spectrum", action="store_true")
    sp.set_defaults(func=cmd_coupling_bound)
    sp = sub.add_parser("lattice-info", parents=[common])
    sp.add_argument("--n", required=True)
    sp.set_defaults(func=cmd_lattice_info)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Config-file values act as defaults; explicit flags win."""
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    values = read_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "func", "help"):
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        act = known[key]
        if act.type is not None:
            try:
                defaults[key] = act.type(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        elif isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.strip().lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = raw
        if act.choices is not None and defaults[key] not in act.choices:
            raise ConfigError(f"{key} must be one of {list(act.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"numerical regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME


if __name__ == "__main__":
    sys.exit(main())
