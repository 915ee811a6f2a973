"""Command-line front end: ``run``, ``sweep``, ``reproduce``, ``fidelity`` and ``verify``.

Exit codes: 0 success, 2 invalid input, 3 failure during computation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from . import __version__
from .experiment import (
    FIDELITY_COLUMNS,
    ExperimentSpec,
    SpecError,
    fidelity_table,
    run,
    sweep,
    write_csv,
)
from .plotting import Curve, Panel, PlotSpec, render_svg
from .presets import FIGURES, PresetOptions, reproduce
from .tfd import extrapolate_T0

log = logging.getLogger("ladder_otoc")

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE = 0, 2, 3

# CLI flag -> spec field
_OVERRIDES = {
    "n": "n",
    "lam": "lambda",
    "beta": "beta_override",
    "J": "J",
    "W": "W",
    "V": "V",
    "kind": "kind",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "trajectories": "trajectories",
    "shots": "shots",
    "readout_x": "readout_x",
    "seed": "seed",
    "t_stop": "t_stop",
    "t_step": "t_step",
}


class InputError(ValueError):
    pass


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InputError(f"config {path} is not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InputError(f"config {path} must be a key-value mapping")
    return data


def _parse_set(items: Sequence[str]) -> dict[str, Any]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    data = load_config(args.config)
    data.update(_parse_set(args.set or []))
    for attr, key in _OVERRIDES.items():
        val = getattr(args, attr, None)
        if val is not None:
            data[key] = val
    return ExperimentSpec.from_mapping(data)


def _formats(fmt: str) -> tuple[bool, bool]:
    return fmt in ("csv", "both"), fmt in ("svg", "both")


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    log.info("wrote %s", path)


def _write_panel(out: Path, panel: Panel, fmt: str) -> None:
    csv, svg = _formats(fmt)
    if csv:
        _write(out, f"{panel.name}.csv", write_csv(panel.rows, panel.columns))
    if svg and panel.plot is not None:
        _write(out, f"{panel.name}.svg", render_svg(panel))


def _otoc_plotspec(title: str, group: str | None = None) -> PlotSpec:
    return PlotSpec(
        "t",
        (Curve("O_g_norm", "O_g normalized", ":"), Curve("O_th_norm", "O_th normalized", "--"),
         Curve("O_corr", "O_corr", "-", band="sigma_corr")),
        title, "Jt", "OTOC", group,
    )


def cmd_run(args: argparse.Namespace) -> int:
    spec = spec_from_args(args)
    record = run(spec, workers=args.parallel)
    out = Path(args.out)
    csv, svg = _formats(args.format)
    if csv:
        _write(out, "run.csv", record.csv())
    if svg:
        _write(out, "run.svg", render_svg(Panel("run", record.columns, record.rows, _otoc_plotspec(f"W = {spec.W}, V = {spec.V}"))))
    _write(out, "run.json", json.dumps(record.metadata(), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _values(text: str) -> list[Any]:
    return [yaml.safe_load(v) for v in text.split(",") if v.strip()]


def cmd_sweep(args: argparse.Namespace) -> int:
    spec = spec_from_args(args)
    rows, columns = sweep(spec, args.axis, _values(args.values), args.parallel)
    out = Path(args.out)
    csv, svg = _formats(args.format)
    if csv:
        _write(out, "sweep.csv", write_csv(rows, columns))
    if svg:
        good = [r for r in rows if not r["error"]]
        _write(out, "sweep.svg", render_svg(Panel("sweep", columns, good, _otoc_plotspec(f"sweep over {args.axis}", "value"))))
    failed = sorted({r["value"] for r in rows if r["error"]})
    for v in failed:
        log.warning("sweep value %s failed", v)
    return EXIT_OK


def cmd_fidelity(args: argparse.Namespace) -> int:
    ns = [int(v) for v in _values(args.n_values)]
    lambdas = [float(v) for v in _values(args.lambdas)]
    if any(n < 2 for n in ns) or any(not (lam > 0 and math.isfinite(lam)) for lam in lambdas):
        raise InputError("fidelity needs n >= 2 and finite lambda > 0")
    rows = fidelity_table(ns, lambdas, parallel=args.parallel)
    out = Path(args.out)
    _write(out, "fidelity.csv", write_csv(rows, FIDELITY_COLUMNS))
    if len(set(ns)) >= 3:
        ext = []
        for lam in lambdas:
            pts = [(int(r["n"]), r["T0"]) for r in rows if r["lambda"] == lam and not r["error"]]
            if len({n for n, _ in pts}) >= 3:
                e = extrapolate_T0(pts)
                ext.append({"lambda": lam, "slope": e.slope, "intercept": e.intercept, "T0_inf": e.T0_infinity})
        _write(out, "extrapolation.csv", write_csv(ext, ("lambda", "slope", "intercept", "T0_inf")))
    if _formats(args.format)[1]:
        panel = Panel("fidelity", FIDELITY_COLUMNS, rows, PlotSpec("lambda", (Curve("F", "F"),), "Maximal fidelity", "lambda", "F", "n", True, True))
        _write(out, "fidelity.svg", render_svg(panel))
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    opt = PresetOptions(quick=args.quick, seed=args.seed or 0, parallel=args.parallel)
    out = Path(args.out) / args.figure
    for panel in reproduce(args.figure, opt):
        _write_panel(out, panel, args.format)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    from .checks import run_checks

    results = run_checks()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_COMPUTE


def _spec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file of flat ExperimentSpec keys")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any spec key")
    p.add_argument("--n", type=int)
    p.add_argument("--lambda", dest="lam", help="rung coupling, a number or 'inf'")
    p.add_argument("--beta", type=float, help="override the fidelity-optimal beta")
    p.add_argument("--J", type=float)
    p.add_argument("--W")
    p.add_argument("--V")
    p.add_argument("--kind")
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--readout-x", dest="readout_x", type=float)
    p.add_argument("--t-stop", dest="t_stop", type=float)
    p.add_argument("--t-step", dest="t_step", type=float)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--format", choices=("csv", "svg", "both"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ladder-otoc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one experiment")
    _spec_flags(p)
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="fan one spec field over several values")
    _spec_flags(p)
    _common(p)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="figure presets")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--quick", action="store_true", help="small sizes for smoke runs")
    _common(p)
    p.set_defaults(func=cmd_reproduce, format="both")

    p = sub.add_parser("fidelity", help="beta_0, T_0, F and gap over n and lambda")
    p.add_argument("--n-values", default="4,6,8")
    p.add_argument("--lambdas", default="0.5,1,2,4,8")
    _common(p)
    p.set_defaults(func=cmd_fidelity)

    p = sub.add_parser("verify", help="fast invariant checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SpecError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
