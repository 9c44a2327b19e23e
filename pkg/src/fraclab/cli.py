"""Command-line front end: ``fraclab constants|operator|experiment|verify``.

Exit codes: 0 on success, 1 when a check fails, 2 on a usage or config error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__

FAMILY_CHOICES = ("dyadic", "thirds", "all-intervals")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def _family(name: str) -> str:
    return "all" if name == "all-intervals" else name


def parse_weight(text: str):
    """``power:a=<float>`` or ``file:<path>``; returns a Weight."""
    from .grid import read_grid_function
    from .weights import Weight

    kind, _, rest = text.partition(":")
    if kind == "power":
        key, _, val = rest.partition("=")
        if key != "a":
            raise UsageError(f"bad weight spec: {text!r}")
        try:
            return Weight.power(float(val))
        except ValueError:
            raise UsageError(f"bad weight spec: {text!r}") from None
    if kind == "file":
        if not rest:
            raise UsageError(f"bad weight spec: {text!r}")
        return Weight.sampled(read_grid_function(rest))
    raise UsageError(f"bad weight spec: {text!r}")


def parse_radial(text: str) -> tuple[float, float, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--radial expects rmin,rmax,shells")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError("--radial expects rmin,rmax,shells") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="dimension (1 or 2)")
    p.add_argument("--p", type=exponent, default=None)
    p.add_argument("--q", type=exponent, default=None, help="derived from --alpha when omitted")
    p.add_argument("--alpha", type=exponent, default=None)
    p.add_argument("--family", choices=FAMILY_CHOICES, default=None)
    p.add_argument("--grid", type=int, default=None, metavar="N", help="cells per axis")
    p.add_argument("--extent", type=float, default=None, metavar="L", help="half width of the domain")
    p.add_argument("--radial", default=None, metavar="RMIN,RMAX,SHELLS")
    p.add_argument("--config", default=None, metavar="PATH")
    p.add_argument("--out", default=None, metavar="PATH")
    p.add_argument("--threads", type=int, default=1, metavar="K")
    p.add_argument("--seed", type=int, default=0, metavar="S")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fraclab", description="Weighted fractional operator laboratory.")
    parser.add_argument("--version", action="version", version=f"fraclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", help="weight constants of one weight")
    _common(c)
    c.add_argument("--weight", required=True, help="power:a=<float> or file:<path>")
    c.add_argument("--constant", choices=("apq", "ap", "a1q"), default="apq")

    o = sub.add_parser("operator", help="apply an operator to a power function or a grid file")
    _common(o)
    o.add_argument(
        "--kind", "--op", dest="op", required=True,
        choices=("riesz", "maximal", "dyadic-model", "model", "centered-maximal"),
    )
    o.add_argument("--input", required=True, help="power:a=<float> (cut off at |x| < 1) or file:<path>")
    o.add_argument("--mode", default="uncentered-cube", help="maximal mode")

    e = sub.add_parser("experiment", help="run one experiment from a config or flags")
    _common(e)
    e.add_argument("--experiment", default=None)
    e.add_argument("--deltas", default=None, help="comma separated sweep")

    v = sub.add_parser("verify", help="run the identity suite or the standard sweeps")
    _common(v)
    v.add_argument("--suite", choices=("identities", "sweeps", "all"), default="identities")
    return parser


def exponent(text: str) -> float:
    """A float or a fraction such as ``4/3``."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid exponent: {text!r}") from None


def _set_threads(k: int) -> None:
    if k < 1:
        raise UsageError("--threads must be positive")
    # only effective when the numerical libraries load after this point
    for var in THREAD_VARS:
        os.environ[var] = str(k)


def _config(args, experiment: str | None = None):
    from .experiments import ExperimentConfig, GridSpec

    base: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
    if experiment is not None:
        base["experiment"] = experiment
    for key in ("n", "p", "q", "alpha"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.family is not None:
        base["family"] = _family(args.family)
    grid = dict(base.get("grid") or {})
    if args.radial:
        grid["r_min"], grid["r_max"], grid["shells"] = parse_radial(args.radial)
    if args.grid is not None:
        grid["points"] = args.grid
    if args.extent is not None:
        grid["extent"] = args.extent
    base["grid"] = GridSpec(**grid)
    if getattr(args, "deltas", None):
        base["deltas"] = [float(d) for d in args.deltas.split(",")]
    base["seed"] = args.seed
    if args.out is not None:
        base["out"] = args.out
    if base.get("q") is None and base.get("alpha") is not None and base.get("p") is not None:
        n = base.get("n", 1)
        if base["alpha"] >= n / base["p"]:
            raise UsageError("need alpha < n/p to derive q")
    return ExperimentConfig.from_dict(base)


def _emit(payload: dict, out: str | None, csv_text: str | None = None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    if csv_text is not None:
        path.with_suffix(".csv").write_text(csv_text)


def _envelope(args, config: dict) -> dict:
    return {"version": __version__, "config": config, "seed": args.seed, "threads": args.threads}


def cmd_constants(args) -> int:
    import numpy as np

    from .experiments import ExponentTriple
    from .grid import Cube, enumerate_cubes
    from .weights import (
        ConstantReport,
        a1q_constant,
        ap_constant,
        apq_constant,
        power_a1q_analytic,
        power_apq_analytic,
        power_family,
    )

    w = parse_weight(args.weight)
    n = args.n or 1
    p = args.p if args.p is not None else 4 / 3
    family = _family(args.family or "all-intervals")
    if args.constant == "ap":
        e = ExponentTriple(n, p, p, 0.0)
    elif args.q is not None:
        e = ExponentTriple(n, p, args.q, args.alpha if args.alpha is not None else n * (1 / p - 1 / args.q))
    else:
        e = ExponentTriple.from_alpha(n, p, args.alpha if args.alpha is not None else 0.0)
    if w.is_power and family == "all":
        if args.constant == "a1q":
            val, off = power_a1q_analytic(w.exponent, e.q, n, return_offset=True)
        elif args.constant == "ap":
            val, off = power_apq_analytic(w.exponent / p, e, return_offset=True)
        else:
            val, off = power_apq_analytic(w.exponent, e, return_offset=True)
        rep = ConstantReport(float(val), Cube(tuple(np.atleast_1d(off)), 1.0), "all-intervals")
    else:
        if w.is_power:
            fam = power_family(family, n)
        else:
            grid = w.samples.grid
            if grid.dim != n:
                raise UsageError("--n does not match the weight file")
            fam = enumerate_cubes(grid, "all-intervals" if family == "all" else family)
        if args.constant == "a1q":
            rep = a1q_constant(w, e.q, fam)
        elif args.constant == "ap":
            rep = ap_constant(w, p, fam)
        else:
            rep = apq_constant(w, e, fam)
    config = {"weight": args.weight, "constant": args.constant, "family": args.family or "all-intervals", **e.to_dict()}
    _emit({**_envelope(args, config), "report": rep.to_dict()}, args.out)
    return 0


def cmd_operator(args) -> int:
    import numpy as np

    from .grid import GridFunction, build_grid, build_radial_grid, power_cell_averages, read_grid_function
    from .operators import dyadic_model_operator, fractional_maximal, riesz_potential, weighted_centered_fractional_maximal

    alpha = args.alpha if args.alpha is not None else 0.5
    kind, _, rest = args.input.partition(":")
    if kind == "file" and rest:
        f = read_grid_function(rest)
    elif kind == "power" and rest.startswith("a="):
        try:
            a = float(rest[2:])
        except ValueError:
            raise UsageError(f"bad input spec: {args.input!r}") from None
        if args.radial:
            grid = build_radial_grid(*parse_radial(args.radial), breaks=(1.0,))
        else:
            grid = build_grid(args.n or 1, args.extent or 2.0, args.grid or 256)
        f = power_cell_averages(grid, a, radius=1.0)
    else:
        raise UsageError(f"bad input spec: {args.input!r}")
    if args.op == "riesz":
        g = riesz_potential(f, alpha)
    elif args.op == "maximal":
        g = fractional_maximal(f, alpha, args.mode)
    elif args.op == "centered-maximal":
        g = weighted_centered_fractional_maximal(f, alpha, GridFunction(f.grid, np.ones(f.grid.shape)))
    else:
        g = dyadic_model_operator(f, alpha)
    config = {"kind": "dyadic-model" if args.op == "model" else args.op, "input": args.input, "alpha": alpha, "mode": args.mode}
    payload = {
        **_envelope(args, config),
        "grid": f.grid.header(),
        "values": [float(v) for v in g.values.ravel()],
        "max": float(np.max(g.values)),
    }
    _emit(payload, args.out)
    return 0


def _report_payload(args, rep) -> dict:
    return {**_envelope(args, rep.metadata.get("config", {})), "report": rep.to_dict()}


def cmd_experiment(args) -> int:
    from .experiments import run_experiment

    cfg = _config(args, args.experiment)
    rep = run_experiment(cfg)
    _emit(_report_payload(args, rep), args.out, rep.to_csv())
    print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} ({rep.runtime_s:.1f}s)", file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_verify(args) -> int:
    from .experiments import STANDARD_SWEEPS, ExperimentConfig, run_experiment

    reports = []
    if args.suite in ("identities", "all"):
        reports.append(("identities", run_experiment(_config(args, "identities"))))
    if args.suite in ("sweeps", "all"):
        for label, over in STANDARD_SWEEPS.items():
            cfg = ExperimentConfig.from_dict({**over, "seed": args.seed})
            reports.append((label, run_experiment(cfg)))
    for label, rep in reports:
        print(f"{label}: {'PASS' if rep.passed else 'FAIL'} ({rep.runtime_s:.1f}s)", file=sys.stderr)
    payload = {
        **_envelope(args, {"suite": args.suite}),
        "passed": all(r.passed for _, r in reports),
        "reports": {label: r.to_dict() for label, r in reports},
    }
    _emit(payload, args.out)
    return 0 if payload["passed"] else 1


COMMANDS = {"constants": cmd_constants, "operator": cmd_operator, "experiment": cmd_experiment, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError, TypeError, FileNotFoundError) as exc:
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
