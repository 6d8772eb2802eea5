"""``bellcv`` command line.

Exit status: 0 on success, 1 on a numerical failure (non-convergence, failed
cross-check or dataset invariant), 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from . import optimal
from .bell import FAMILIES
from .functions import AUTO, parse_function
from .optimize import optimize_angles
from .oracle import DEFAULT_POINTS
from .quadrature import CACHE, ConvergenceError
from .states import load_state, parse_state
from .sweeps import (CSV_COLUMNS, DATASETS, Config, InvariantError, SweepSpec, critical_efficiency,
                     oracle_crosscheck, resolve, result_row, run_config, serialize, sweep)

logger = logging.getLogger("bellcv")


class UsageError(Exception):
    pass


def _floats(text: str) -> float | tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(","))
    return vals[0] if len(vals) == 1 else vals


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verify", action="store_true",
                        help="grid-integrate every moment first (N <= 3 only)")
    common.add_argument("--oracle-grid", type=int, default=DEFAULT_POINTS, metavar="POINTS",
                        help="oracle grid points per axis (default %(default)s)")
    common.add_argument("--format", choices=("json", "csv", "tsv-plotdata"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    state = argparse.ArgumentParser(add_help=False)
    state.add_argument("--family", choices=FAMILIES, required=True)
    group = state.add_mutually_exclusive_group()
    group.add_argument("--state", help="ghz:N,r[,c1,c2] | cluster4 | w4 | extcluster:N | extsup:N | product:0110")
    group.add_argument("--state-file", help="JSON state document")
    state.add_argument("--eta", type=_floats, default=1.0, help="efficiency, scalar or per-mode csv")
    state.add_argument("--purity", type=float, default=1.0)
    state.add_argument("--purity-model", choices=("global", "local", "local_sqrt"), default="global")
    state.add_argument("--function", default=None, help="e.g. rational(auto), power(1/3), tanh(4,1.4), bin")
    state.add_argument("--eps-mode", choices=("formula", "self_consistent", "maximize"), default="formula")
    state.add_argument("--conj-signs", type=_ints, default=None, help="per-site +1/-1 csv")

    p = argparse.ArgumentParser(prog="bellcv", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common, state], help="evaluate one Bell observable")
    e.add_argument("--angles", default="preset", help="preset | optimize | path to a JSON angle array")
    e.add_argument("--restarts", type=int, default=0, help="extra random starts for --angles optimize")

    s = sub.add_parser("sweep", parents=[common], help="run a sweep described by a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", default=None)

    t = sub.add_parser("threshold", parents=[common, state], help="critical efficiency by bisection")
    t.add_argument("--analytic", action="store_true",
                   help="also report the closed-form even-N root for the optimal function")

    se = sub.add_parser("solve-epsilon", parents=[common], help="optimal rational parameter")
    se.add_argument("--parity", choices=("even", "odd"), default="even")
    se.add_argument("--N", type=int, default=None, help="number of sites, required for odd parity")
    se.add_argument("--eta", type=float, default=1.0)
    se.add_argument("--method", choices=("auto", "fixed", "bisect"), default="auto")

    c = sub.add_parser("crosscheck", parents=[common, state], help="compare moments with the grid oracle")
    c.add_argument("--angles", default="preset")

    r = sub.add_parser("reproduce", parents=[common], help="emit a figure dataset")
    r.add_argument("dataset", choices=sorted(DATASETS))
    r.add_argument("--out", default=None)
    return p


def _config(args) -> Config:
    if args.state_file:
        pure = load_state(args.state_file)
        text = None
    else:
        text = args.state or ""
        if not text:
            raise UsageError("--state or --state-file is required")
        pure = parse_state(text)
    function = None
    if args.function:
        function = parse_function(args.function)
    kw = dict(eta=args.eta, p=args.purity, function=function, purity_model=args.purity_model,
              eps_mode=args.eps_mode, conj_signs=args.conj_signs)
    name, _, rest = (text or "").partition(":")
    if name.lower() == "ghz" and len(rest.split(",")) == 2:
        N, r = (int(v) for v in rest.split(","))
        return Config(args.family, N, r, **kw)
    return Config(args.family, pure.mode_count, None, state=pure if text is None else text, **kw)


def _angles_arg(cfg: Config, spec: str) -> Config:
    if spec in ("preset", "optimize"):
        return cfg
    with open(spec) as fh:
        return replace(cfg, angles=np.asarray(json.load(fh), dtype=float))


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _verify(args, cfg: Config) -> dict | None:
    if not args.verify:
        return None
    report = oracle_crosscheck(cfg, args.oracle_grid)
    if not report.passed:
        raise ConvergenceError(f"oracle cross-check failed: {report.to_dict()}")
    return report.to_dict()


def cmd_eval(args) -> int:
    cfg = _angles_arg(_config(args), args.angles)
    if args.angles == "optimize":
        rho, angles, f = resolve(cfg)
        fam = cfg.family
        if fam in ("sv4", "sv8"):
            from .bell import eval_sv
            best, _ = optimize_angles(lambda r, a: eval_sv(r, f, int(fam[2:]), a), rho, angles,
                                      restarts=args.restarts)
        else:
            best, _ = optimize_angles(fam, rho, angles, f=f, conj_signs=cfg.conj_signs,
                                      restarts=args.restarts)
        cfg = replace(cfg, angles=best)
    check = _verify(args, cfg)
    res = run_config(cfg)
    row = result_row(cfg, res)
    _, angles, f = resolve(cfg)
    if args.format in ("csv", "tsv-plotdata"):
        _emit(serialize([row], CSV_COLUMNS, args.format), None)
        return 0
    doc = {**row, **res.details, "resolved_function": f.label(), "angles": np.asarray(angles).tolist()}
    if check is not None:
        doc["crosscheck"] = check
    _emit(_json(doc), None)
    return 0


def cmd_sweep(args) -> int:
    with open(args.spec) as fh:
        spec = SweepSpec.from_dict(json.load(fh))
    rows = sweep(spec)
    fmt = args.format or ("json" if (args.out or "").endswith(".json") else "csv")
    _emit(serialize(rows, CSV_COLUMNS, fmt), args.out)
    return 0


def cmd_threshold(args) -> int:
    cfg = _config(args)
    check = _verify(args, cfg)
    eta = critical_efficiency(cfg)
    doc = {"family": cfg.family, "N": cfg.pure_state().mode_count, "r": cfg.r, "p": cfg.p,
           "function": cfg.function_label(), "eta_crit": eta, "violation": eta is not None}
    if args.analytic:
        N = doc["N"]
        if N % 2:
            raise UsageError("--analytic needs an even number of sites")
        doc["eta_crit_analytic"] = optimal.analytic_eta_crit(N)
    if check is not None:
        doc["crosscheck"] = check
    _emit(_json(doc), None)
    return 0


def cmd_solve_epsilon(args) -> int:
    if args.parity == "odd":
        if args.N is None or args.N % 2 == 0:
            raise UsageError("--parity odd needs an odd --N")
        eps = optimal.solve_epsilon_odd(args.N, method=args.method)
        doc = {"parity": "odd", "N": args.N, "epsilon": eps}
        if args.eta != 1:
            doc["epsilon_eta_closed"] = optimal.epsilon_lossy_odd_closed(args.N, args.eta)
    else:
        eps = optimal.solve_epsilon_even(method=args.method)
        doc = {"parity": "even", "epsilon": eps, "residual": optimal.even_residual(eps)}
        if args.eta != 1:
            doc["epsilon_eta"] = optimal.epsilon_lossy(args.eta, eps)
            doc["epsilon_eta_self_consistent"] = optimal.epsilon_self_consistent_lossy(args.eta)
    _emit(_json(doc), None)
    return 0


def cmd_crosscheck(args) -> int:
    cfg = _angles_arg(_config(args), args.angles)
    report = oracle_crosscheck(cfg, args.oracle_grid)
    _emit(_json(report.to_dict()), None)
    return 0 if report.passed else 1


def cmd_reproduce(args) -> int:
    data = DATASETS[args.dataset]()
    _emit(serialize(data.rows, data.columns, args.format or "tsv-plotdata"), args.out)
    return 0


COMMANDS = {"eval": cmd_eval, "sweep": cmd_sweep, "threshold": cmd_threshold,
            "solve-epsilon": cmd_solve_epsilon, "crosscheck": cmd_crosscheck,
            "reproduce": cmd_reproduce}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="bellcv: %(message)s", stream=sys.stderr)
    CACHE.load()
    try:
        return COMMANDS[args.command](args)
    except (ConvergenceError, InvariantError) as exc:
        print(f"bellcv: numerical failure: {exc}", file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"bellcv: error: {exc}", file=sys.stderr)
        return 2
    finally:
        CACHE.save()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
