"""Command-line front end.

Exit codes: 0 when every expected verdict is met, 1 on a verdict mismatch
or failed/infeasible check, 2 on usage or IO errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import certify as C
from .models import ModelError
from .operators import OperatorError
from .scenarios import ScenarioError, list_scenarios, load_scenario, run_scenario
from .sim import SimulationError, atomic_write

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_OUT = "dissipate-out"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _env_seed() -> int | None:
    v = os.environ.get("DISSIPATE_SEED")
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise SystemExit(f"DISSIPATE_SEED must be an integer, got {v!r}")


def _add_common(p: argparse.ArgumentParser, source: bool = True) -> None:
    if source:
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--scenario", help="built-in scenario id")
        g.add_argument("--config", help="path to a scenario JSON document")
    p.add_argument("--out", default=DEFAULT_OUT, help="output directory (default: %(default)s)")
    p.add_argument("--step", type=float, help="integration step override")
    p.add_argument("--horizon", type=float, help="simulation horizon override")
    p.add_argument("--seed", type=int, default=_env_seed(), help="ensemble seed (default: $DISSIPATE_SEED)")
    p.add_argument("--tolerance", type=float, help="residual tolerance override")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")
    p.add_argument("--plot", action="store_true", help="write an SVG of the state trajectories")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dissipate", description="Dissipativity simulation and certification toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a scenario and write trajectory CSVs")
    _add_common(p)

    p = sub.add_parser("verify", help="run a scenario's certificate checks")
    _add_common(p)

    p = sub.add_parser("couple", help="coupling tests")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--small-gain", nargs=2, type=float, metavar=("R1", "R2"))
    g.add_argument("--indices", nargs=4, type=float, metavar=("DELTA1", "EPS1", "DELTA2", "EPS2"))
    g.add_argument("--affine", nargs=2, metavar=("P1", "P2"), help="JSON matrices or paths to JSON files")
    p.add_argument("--out", default=None, help="directory for the report JSON")

    p = sub.add_parser("scenario", help="list or run built-in scenarios")
    ssub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ssub.add_parser("list", help="print scenario ids")
    r = ssub.add_parser("run", help="simulate and certify a scenario")
    r.add_argument("id", help="scenario id or path to a scenario JSON document")
    _add_common(r, source=False)
    return parser


def _overrides(args) -> dict:
    return {"step": args.step, "horizon": args.horizon, "seed": args.seed, "tolerance": args.tolerance}


def _source(args):
    return args.scenario if args.scenario is not None else args.config


def _print_outcomes(res) -> None:
    for o in res.outcomes:
        flag = "ok" if o.matched else "MISMATCH"
        exp = f" (expected {o.expected})" if o.expected else ""
        print(f"{res.id}/{o.name}: {o.verdict}{exp} [{flag}]")


def _matrix(text: str) -> np.ndarray:
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as f:
            text = f.read()
    try:
        return np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise ScenarioError(f"cannot parse matrix {text!r}: {exc}") from exc


def _cmd_simulate(args) -> int:
    res = run_scenario(_source(args), args.out, args.jobs, _overrides(args), simulate=True, certify=False,
                       plot=args.plot)
    if not res.trajectories:
        print(f"scenario {res.id} defines no trajectories", file=sys.stderr)
        return EXIT_FAIL
    for path in res.artifacts:
        print(path)
    return EXIT_OK if all(tr.ok for tr in res.trajectories.values()) else EXIT_FAIL


def _cmd_verify(args, simulate: bool = False, source=None) -> int:
    res = run_scenario(source if source is not None else _source(args), args.out, args.jobs, _overrides(args),
                       simulate=simulate, certify=True, plot=args.plot)
    _print_outcomes(res)
    return EXIT_OK if res.matched else EXIT_FAIL


def _cmd_couple(args) -> int:
    if args.small_gain is not None:
        rep = C.small_gain_check(*args.small_gain)
    elif args.indices is not None:
        rep = C.passivity_indices_check(*args.indices)
    else:
        rep = C.coupling_affine(_matrix(args.affine[0]), _matrix(args.affine[1]))
    text = C.dumps_report(rep.to_json())
    if args.out:
        atomic_write(os.path.join(args.out, f"report_{rep.check}.json"), text)
    sys.stdout.write(text)
    return EXIT_OK if rep.feasible else EXIT_FAIL


def _cmd_scenario(args) -> int:
    if args.action == "list":
        for sid, desc in list_scenarios():
            print(f"{sid}\t{desc}")
        return EXIT_OK
    load_scenario(args.id)
    return _cmd_verify(args, simulate=True, source=args.id)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "couple":
            return _cmd_couple(args)
        return _cmd_scenario(args)
    except (ScenarioError, OSError) as exc:
        print(f"dissipate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, OperatorError, C.CertificationError, SimulationError) as exc:
        print(f"dissipate: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
