"""Command-line interface: ``condreach check|optimize|synthesize|bench``.

Results are printed as ``key=value`` lines (CSV for ``bench``).  Exit codes:
0 holds / feasible / success, 1 violated / infeasible, 2 undefined,
3 any other error.
"""

from __future__ import annotations

import argparse
import csv
import os
import random
import sys
import time
from fractions import Fraction

from .bisection import VARIANTS, BisectionConfig, optimize
from .colored import ColoredMdp, synthesize
from .conditional import UndefinedError, build_transform, check_defined, decide_sign, probe
from .generate import random_mdp
from .graph import topological_order
from .model import COMPARISONS, MODES, Mdp, ModelError, Query, parse_model, to_fraction
from .restart import solve_restart_full

EXIT_OK, EXIT_NO, EXIT_UNDEFINED, EXIT_ERROR = 0, 1, 2, 3
METHODS = ("treat", "restart")
_CMP_NAMES = {name: sym for sym, name in COMPARISONS.items()}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share the generic error code; 2 means "undefined" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _comparison(token: str) -> str:
    if token in COMPARISONS:
        return token
    if token in _CMP_NAMES:
        return _CMP_NAMES[token]
    raise argparse.ArgumentTypeError(f"unknown comparison {token!r}")


def _rational(token: str) -> Fraction:
    try:
        return to_fraction(token)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _render(v) -> str:
    return str(v) if isinstance(v, Fraction) else repr(float(v))


def _emit(out, **fields) -> None:
    for k, v in fields.items():
        if v is None:
            continue
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, (Fraction, float)):
            v = _render(v)
        print(f"{k}={v}", file=out)


def _load(path: str) -> Mdp:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_model(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _label(m: Mdp, name: str) -> frozenset[int]:
    if name not in m.labels:
        raise CliError(f"unknown label {name!r}")
    return m.labels[name]


def _query(m: Mdp, args, **extra) -> Query:
    return Query(
        _label(m, args.goal),
        _label(m, args.evidence),
        direction=args.direction,
        mode=args.mode,
        **extra,
    )


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    m = _load(args.model)
    q = _query(m, args, comparison=args.cmp, threshold=args.threshold)
    start = time.perf_counter()
    if not check_defined(m, q.evidence):
        _emit(out, result="undefined", method=args.method, mode=args.mode)
        return EXIT_UNDEFINED
    lam = args.threshold
    if args.method == "treat":
        t = build_transform(m, q)
        res = probe(t, lam)
        sign, value, iterations = res.sign, res.value, res.iterations
    else:
        opt, solved, _ = solve_restart_full(m, q)
        diff = opt - (lam if q.exact else float(lam))
        sign, value, iterations = (diff > 0) - (diff < 0), diff, solved.iterations
    holds = decide_sign(sign, args.cmp)
    _emit(
        out,
        result="holds" if holds else "violated",
        method=args.method,
        mode=args.mode,
        sign=sign,
        value=value,
        iterations=iterations,
        time=f"{time.perf_counter() - start:.6f}",
    )
    return EXIT_OK if holds else EXIT_NO


def cmd_optimize(args, out=None) -> int:
    out = out or sys.stdout
    m = _load(args.model)
    eps = args.eps
    if eps is not None and eps == 0 and args.mode == "float":
        raise CliError("--eps 0 requires --mode exact")
    q = _query(m, args, epsilon=eps if eps is not None else Fraction(0))
    start = time.perf_counter()
    if not check_defined(m, q.evidence):
        _emit(out, result="undefined", method=args.method, mode=args.mode)
        return EXIT_UNDEFINED
    if args.method == "restart":
        value, solved, _ = solve_restart_full(m, q)
        _emit(out, result="value", method="restart", mode=args.mode, value=value, iterations=solved.iterations)
    else:
        res = optimize(m, q, BisectionConfig(args.variant, eps, args.mode))
        fields = {"result": "value" if res.exact else "interval", "method": "treat", "mode": args.mode}
        if res.exact:
            fields["value"] = res.value
        else:
            fields.update(lower=res.lower, upper=res.upper, value=res.value)
            fields["value_float"] = repr(float(res.value))
        fields.update(variant=args.variant, iterations=res.iterations, reason=res.reason)
        _emit(out, **fields)
    _emit(out, time=f"{time.perf_counter() - start:.6f}")
    return EXIT_OK


def cmd_synthesize(args, out=None) -> int:
    out = out or sys.stdout
    m = _load(args.model)
    if args.cmp == "=":
        raise CliError("synthesis supports <, <=, >=, >")
    q = Query(_label(m, args.goal), _label(m, args.evidence), mode=args.mode, comparison=args.cmp, threshold=args.threshold)
    if not check_defined(m, q.evidence):
        _emit(out, result="undefined", mode=args.mode)
        return EXIT_UNDEFINED
    res = synthesize(ColoredMdp.from_mdp(m), q, cap_nodes=args.max_nodes)
    witness = None
    if res.witness is not None:
        witness = " ".join(f"{s}:{m.actions[s][a].name}" for s, a in sorted(res.witness.items()))
    _emit(
        out,
        result="feasible" if res.feasible else "infeasible",
        feasible=res.feasible,
        witness=witness,
        value=res.value,
        nodes=res.nodes,
        it_per_s=f"{res.iterations_per_second:.1f}",
        time=f"{res.elapsed:.6f}",
    )
    return EXIT_OK if res.feasible else EXIT_NO


BENCH_COLUMNS = ("instance", "states", "method", "value", "iterations", "time")


def cmd_bench(args, out=None) -> int:
    out = out or sys.stdout
    if args.count < 0 or args.states < 3:
        raise CliError("need --count >= 0 and --states >= 3")
    methods = [x.strip() for x in args.methods.split(",") if x.strip()]
    for name in methods:
        if name not in METHODS:
            raise CliError(f"unknown method {name!r}")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    rng = random.Random(args.seed)
    for k in range(args.count):
        m = _defined_instance(rng, args.states, args.acyclic)
        if args.acyclic and topological_order(m) is None:
            raise CliError("generator produced a cyclic model")
        q = Query(m.label("goal"), m.label("evidence"), direction=args.direction, mode=args.mode)
        for name in methods:
            start = time.perf_counter()
            try:
                if name == "treat":
                    res = optimize(m, q, BisectionConfig(args.variant, mode=args.mode))
                    value, iterations = res.value, res.iterations
                else:
                    value, solved, _ = solve_restart_full(m, q)
                    iterations = solved.iterations
                shown = _render(value)
            except UndefinedError:
                shown, iterations = "undefined", 0
            writer.writerow((k, m.num_states, name, shown, iterations, f"{time.perf_counter() - start:.6f}"))
    return EXIT_OK


def _defined_instance(rng: random.Random, states: int, acyclic: bool, attempts: int = 1000) -> Mdp:
    # redraw until the evidence is reachable, so every row has a value
    for _ in range(attempts):
        m = random_mdp(rng, states, acyclic=acyclic)
        if check_defined(m, m.label("evidence")):
            return m
    raise CliError("could not generate a model with reachable evidence")


def build_parser() -> argparse.ArgumentParser:
    default_mode = os.environ.get("CONDREACH_MODE", "exact")
    if default_mode not in MODES:
        default_mode = "exact"
    parser = _Parser(prog="condreach", description="Conditional reachability on MDPs.")
    sub = parser.add_subparsers(dest="command", required=True)

    def query_flags(p, direction=True):
        p.add_argument("model", help="model file")
        p.add_argument("--goal", default="goal", help="goal label (default: goal)")
        p.add_argument("--evidence", default="evidence", help="evidence label (default: evidence)")
        if direction:
            p.add_argument("--direction", choices=("max", "min"), default="max")
        p.add_argument("--mode", choices=MODES, default=default_mode)

    p = sub.add_parser("check", help="decide Pr(goal | evidence) ~ threshold")
    query_flags(p)
    p.add_argument("--threshold", type=_rational, required=True)
    p.add_argument("--cmp", type=_comparison, default="<=", help="lt, le, eq, ge, gt (or <, <=, =, >=, >)")
    p.add_argument("--method", choices=METHODS, default="treat")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("optimize", help="compute the optimal conditional probability")
    query_flags(p)
    p.add_argument("--variant", choices=VARIANTS, default="pt-std")
    p.add_argument("--eps", type=_rational, default=None, help="precision (default: 0 in exact mode, 1e-6 otherwise)")
    p.add_argument("--method", choices=METHODS, default="treat")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("synthesize", help="search for a color-consistent policy")
    query_flags(p, direction=False)
    p.add_argument("--threshold", type=_rational, required=True)
    p.add_argument("--cmp", type=_comparison, default=">=")
    p.add_argument("--max-nodes", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("bench", help="CSV over seeded random models")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--states", type=int, default=8)
    p.add_argument("--acyclic", action="store_true")
    p.add_argument("--methods", default="treat,restart")
    p.add_argument("--variant", choices=VARIANTS, default="pt-std")
    p.add_argument("--direction", choices=("max", "min"), default="max")
    p.add_argument("--mode", choices=MODES, default=default_mode)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UndefinedError as exc:
        print(f"result=undefined\nerror={exc}", file=sys.stdout)
        return EXIT_UNDEFINED
    except (CliError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
