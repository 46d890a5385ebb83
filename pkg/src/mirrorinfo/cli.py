"""Command-line interface: ``solve`` a JSON-configured problem or ``bench`` a suite.

Exit codes: 0 converged, 1 invalid config, 2 iteration cap reached,
3 suspected infeasibility, 4 numerical failure.
"""

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InfeasibleError, InstanceBudgetError, NumericalFailureError
from .factories import KINDS, random_instance
from .matfun import ClampWarning
from .schema import SchemaError, decode_config
from .solvers import SolverConfig, solve

EXIT_OK = 0
EXIT_SCHEMA = 1
EXIT_MAX_ITERS = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

BENCH_HEADER = ["suite", "n", "l", "iters", "tol", "value", "seconds"]
BENCH_SIZES = {"cc": [(4, 1)], "cq": [(4, 1)], "ea": [(4, 1)], "crd": [(4,)], "qrd": [(3,)], "ree": [(2, 2)]}
REFERENCE_TOL = 1e-12
LN2 = math.log(2.0)


def _json_value(v):
    """JSON text for a value, floats at 17 significant digits."""
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        s = format(v, ".17g")
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


@dataclass
class RunReport:
    problem: str
    dims: list
    value: float
    value_avg: float
    iterations: int
    reason: str
    stop_metric: float
    violations: list
    wall_time: float
    seed: int
    units: str = "nats"
    config: dict = field(default_factory=dict)

    def to_json(self):
        return _json_value(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def run_solve(cfg, max_iters=None, tol=None, kappa=None, seed=None, bits=False):
    """Solve a parsed config object; returns ``(RunReport, RunTrace)``."""
    spec, config, cones = decode_config(cfg)
    overrides = {k: v for k, v in (("max_iters", max_iters), ("tol", tol), ("kappa", kappa), ("seed", seed)) if v is not None}
    if overrides:
        try:
            config = dataclasses.replace(config, **overrides)
        except ValueError as exc:
            raise SchemaError("command line", str(exc)) from None
    problem = spec.build()
    if cones is not None and tuple(cones) != problem.constraints.cones:
        raise SchemaError("cones", f"declared {list(cones)} but the problem has {list(problem.constraints.cones)}")
    if config.algorithm == "md" and len(problem.constraints):
        raise SchemaError("solver.algorithm", "mirror descent cannot handle dualized constraints")
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        sol, trace = solve(problem, config)
    elapsed = time.perf_counter() - start
    scale = 1.0 / LN2 if bits else 1.0
    report = RunReport(
        problem=spec.kind,
        dims=list(spec.dims),
        value=sol.value * scale,
        value_avg=sol.value_avg * scale,
        iterations=sol.iterations,
        reason=sol.reason,
        stop_metric=sol.stop_metric,
        violations=list(sol.violations),
        wall_time=elapsed,
        seed=config.seed,
        units="bits" if bits else "nats",
        config={
            "algorithm": config.algorithm,
            "kappa": config.kappa if config.kappa is not None else problem.kappa,
            "tol": config.tol,
            "max_iters": config.max_iters,
            "alpha": config.alpha,
            "theta_bar": config.theta_bar,
        },
    )
    return report, trace


def _cmd_solve(args):
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        report, trace = run_solve(cfg, args.max_iters, args.tol, args.kappa, args.seed, args.bits)
    except SchemaError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (InfeasibleError, InstanceBudgetError) as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalFailureError, DomainError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(report.to_json())
    if args.trace:
        trace.to_csv(args.trace)
    return EXIT_OK if report.reason == "converged" else EXIT_MAX_ITERS


def run_bench(suite, sizes=None, seed=0, tol=1e-7, max_iters=20000):
    """One row per size: a seeded random instance solved with the default settings.

    ``tol`` in the output is the distance to a tighter, longer reference run.
    """
    if suite not in KINDS:
        raise ValueError(f"unknown suite {suite!r}; expected one of {KINDS}")
    rows = []
    for dims in sizes or BENCH_SIZES[suite]:
        n = dims[0]
        l = dims[1] if len(dims) > 1 else ""
        try:
            problem = random_instance(suite, dims, seed).build()
        except (InstanceBudgetError, InfeasibleError) as exc:
            rows.append([suite, n, l, "", "", f"skipped:{exc}", ""])
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ClampWarning)
            start = time.perf_counter()
            sol, _ = solve(problem, SolverConfig(algorithm="pdhg-bt", tol=tol, max_iters=max_iters, seed=seed))
            elapsed = time.perf_counter() - start
            ref, _ = solve(
                problem, SolverConfig(algorithm="pdhg-bt", tol=REFERENCE_TOL, max_iters=10 * max_iters, seed=seed)
            )
        rows.append([suite, n, l, sol.iterations, abs(sol.value - ref.value), sol.value, elapsed])
    return rows


def _fmt_cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_bench(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow([_fmt_cell(v) for v in r])


def _parse_size(text):
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must be comma-separated integers, got {text!r}") from None
    if not dims or any(d < 0 for d in dims):
        raise argparse.ArgumentTypeError(f"invalid size {text!r}")
    return dims


def _cmd_bench(args):
    try:
        rows = run_bench(args.suite, args.sizes, args.seed)
    except (NumericalFailureError, DomainError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_bench(rows, fh)
    else:
        write_bench(rows, sys.stdout)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="mirrorinfo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the problem described by a JSON config")
    p.add_argument("config")
    p.add_argument("--trace", metavar="CSV", help="write the per-iteration trace here")
    p.add_argument("--bits", action="store_true", help="report values in bits instead of nats")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_solve)

    b = sub.add_parser("bench", help="solve seeded random instances of one problem family")
    b.add_argument("suite", choices=KINDS)
    b.add_argument("--sizes", nargs="+", type=_parse_size, metavar="N[,L]")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", metavar="CSV")
    b.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_SCHEMA if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
