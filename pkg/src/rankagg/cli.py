"""Command-line entry point: ``rankagg gen|dist|slack|aggregate|mpc|verify``.

Exit codes: 0 success, 1 invalid input, 2 an MPC run broke its word cap or
machine budget.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .generate import planted_instance, sidecar, uniform_instance
from .mpc import (MachineBudgetExceeded, MpcConfig, MpcTrace, mpc_aggregate, mpc_distance, mpc_footrule_median,
                  mpc_hamming_median, mpc_kendall_median, mpc_ulam_reconstruct)
from .oracles import DEFAULT_BUDGET, BudgetExceeded, exact_median
from .perm import Instance, InvalidInputError, Metric, Permutation, cost, distance
from .reconstruct import ReconstructParams
from .rng import entropy_seed
from .slack import FrameworkConfig, aggregate, total_slack
from .solvers import local_solver

EXIT_OK, EXIT_INPUT, EXIT_CAP = 0, 1, 2
RATIO_TOL = 1e-9

SOLVERS = {
    "hamming-majority": ("hamming", "fvs"),
    "footrule-median": ("footrule", "fvs"),
    "kendall-kwiksort": ("kendall", "fvs"),
    "ulam-fvs": ("ulam", "fvs"),
    "ulam-reconstruct": ("ulam", "reconstruct"),
}
MPC_ALGORITHMS = ("distance", "hamming-median", "footrule-median", "kendall-median", "ulam-reconstruct", "aggregate")


class CapExceeded(Exception):
    """An MPC run failed on resources; carries the report to print."""

    def __init__(self, report: "RunReport") -> None:
        super().__init__("MPC run exceeded its resource budget")
        self.report = report


@dataclass
class RunReport:
    instance: Dict[str, Any]
    algorithm: str
    params: Dict[str, Any]
    output: Optional[List[int]]
    cost: Optional[float]
    seed: int
    wall_time: float
    opt: Optional[float] = None
    ratio: Optional[float] = None
    trace: Optional[Dict[str, Any]] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.ratio is not None:
            if self.opt is None:
                raise ValueError("a ratio needs the optimum it was computed from")
            if self.ratio < 1 - RATIO_TOL:
                raise ValueError(f"ratio {self.ratio} is below 1")

    def to_json(self) -> dict:
        data = {
            "instance": self.instance,
            "algorithm": self.algorithm,
            "params": self.params,
            "output": self.output,
            "cost": self.cost,
            "seed": self.seed,
            "wallTime": self.wall_time,
        }
        for key, value in (("opt", self.opt), ("ratio", self.ratio), ("trace", self.trace)):
            if value is not None:
                data[key] = value
        if self.extra:
            data["extra"] = self.extra
        return data

    def emit(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "RunReport":
        return cls(instance=data["instance"], algorithm=data["algorithm"], params=data["params"],
                   output=data["output"], cost=data["cost"], seed=data["seed"], wall_time=data["wallTime"],
                   opt=data.get("opt"), ratio=data.get("ratio"), trace=data.get("trace"),
                   extra=data.get("extra", {}))

    @classmethod
    def parse(cls, text: str) -> "RunReport":
        return cls.from_json(json.loads(text))


# helpers ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1); exit 2 is reserved for cap violations."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _seed(args) -> int:
    if args.seed is None:
        args.seed = entropy_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _load(path: str) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    return Instance.parse(text)


def _summary(P: Instance, path: Optional[str]) -> Dict[str, Any]:
    return {"path": path, "n": P.n, "m": P.m, "weighted": P.weights is not None}


def _metric(args) -> Metric:
    return Metric.parse(args.metric)


def _reconstruct_params(args) -> ReconstructParams:
    kwargs = {"epsilon": args.epsilon, "rho": args.rho}
    if args.tuple_cap is not None:
        kwargs["tuple_cap"] = args.tuple_cap
    return ReconstructParams(**kwargs)


def _mpc_config(args, n: int, reconstruct: bool = False) -> MpcConfig:
    """Reconstruction runs exempt their stitching machine unless ``--strict`` is given."""
    return MpcConfig(n, epsilon=args.epsilon, relaxed=reconstruct and not args.strict)


def _with_opt(report: RunReport, P: Instance, metric: Metric, x: Optional[Permutation]) -> None:
    """Attach the exact optimum and ratio when the enumeration budget allows."""
    if x is None or P.n > DEFAULT_BUDGET.max_n:
        if x is not None:
            report.extra["verify"] = f"skipped: n={P.n} exceeds the enumeration budget {DEFAULT_BUDGET.max_n}"
        return
    best = exact_median(P, metric)
    report.opt = best.opt
    report.ratio = 1.0 if best.opt == 0 else report.cost / best.opt
    report.__post_init__()


def _print(args, payload: Any, text: str) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True) if args.json else text)


# subcommands -------------------------------------------------------------------


def cmd_gen(args) -> int:
    seed = _seed(args)
    if args.model == "uniform":
        P = uniform_instance(args.n, args.m, seed, args.weights)
        truth = None
    else:
        planted = planted_instance(args.n, args.m, args.moves, seed, args.weights)
        P = planted.instance
        truth = sidecar(planted, seed)
    if args.out is None:
        sys.stdout.write(P.to_text())
        if truth is not None:
            print(json.dumps(truth), file=sys.stderr)
        return EXIT_OK
    P.write(args.out)
    if truth is not None:
        Path(args.out + ".truth.json").write_text(json.dumps(truth, indent=2) + "\n")
    return EXIT_OK


def cmd_dist(args) -> int:
    P = _load(args.instance)
    metric = _metric(args)
    w = P.weights_for(metric)
    if (args.i is None) != (args.j is None):
        raise InvalidInputError("give both member indices or neither")
    pairs = [(args.i, args.j)] if args.i is not None else [(i, j) for i in range(P.m) for j in range(i + 1, P.m)]
    rows = []
    for i, j in pairs:
        if not (0 <= i < P.m and 0 <= j < P.m):
            raise InvalidInputError(f"member index outside 0..{P.m - 1}")
        rows.append({"i": i, "j": j, "distance": distance(metric, P[i], P[j], w)})
    _print(args, {"metric": metric.value, "distances": rows},
           "\n".join(f"d({r['i']}, {r['j']}) = {r['distance']:g}" for r in rows))
    return EXIT_OK


def cmd_slack(args) -> int:
    P = _load(args.instance)
    metric = _metric(args)
    if args.x is not None:
        x = Permutation.parse(args.x)
    elif args.x_index is not None:
        if not 0 <= args.x_index < P.m:
            raise InvalidInputError(f"member index outside 0..{P.m - 1}")
        x = P[args.x_index]
    else:
        x = exact_median(P, metric).median
    rep = total_slack(P, x, metric)
    payload = {"metric": metric.value, "x": list(x.forward), "total": rep.total,
               "pairwise": [{"i": i, "j": j, "slack": v} for (i, j), v in sorted(rep.pairwise.items())]}
    lines = [f"x = {x}"] + [f"slack({i}, {j}) = {v:g}" for (i, j), v in sorted(rep.pairwise.items())]
    lines.append(f"total = {rep.total:g}")
    _print(args, payload, "\n".join(lines))
    return EXIT_OK


def _solver_name(metric: Metric, algorithm: Optional[str]) -> str:
    if algorithm is None:
        return {"hamming": "hamming-majority", "footrule": "footrule-median", "kendall": "kendall-kwiksort",
                "ulam": "ulam-fvs"}[metric.family]
    family, _ = SOLVERS[algorithm]
    if family != metric.family:
        raise InvalidInputError(f"algorithm {algorithm} does not fit metric {metric.value}")
    return algorithm


def cmd_aggregate(args) -> int:
    seed = _seed(args)
    P = _load(args.instance)
    metric = _metric(args)
    start = time.perf_counter()
    if args.mpc:
        name = "ulam-reconstruct" if metric.family == "ulam" else _solver_name(metric, args.algorithm)
        if args.algorithm not in (None, name):
            raise InvalidInputError(f"--mpc uses the {name} solver for {metric.value}")
    else:
        name = _solver_name(metric, args.algorithm)
    family, method = SOLVERS[name]
    params = _reconstruct_params(args) if method == "reconstruct" else None
    solver = local_solver(metric, method, params)
    r = args.r if args.r is not None else solver.r
    fcfg = FrameworkConfig(r=r, delta=args.delta, seed=seed, full_evaluation=args.full_evaluation)
    algo_params = {"r": r, "delta": args.delta, "fullEvaluation": args.full_evaluation, "mpc": args.mpc}
    if method == "reconstruct":
        algo_params.update({"epsilon": params.epsilon, "rho": params.rho, "tupleCap": params.tuple_cap})
    trace = None
    if args.mpc:
        cfg = _mpc_config(args, P.n, reconstruct=family == "ulam")
        algo_params.update({"epsilon": cfg.epsilon, "wordCap": cfg.word_cap, "relaxed": cfg.relaxed})
        result, tr = _run_mpc(lambda: mpc_aggregate(P, metric, cfg, fcfg, params))
        trace = tr.to_json()
    else:
        result = aggregate(P, metric, fcfg, solver)
    x = None if result is None else result.median
    report = RunReport(_summary(P, args.instance), name, algo_params,
                       None if x is None else list(x.forward),
                       None if x is None else cost(x, P, metric), seed, 0.0, trace=trace)
    if result is not None:
        report.extra.update({"estimatedCost": result.estimated_cost, "candidates": result.candidate_count,
                             "provenance": {"kind": result.provenance.kind,
                                            "indices": list(result.provenance.indices)}})
    if args.verify:
        _with_opt(report, P, metric, x)
    report.wall_time = time.perf_counter() - start
    if x is None:
        raise CapExceeded(report)
    print(report.emit())
    return EXIT_OK


def _run_mpc(fn):
    try:
        return fn()
    except MachineBudgetExceeded as exc:
        trace = MpcTrace(failed={"machine": "budget", "round": -1})
        trace.details["error"] = str(exc)
        return None, trace


def _members(P: Instance, indices: Optional[Sequence[int]], r: int) -> Instance:
    idx = list(indices) if indices else list(range(r))
    if len(idx) != r:
        raise InvalidInputError(f"this algorithm needs exactly {r} members, got {len(idx)}")
    if any(not 0 <= i < P.m for i in idx):
        raise InvalidInputError(f"member index outside 0..{P.m - 1}")
    return P.subset(idx)


def cmd_mpc(args) -> int:
    seed = _seed(args)
    P = _load(args.instance)
    algo = args.algorithm
    start = time.perf_counter()
    if algo == "aggregate":
        args.mpc, args.algorithm = True, None
        return cmd_aggregate(args)
    metric = _metric(args)
    cfg = _mpc_config(args, P.n, reconstruct=algo == "ulam-reconstruct")
    params: Dict[str, Any] = {"epsilon": cfg.epsilon, "wordCap": cfg.word_cap, "relaxed": cfg.relaxed}
    output = None
    value = None
    if algo == "distance":
        i, j = args.members if args.members else (0, 1)
        sub = _members(P, (i, j), 2)
        d, tr = _run_mpc(lambda: mpc_distance(metric, sub[0], sub[1], cfg, P.weights_for(metric)))
        params.update({"metric": metric.value, "members": [i, j]})
        value = d
        ok = d is not None
    else:
        r = 5 if algo == "ulam-reconstruct" else 3
        Q = _members(P, args.members, r)
        if algo == "hamming-median":
            x, tr = _run_mpc(lambda: mpc_hamming_median(Q, cfg, seed=seed))
        elif algo == "footrule-median":
            x, tr = _run_mpc(lambda: mpc_footrule_median(Q, cfg, seed=seed))
        elif algo == "kendall-median":
            x, tr = _run_mpc(lambda: mpc_kendall_median(Q, cfg, Q.weights, seed=seed))
        else:
            rp = _reconstruct_params(args)
            params.update({"rho": rp.rho, "tupleCap": rp.tuple_cap})
            x, tr = _run_mpc(lambda: mpc_ulam_reconstruct(Q, rp, cfg))
        params["members"] = list(args.members) if args.members else list(range(r))
        ok = x is not None
        if ok:
            output = list(x.forward)
            value = cost(x, Q, metric)
            params["metric"] = metric.value
    report = RunReport(_summary(P, args.instance), f"mpc-{algo}", params, output, value, seed,
                       time.perf_counter() - start, trace=tr.to_json())
    if not ok:
        raise CapExceeded(report)
    print(report.emit())
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES

    suite = SUITES[args.suite](seed=args.seed if args.seed is not None else 0)
    if args.json:
        print(json.dumps({"suite": suite.suite, "passed": suite.passed, "elapsed": suite.elapsed,
                          "checks": [asdict(c) for c in suite.checks]}, indent=2))
    else:
        print("\n".join(suite.lines()))
    return EXIT_OK if suite.passed else EXIT_INPUT


# parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed; drawn from entropy and printed if omitted")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--metric", default="kendall", help="hamming, weighted-hamming, footrule, kendall, "
                        "weighted-kendall, ulam or weighted-ulam")
    common.add_argument("--epsilon", type=float, default=0.5, help="block exponent for MPC and reconstruction")
    common.add_argument("--rho", type=float, default=0.25, help="window grid granularity for reconstruction")
    common.add_argument("--delta", type=float, default=0.5, help="sampling slack parameter")
    common.add_argument("--r", type=int, default=None, help="members per local subproblem")

    parser = _Parser(prog="rankagg", description="Approximate permutation medians.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("gen", parents=[common], help="generate an instance file")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--model", choices=("uniform", "planted"), default="uniform")
    gen.add_argument("--moves", type=int, default=1, help="element moves per member (planted model)")
    gen.add_argument("--weights", action="store_true", help="attach random element weights")
    gen.add_argument("--out", default=None, help="output path; planted ground truth goes to OUT.truth.json")
    gen.set_defaults(func=cmd_gen)

    dist = sub.add_parser("dist", parents=[common], help="distances between members")
    dist.add_argument("instance")
    dist.add_argument("i", type=int, nargs="?")
    dist.add_argument("j", type=int, nargs="?")
    dist.set_defaults(func=cmd_dist)

    sl = sub.add_parser("slack", parents=[common], help="pairwise slack of a permutation")
    sl.add_argument("instance")
    group = sl.add_mutually_exclusive_group()
    group.add_argument("--x", default=None, help="permutation as space-separated elements")
    group.add_argument("--x-index", type=int, default=None, help="use member X_INDEX as x")
    sl.set_defaults(func=cmd_slack)

    def run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("instance")
        p.add_argument("--tuple-cap", type=int, default=None, help="window tuples kept per block")
        p.add_argument("--strict", action="store_true",
                       help="hold the reconstruction's stitching machine to the word cap too")

    agg = sub.add_parser("aggregate", parents=[common], help="run the sampling driver")
    run_flags(agg)
    agg.add_argument("--algorithm", choices=sorted(SOLVERS), default=None)
    agg.add_argument("--mpc", action="store_true", help="run every stage on the simulated cluster")
    agg.add_argument("--verify", action="store_true", help="attach the exact optimum and ratio (n <= 8)")
    agg.add_argument("--full-evaluation", action="store_true", help="evaluate candidates on every member")
    agg.set_defaults(func=cmd_aggregate)

    mpc = sub.add_parser("mpc", parents=[common], help="run one distributed algorithm and print its trace")
    run_flags(mpc)
    mpc.add_argument("--algorithm", choices=MPC_ALGORITHMS, required=True)
    mpc.add_argument("--members", type=int, nargs="+", default=None, help="member indices to use")
    mpc.add_argument("--verify", action="store_true", help=argparse.SUPPRESS)
    mpc.add_argument("--full-evaluation", action="store_true", help=argparse.SUPPRESS)
    mpc.set_defaults(func=cmd_mpc)

    ver = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    from .verify import SUITES

    ver.add_argument("suite", choices=sorted(SUITES))
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapExceeded as exc:
        print(exc.report.emit())
        print("error: MPC run exceeded its word cap or machine budget", file=sys.stderr)
        return EXIT_CAP
    except (InvalidInputError, BudgetExceeded, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
