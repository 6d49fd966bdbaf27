"""The sample-solve-select driver with every stage run on simulated clusters.

Local solutions run side by side, then all candidate-versus-sample distances
run side by side, then one last cluster averages each candidate's distances
and picks the cheapest.  Traces compose with :meth:`MpcTrace.parallel` and
:meth:`MpcTrace.then`.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

from ..perm import Instance, InvalidInputError, Metric, Permutation
from ..reconstruct import ReconstructParams
from ..slack import AggregationResult, FrameworkConfig, Provenance, sample_plan
from .distances import _sum, mpc_distance
from .engine import Cluster, MpcConfig, MpcTrace, run_program
from .medians import mpc_footrule_median, mpc_hamming_median, mpc_kendall_median
from .primitives import reduce_many, reduce_to
from .ulam import mpc_ulam_reconstruct

ARGMIN = ("argmin",)
SELECT_DEPTH = 2


def _local(metric: Metric, Q: Instance, seed: int, cfg: MpcConfig,
           params: Optional[ReconstructParams]) -> Tuple[Optional[Permutation], MpcTrace]:
    family = metric.family
    if family == "hamming":
        return mpc_hamming_median(Q, cfg, seed=seed)
    if family == "footrule":
        return mpc_footrule_median(Q, cfg, seed=seed)
    if family == "kendall":
        return mpc_kendall_median(Q, cfg, Q.weights, seed=seed)
    return mpc_ulam_reconstruct(Q, params, cfg)


def _select(costs: Dict[int, List[float]], cfg: MpcConfig) -> Tuple[Optional[Tuple[float, int]], MpcTrace]:
    """Mean distance per candidate (in sample order), then the earliest cheapest.

    Both reductions use fixed-depth trees so the step count does not depend on n.
    """

    def program(cl: Cluster):
        groups = {}
        for c, ds in costs.items():
            groups[("cand", c)] = [("eval", c, t) for t in range(len(ds))]
            for t, d in enumerate(ds):
                cl.place(("eval", c, t), "d", d)
        reduce_many(cl, groups, lambda mid, store: store.pop("d"), _sum, "total", "mean", 1, SELECT_DEPTH)

        def mean(mid, store):
            return (store.pop("total") / len(costs[mid[1]]), mid[1])

        reduce_to(cl, list(groups), mean, min, ARGMIN, "best", "argmin", 2, SELECT_DEPTH)
        return cl.read(ARGMIN)["best"]

    return run_program(program, cfg)


def mpc_aggregate(P: Instance, metric: Metric, cfg: MpcConfig, fcfg: FrameworkConfig,
                  params: Optional[ReconstructParams] = None
                  ) -> Tuple[Optional[AggregationResult], MpcTrace]:
    """Distributed counterpart of the offline driver with the matching local solver.

    Ulam metrics use the reconstruction solver, so ``fcfg.r`` must be 5 and
    the stitching machine needs ``cfg.relaxed``.  Returns ``(None, trace)``
    when any stage exceeds the word cap.
    """
    if P.n != cfg.n:
        raise InvalidInputError(f"instance has n={P.n} but the cluster is sized for n={cfg.n}")
    r = 5 if metric.family == "ulam" else 3
    if fcfg.r != r:
        raise InvalidInputError(f"the {metric.family} solver works on {r} permutations but r={fcfg.r}")
    w = P.weights_for(metric)
    plan = sample_plan(P.n, P.m, fcfg)

    cands: List[Permutation] = [P[i] for i in plan.candidate_indices]
    prov = [Provenance("sampled_input", (i,)) for i in plan.candidate_indices]
    local_traces = []
    for subset, seed in zip(plan.subsets, plan.solver_seeds):
        x, t = _local(metric, P.subset(subset), seed, cfg, params)
        local_traces.append(t)
        if x is None:
            return None, MpcTrace.parallel(local_traces)
        cands.append(x)
        prov.append(Provenance("local_solution", subset))
    trace = MpcTrace.parallel(local_traces) if local_traces else MpcTrace()

    # identical (candidate, sample) pairs repeat the same deterministic run
    memo: Dict[Tuple[Tuple[int, ...], int], Tuple[float, MpcTrace]] = {}
    dist_traces = []
    costs: Dict[int, List[float]] = {}
    for c, x in enumerate(cands):
        row = []
        for s in plan.eval_indices:
            key = (x.forward, s)
            if key not in memo:
                memo[key] = mpc_distance(metric, x, P[s], cfg, w)
            d, t = memo[key]
            dist_traces.append(t)
            if d is None:
                return None, trace.then(MpcTrace.parallel(dist_traces))
            row.append(d)
        costs[c] = row
    trace = trace.then(MpcTrace.parallel(dist_traces))

    best, t = _select(costs, cfg)
    trace = trace.then(t)
    if best is None:
        return None, trace
    est, idx = best
    exact_cost = est if fcfg.full_evaluation else None
    trace.details = {"candidates": len(cands), "evaluationSamples": len(plan.eval_indices)}
    return AggregationResult(cands[idx], est, exact_cost, len(cands), prov[idx]), trace


def offline_counterpart(metric: Metric, params: Optional[ReconstructParams] = None):
    """The offline local solver whose output the distributed driver reproduces."""
    from ..solvers import local_solver

    return local_solver(metric, "reconstruct", params)

