"""Triangle-inequality slack and the sampling aggregation driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Dict, Optional, Sequence, Tuple

from .perm import Instance, InvalidInputError, Metric, Permutation, distance
from .rng import derive_seed, make_rng

IDENTITY_TOL = 1e-9


def _check_index(P: Instance, i: int) -> None:
    if not 0 <= i < P.m:
        raise IndexError(f"index {i} outside 0..{P.m - 1}")


def slack(P: Instance, i: int, j: int, x: Permutation, metric: Metric) -> float:
    """d(x, p_i) + d(x, p_j) - d(p_i, p_j) for 0-based member indices."""
    _check_index(P, i)
    _check_index(P, j)
    if i == j:
        raise IndexError("slack needs two distinct members")
    w = P.weights_for(metric)
    pi, pj = P[i], P[j]
    return distance(metric, x, pi, w) + distance(metric, x, pj, w) - distance(metric, pi, pj, w)


@dataclass
class SlackReport:
    pairwise: Dict[Tuple[int, int], float] = field(default_factory=dict)
    total: float = 0.0


class SlackIdentityError(AssertionError):
    pass


def total_slack(Q: Instance, x: Permutation, metric: Metric, verify: bool = True) -> SlackReport:
    """Slack summed over all unordered member pairs of ``Q``.

    With ``verify`` the total is cross-checked against the closed form
    (|Q|-1) * sum_i d(x, q_i) - sum_{i<j} d(q_i, q_j).
    """
    if Q.m < 2:
        return SlackReport()
    w = Q.weights_for(metric)
    to_x = [distance(metric, x, q, w) for q in Q.perms]
    report = SlackReport()
    between = 0.0
    for i, j in combinations(range(Q.m), 2):
        dij = distance(metric, Q[i], Q[j], w)
        between += dij
        report.pairwise[(i, j)] = to_x[i] + to_x[j] - dij
    report.total = sum(report.pairwise.values())
    if verify:
        closed = 2 * math.comb(Q.m, 2) * (sum(to_x) / Q.m) - between
        if abs(closed - report.total) > IDENTITY_TOL * max(1.0, abs(closed)):
            raise SlackIdentityError(f"pairwise total {report.total} != closed form {closed}")
    return report


# local solvers as injected into the driver ---------------------------------


@dataclass(frozen=True)
class LocalSolver:
    """A consensus routine for subsets of exactly ``r`` permutations.

    ``solve(Q, seed)`` must be deterministic in its arguments.
    """

    name: str
    r: int
    solve: Callable[[Instance, int], Permutation]

    def __call__(self, Q: Instance, seed: int = 0) -> Permutation:
        if Q.m != self.r:
            raise InvalidInputError(f"{self.name} expects {self.r} permutations, got {Q.m}")
        return self.solve(Q, seed)


@dataclass(frozen=True)
class FrameworkConfig:
    r: int = 3
    delta: float = 0.5
    candidate_samples: Optional[int] = None
    subset_samples: Optional[int] = None
    eval_samples: Optional[int] = None
    seed: int = 0
    candidate_constant: float = 4.0
    eval_constant: float = 8.0
    full_evaluation: bool = False

    def __post_init__(self) -> None:
        if self.r < 2:
            raise InvalidInputError("r must be >= 2")
        if not 0 < self.delta < 1:
            raise InvalidInputError("delta must lie in (0, 1)")
        for name in ("candidate_samples", "subset_samples", "eval_samples"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise InvalidInputError(f"{name} must be >= 1")

    def counts(self, n: int, m: int) -> Tuple[int, int, int]:
        """(candidate draws, subset draws, evaluation draws) for an n x m instance."""
        lg = math.log2(max(n, 2))
        base = math.ceil(self.candidate_constant * lg / self.delta)
        ev = math.ceil(self.eval_constant * lg / self.delta ** 2)
        cand = self.candidate_samples if self.candidate_samples is not None else base
        sub = self.subset_samples if self.subset_samples is not None else base
        ev = self.eval_samples if self.eval_samples is not None else ev
        return min(cand, m), min(sub, m), min(ev, m)


@dataclass(frozen=True)
class Provenance:
    kind: str  # "sampled_input" or "local_solution"
    indices: Tuple[int, ...]


@dataclass(frozen=True)
class AggregationResult:
    median: Permutation
    estimated_cost: float
    exact_cost: Optional[float]
    candidate_count: int
    provenance: Provenance


@dataclass(frozen=True)
class SamplePlan:
    """Every random index the driver draws, fixed up front from the seed."""

    candidate_indices: Tuple[int, ...]
    subsets: Tuple[Tuple[int, ...], ...]
    solver_seeds: Tuple[int, ...]
    eval_indices: Tuple[int, ...]


def sample_plan(n: int, m: int, cfg: FrameworkConfig) -> SamplePlan:
    if m < cfg.r:
        raise InvalidInputError(f"need m >= r, got m={m}, r={cfg.r}")
    n_cand, n_sub, _ = cfg.counts(n, m)
    cand = make_rng(cfg.seed, "candidates").integers(0, m, size=n_cand)
    subsets = []
    seeds = []
    for t in range(n_sub):
        pick = make_rng(cfg.seed, "subset", t).choice(m, size=cfg.r, replace=False)
        subsets.append(tuple(int(i) for i in pick))
        seeds.append(derive_seed(cfg.seed, "solver", t))
    return SamplePlan(tuple(int(i) for i in cand), tuple(subsets), tuple(seeds), eval_sample(n, m, cfg))


def eval_sample(n: int, m: int, cfg: FrameworkConfig) -> Tuple[int, ...]:
    """Indices of the shared evaluation sample S (every member under full evaluation)."""
    if cfg.full_evaluation:
        return tuple(range(m))
    n_eval = cfg.counts(n, m)[2]
    return tuple(int(i) for i in make_rng(cfg.seed, "evaluation").integers(0, m, size=n_eval))


def estimate_best_candidate(C: Sequence[Permutation], P: Instance, metric: Metric,
                            cfg: FrameworkConfig,
                            eval_indices: Optional[Sequence[int]] = None) -> Tuple[int, Permutation, float]:
    """Return (index, winner, estimated cost): argmin of cost over one shared sample S.

    Ties go to the earliest candidate.  ``eval_indices`` overrides the draw of S.
    """
    if not C:
        raise InvalidInputError("candidate set is empty")
    if eval_indices is None:
        eval_indices = eval_sample(P.n, P.m, cfg)
    S = [P[i] for i in eval_indices]
    w = P.weights_for(metric)
    memo: Dict[Tuple[int, ...], float] = {}
    best_i, best_cost = -1, math.inf
    for i, x in enumerate(C):
        c = memo.get(x.forward)
        if c is None:
            c = sum(distance(metric, x, s, w) for s in S) / len(S)
            memo[x.forward] = c
        if c < best_cost:
            best_i, best_cost = i, c
    return best_i, C[best_i], best_cost


def build_candidates(P: Instance, plan: SamplePlan,
                     solver: LocalSolver) -> Tuple[list, list]:
    """Candidates in insertion order with their provenance records."""
    cands: list = []
    prov: list = []
    for i in plan.candidate_indices:
        cands.append(P[i])
        prov.append(Provenance("sampled_input", (i,)))
    for subset, seed in zip(plan.subsets, plan.solver_seeds):
        cands.append(solver(P.subset(subset), seed))
        prov.append(Provenance("local_solution", subset))
    return cands, prov


def aggregate(P: Instance, metric: Metric, cfg: FrameworkConfig, solver: LocalSolver,
              exact: bool = False) -> AggregationResult:
    """Sample candidates and local solutions, then keep the empirically cheapest."""
    if solver.r != cfg.r:
        raise InvalidInputError(f"solver works on {solver.r} permutations but r={cfg.r}")
    plan = sample_plan(P.n, P.m, cfg)
    cands, prov = build_candidates(P, plan, solver)
    idx, winner, est = estimate_best_candidate(cands, P, metric, cfg, plan.eval_indices)
    exact_cost = None
    if cfg.full_evaluation:
        exact_cost = est
    elif exact:
        w = P.weights_for(metric)
        exact_cost = sum(distance(metric, winner, p, w) for p in P.perms) / P.m
    return AggregationResult(winner, est, exact_cost, len(cands), prov[idx])


def approximation_bound(constant: float, r: int) -> float:
    """Ratio 2 - 1/(C * C(r,2) + 1) guaranteed for a solver with proximity constant C."""
    return 2 - 1 / (constant * math.comb(r, 2) + 1)
