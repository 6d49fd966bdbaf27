"""Oracle-backed acceptance suites.

Each suite returns a :class:`SuiteResult` holding one :class:`Check` per
assertion.  Trial counts and tolerances are parameters so the test suite
and the ``verify`` subcommand run the same code at the stated sizes.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .generate import planted_instance, random_permutation, random_weights, uniform_instance
from .mpc import (MpcConfig, kendall_machine_count, mpc_aggregate, mpc_distance, mpc_footrule_median,
                  mpc_hamming_median, mpc_kendall_median, mpc_ulam_reconstruct, offline_counterpart)
from .oracles import (composition_objective, exact_feedback_arc_set, exact_median, exhaustive_composition,
                      naive_distance)
from .perm import Instance, Metric, Permutation, cost, distance
from .reconstruct import (AnalysisRegimeWarning, ReconstructParams, block_layout, compose_blocks,
                          enumerate_candidates, scalable_median_reconstruct, window_grid)
from .rng import make_rng
from .slack import FrameworkConfig, aggregate, slack, total_slack
from .solvers import MajorityTournament, footrule_median, hamming_majority_median, local_solver

TOL = 1e-9
ALL_METRICS = tuple(Metric)
FAMILIES = (Metric.HAMMING, Metric.FOOTRULE, Metric.KENDALL, Metric.ULAM)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    suite: str
    checks: List[Check] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(Check(name, bool(passed), detail))

    def lines(self) -> List[str]:
        out = [f"[{'PASS' if c.passed else 'FAIL'}] {self.suite}: {c.name}" + (f" ({c.detail})" if c.detail else "")
               for c in self.checks]
        out.append(f"{self.suite}: {'PASS' if self.passed else 'FAIL'} in {self.elapsed:.1f}s")
        return out


def _timed(suite: str, limit: Optional[float]):
    def wrap(body: Callable[[SuiteResult], None]) -> SuiteResult:
        res = SuiteResult(suite)
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AnalysisRegimeWarning)
            body(res)
        res.elapsed = time.perf_counter() - start
        if limit is not None:
            res.add(f"runtime under {limit:g}s", res.elapsed < limit, f"{res.elapsed:.1f}s")
        return res
    return wrap


def _weights_for(metric: Metric, rng: np.random.Generator, n: int, integral: bool = False):
    return random_weights(rng, n, integral) if metric.weighted else None


# 1. distances ---------------------------------------------------------------


def distances_suite(pairs: int = 1000, triples: int = 1000, max_n: int = 128, axiom_max_n: int = 64,
                    seed: int = 0, limit: Optional[float] = 10.0) -> SuiteResult:
    """Fast Kendall and Ulam kernels against quadratic oracles, then the metric axioms."""

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "distances")
        for family in (Metric.KENDALL, Metric.ULAM):
            weighted = Metric(f"weighted-{family.value}")
            bad = []
            for t in range(pairs):
                n = int(rng.integers(1, max_n + 1))
                p, q = random_permutation(rng, n), random_permutation(rng, n)
                # odd trials use integral weights so both summation orders are exact
                metric, w = (weighted, random_weights(rng, n, True)) if t % 2 else (family, None)
                if distance(metric, p, q, w) != naive_distance(metric, p, q, w):
                    bad.append(t)
            res.add(f"{family.value} kernel equals the quadratic oracle on {pairs} pairs", not bad,
                    f"mismatches at trials {bad[:5]}" if bad else "")
        for metric in ALL_METRICS:
            failures: Dict[str, int] = {}
            for _ in range(triples):
                n = int(rng.integers(1, axiom_max_n + 1))
                p, q, r = (random_permutation(rng, n) for _ in range(3))
                w = _weights_for(metric, rng, n)
                dpq, dqp = distance(metric, p, q, w), distance(metric, q, p, w)
                dpr, dqr = distance(metric, p, r, w), distance(metric, q, r, w)
                checks = {
                    "identity": distance(metric, p, p, w) == 0,
                    "positivity": (dpq > 0) == (p != q),
                    "symmetry": abs(dpq - dqp) <= TOL,
                    "triangle": dpr <= dpq + dqr + TOL,
                }
                for k, ok in checks.items():
                    if not ok:
                        failures[k] = failures.get(k, 0) + 1
            res.add(f"{metric.value} metric axioms on {triples} triples", not failures, str(failures) if failures else "")

    return _timed("distances", limit)(body)


# 2. slack identity ------------------------------------------------------------


def slack_suite(trials: int = 500, seed: int = 0, limit: Optional[float] = None) -> SuiteResult:
    """Pairwise slack total against 2*C(m,2)*cost minus the sum of member distances."""

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "slack")
        worst = 0.0
        for t in range(trials):
            metric = ALL_METRICS[t % len(ALL_METRICS)]
            n, m = int(rng.integers(1, 21)), int(rng.integers(2, 9))
            w = _weights_for(metric, rng, n)
            Q = Instance(tuple(random_permutation(rng, n) for _ in range(m)), w)
            x = random_permutation(rng, n)
            pairwise = sum(slack(Q, i, j, x, metric) for i, j in itertools.combinations(range(m), 2))
            between = sum(distance(metric, Q[i], Q[j], w) for i, j in itertools.combinations(range(m), 2))
            closed = 2 * math.comb(m, 2) * cost(x, Q, metric) - between
            worst = max(worst, abs(pairwise - closed))
        res.add(f"identity holds within {TOL:g} on {trials} random (Q, x)", worst <= TOL, f"max error {worst:.3g}")

    return _timed("slack", limit)(body)


# 3. proximity bounds -------------------------------------------------------------


def _kendall_exact_fas(Q: Instance, w) -> Permutation:
    t = MajorityTournament(Q, w)
    order = exact_feedback_arc_set(range(1, Q.n + 1), t.beats, t.edge_weight).order
    return Permutation(tuple(order))


def lemma_suite(trials: int = 300, n: int = 6, m: int = 8, ulam_trials: int = 300, ulam_max_n: int = 10,
                seed: int = 0, limit: Optional[float] = 120.0) -> SuiteResult:
    """Distance from the exact median to a local solution, bounded by the slack of the median."""
    cases = [
        (Metric.WEIGHTED_HAMMING, 1, lambda Q: hamming_majority_median(Q, Q.weights)),
        (Metric.FOOTRULE, 1, footrule_median),
        (Metric.WEIGHTED_KENDALL, 3, lambda Q: _kendall_exact_fas(Q, Q.weights)),
    ]

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "lemma")
        for metric, factor, solve in cases:
            worst = math.inf
            for _ in range(trials):
                P = uniform_instance(n, m, int(rng.integers(2 ** 62)), weights=metric.weighted)
                x_star = exact_median(P, metric).median
                Q = P.subset(int(i) for i in rng.choice(m, size=3, replace=False))
                y = solve(Q)
                margin = factor * total_slack(Q, x_star, metric).total - distance(metric, x_star, y, Q.weights)
                worst = min(worst, margin)
            res.add(f"{metric.value}: d(x*, y) <= {factor} * slack(x*) on {trials} instances", worst >= -TOL,
                    f"smallest margin {worst:.4g}")
        metric = Metric.WEIGHTED_ULAM
        worst = math.inf
        for _ in range(ulam_trials):
            k = int(rng.integers(1, ulam_max_n + 1))
            w = random_weights(rng, k)
            Q = Instance(tuple(random_permutation(rng, k) for _ in range(5)), w)
            x, y = random_permutation(rng, k), random_permutation(rng, k)
            bound = total_slack(Q, x, metric).total + total_slack(Q, y, metric).total
            worst = min(worst, bound - distance(metric, x, y, w))
        res.add(f"{metric.value}: d(x, y) <= slack(x) + slack(y) on {ulam_trials} triples", worst >= -TOL,
                f"smallest margin {worst:.4g}")

    return _timed("lemma-bounds", limit)(body)


# 4. end-to-end ratios ----------------------------------------------------------------

RATIO_MEAN_LIMITS = {"hamming": 1.75 + 0.15, "footrule": 1.75 + 0.15, "kendall": 1.9 + 0.15, "ulam": 1.97 + 0.15}


def ratios_suite(seeds: int = 100, n: int = 6, m: int = 10, limit: Optional[float] = 300.0) -> SuiteResult:
    """Full-evaluation driver output against the exact median."""

    def body(res: SuiteResult) -> None:
        for metric in FAMILIES:
            solver = local_solver(metric)
            ratios = []
            below_opt = 0
            for s in range(seeds):
                P = uniform_instance(n, m, s)
                opt = exact_median(P, metric).opt
                out = aggregate(P, metric, FrameworkConfig(r=solver.r, seed=s, full_evaluation=True), solver)
                below_opt += out.exact_cost < opt - TOL
                ratios.append(1.0 if opt == 0 else out.exact_cost / opt)
            mean = sum(ratios) / len(ratios)
            name = metric.value
            res.add(f"{name}: exact median never beaten", below_opt == 0, f"{below_opt} violations")
            res.add(f"{name}: ratio <= 2 on all {seeds} seeds", max(ratios) <= 2.0 + TOL, f"max {max(ratios):.4f}")
            res.add(f"{name}: mean ratio <= {RATIO_MEAN_LIMITS[name]:.2f}", mean <= RATIO_MEAN_LIMITS[name],
                    f"mean {mean:.4f}")

    return _timed("ratios", limit)(body)


# 5. reconstruction ----------------------------------------------------------------------


def _synthetic_candidates(rng: np.random.Generator, K: int, n: int):
    """Random candidate lists whose windows are arbitrary ordered pairs inside 1..n+1."""
    from .reconstruct import BlockSummary

    out = []
    for j in range(K):
        block = []
        for _ in range(int(rng.integers(0, 5))):
            wins = []
            for _ in range(5):
                s = int(rng.integers(1, n + 2))
                e = int(rng.integers(s, n + 2))
                wins.append((s, e))
            block.append(BlockSummary(j, tuple(wins), 0, int(rng.integers(0, 3 * n))))
        out.append(block)
    return out


def reconstruct_suite(copies: int = 30, planted_seeds: int = 100, planted_n: int = 16, planted_moves: int = 1,
                      recovery: float = 0.95, fixtures: int = 200, seed: int = 0,
                      limit: Optional[float] = 180.0) -> SuiteResult:
    """Five-copies fixture, planted-center recovery and the stitching DP against enumeration."""

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "reconstruct")
        params = ReconstructParams()
        small = ReconstructParams(tuple_cap=6)
        bad = 0
        for _ in range(copies):
            p = random_permutation(rng, int(rng.integers(1, 17)))
            bad += scalable_median_reconstruct(Instance((p,) * 5), params).permutation != p
        res.add(f"five copies of p return p ({copies} cases)", bad == 0, f"{bad} failures")

        hits = 0
        for s in range(planted_seeds):
            pl = planted_instance(planted_n, 5, planted_moves, s)
            hits += scalable_median_reconstruct(pl.instance, params).permutation == pl.center
        rate = hits / planted_seeds
        res.add(f"planted centers recovered on >= {recovery:.0%} of {planted_seeds} seeds "
                f"(n={planted_n}, {planted_moves} move)", rate >= recovery, f"{hits}/{planted_seeds}")

        mismatched = 0
        checked = 0
        for t in range(fixtures):
            if t % 2:
                n = int(rng.integers(1, 13))
                cands = _synthetic_candidates(rng, int(rng.integers(1, 4)), n)
                size = max(1, n // max(1, len(cands)))
            else:
                n = int(rng.integers(1, 10))
                layout = block_layout(n, small.epsilon)
                if layout.count > 3:
                    continue
                Q = planted_instance(n, 5, int(rng.integers(0, 3)), int(rng.integers(2 ** 62))).instance
                grid = window_grid(n, small)
                cands = [enumerate_candidates(Q, grid, j, small.tuple_cap)[0] for j in range(layout.count)]
                size = layout.size
            comp = compose_blocks(cands, n, size)
            picks = [None] * len(cands)
            for j, a in comp.chosen:
                picks[j] = a
            ok = (comp.value == exhaustive_composition(cands, n, size)
                  and composition_objective(cands, picks, n, size) == comp.value)
            mismatched += not ok
            checked += 1
        res.add(f"stitching DP equals exhaustive enumeration on {checked} fixtures with at most 3 blocks",
                mismatched == 0, f"{mismatched} mismatches")

    return _timed("reconstruct", limit)(body)


# 6. MPC fidelity ------------------------------------------------------------------------


def _median_instance(rng: np.random.Generator, n: int, r: int) -> Instance:
    s = int(rng.integers(2 ** 62))
    if rng.random() < 0.5:
        return uniform_instance(n, r, s)
    return planted_instance(n, r, int(rng.integers(1, 4)), s).instance


def mpc_fidelity_suite(median_runs: int = 200, ulam_runs: int = 50, distance_pairs: int = 500,
                       sizes: Sequence[int] = (16, 64), seed: int = 0,
                       limit: Optional[float] = 180.0) -> SuiteResult:
    """Distributed medians and distances against their offline counterparts, bit for bit."""

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "mpc-fidelity")
        for name, run, offline, count in (
            ("hamming median", mpc_hamming_median, hamming_majority_median, median_runs),
            ("footrule median", mpc_footrule_median, footrule_median, median_runs),
        ):
            bad = 0
            for t in range(count):
                n = sizes[t % len(sizes)]
                Q = _median_instance(rng, n, 3)
                x, tr = run(Q, MpcConfig(n))
                bad += x is None or x != offline(Q)
            res.add(f"{name} equals offline on {count} runs", bad == 0, f"{bad} mismatches")
        bad = 0
        for t in range(ulam_runs):
            n = sizes[t % len(sizes)]
            Q = _median_instance(rng, n, 5)
            x, tr = mpc_ulam_reconstruct(Q, None, MpcConfig(n, relaxed=True))
            off = scalable_median_reconstruct(Q)
            bad += x is None or x != off.permutation or tr.details != off.trace.to_json()
        res.add(f"ulam reconstruction and its trace equal offline on {ulam_runs} runs", bad == 0, f"{bad} mismatches")
        for metric in ALL_METRICS:
            bad = 0
            for t in range(distance_pairs):
                n = sizes[t % len(sizes)]
                p, q = random_permutation(rng, n), random_permutation(rng, n)
                w = random_weights(rng, n, True) if metric.weighted else None
                d, tr = mpc_distance(metric, p, q, MpcConfig(n), w)
                bad += d is None or d != distance(metric, p, q, w)
            res.add(f"{metric.value} distance equals the offline kernel on {distance_pairs} pairs", bad == 0,
                    f"{bad} mismatches")

    return _timed("mpc-fidelity", limit)(body)


# 7. MPC resources ------------------------------------------------------------------------


def mpc_resources_suite(sizes: Sequence[int] = (16, 64, 256), runs: int = 2, seed: int = 0,
                        limit: Optional[float] = None) -> SuiteResult:
    """Cap compliance, rounds independent of n, and the Kendall machine layout."""

    def body(res: SuiteResult) -> None:
        rng = make_rng(seed, "verify", "mpc-resources")
        rounds: Dict[str, set] = {}
        violations: List[str] = []
        layout_errors: List[str] = []

        def record(name: str, trace, cfg: MpcConfig) -> None:
            rounds.setdefault(name, set()).add(trace.rounds)
            if trace.failed is not None or trace.peak_words > cfg.word_cap:
                violations.append(f"{name} n={cfg.n}")

        for n in sizes:
            cfg = MpcConfig(n)
            relaxed = MpcConfig(n, relaxed=True)
            for _ in range(runs):
                p, q = random_permutation(rng, n), random_permutation(rng, n)
                for metric in ALL_METRICS:
                    w = random_weights(rng, n, True) if metric.weighted else None
                    _, tr = mpc_distance(metric, p, q, cfg, w)
                    record(f"{metric.value} distance", tr, cfg)
                    if metric.family == "kendall" and tr.machines_used != kendall_machine_count(cfg):
                        layout_errors.append(f"n={n}: {tr.machines_used} != {kendall_machine_count(cfg)}")
                Q3 = _median_instance(rng, n, 3)
                for name, run in (("hamming median", mpc_hamming_median), ("footrule median", mpc_footrule_median),
                                  ("kendall median", mpc_kendall_median)):
                    _, tr = run(Q3, cfg)
                    record(name, tr, cfg)
                _, tr = mpc_ulam_reconstruct(_median_instance(rng, n, 5), None, relaxed)
                record("ulam reconstruction", tr, relaxed)
                P = uniform_instance(n, 12, int(rng.integers(2 ** 62)))
                for metric in (Metric.HAMMING, Metric.FOOTRULE, Metric.KENDALL):
                    _, tr = mpc_aggregate(P, metric, cfg, FrameworkConfig(seed=int(rng.integers(2 ** 31))))
                    record(f"{metric.value} aggregate", tr, cfg)
            # five members keep the reconstruction-backed driver to one subset per candidate slot
            P5 = planted_instance(n, 5, 1, int(rng.integers(2 ** 62))).instance
            _, tr = mpc_aggregate(P5, Metric.ULAM, relaxed, FrameworkConfig(r=5, seed=int(rng.integers(2 ** 31))))
            record("ulam aggregate", tr, relaxed)
        res.add("no run exceeds the word cap", not violations, ", ".join(violations[:5]))
        for name, seen in sorted(rounds.items()):
            res.add(f"{name}: rounds equal across n in {tuple(sizes)}", len(seen) == 1, f"rounds {sorted(seen)}")
        res.add("kendall distance machine count matches the block-pair layout formula", not layout_errors,
                "; ".join(layout_errors))

    return _timed("mpc-resources", limit)(body)


# 8. expected slack under sampling -----------------------------------------------------


def realized_bound(costs: Sequence[float], opt: float, r: int) -> float:
    """Smallest C(r,2) * (alpha + 2 delta) * OPT over all (alpha, delta) the instance satisfies.

    delta(alpha) is the fraction of members with cost at most (2 - alpha) * OPT,
    and a pair is admissible when delta <= 1 - alpha.  The fraction only drops
    as alpha grows past some member's ratio, so those ratios and the ends of
    [0, 1] are the only places the minimum can sit.
    """
    if opt <= 0:
        return 0.0
    m = len(costs)
    ratios = sorted({2 - c / opt for c in costs})
    alphas = {0.0, 1.0}
    for a in ratios:
        if 0 <= a < 1:
            alphas.add(math.nextafter(a, math.inf))
    best = math.inf
    for a in alphas:
        delta = sum(1 for c in costs if c <= (2 - a) * opt) / m
        if delta <= 1 - a + 1e-12:
            best = min(best, math.comb(r, 2) * (a + 2 * delta) * opt)
    return best


def sampling_suite(instances: int = 5, n: int = 6, m: int = 40, draws: int = 500, r: int = 3, seed: int = 0,
                   limit: Optional[float] = 120.0) -> SuiteResult:
    """Mean slack of the exact median over random r-subsets against the realized bound."""

    def body(res: SuiteResult) -> None:
        metric = Metric.KENDALL
        rng = make_rng(seed, "verify", "sampling")
        for t in range(instances):
            P = uniform_instance(n, m, int(rng.integers(2 ** 62)))
            x_star, opt = exact_median(P, metric)
            costs = [cost(p, P, metric) for p in P.perms]
            bound = realized_bound(costs, opt, r)
            values = np.array([total_slack(P.subset(int(i) for i in rng.choice(m, size=r, replace=False)),
                                           x_star, metric).total for _ in range(draws)])
            mean = float(values.mean())
            allowance = 3 * float(values.std(ddof=1)) / math.sqrt(draws)
            res.add(f"instance {t}: mean slack <= bound + 3 sigma", mean <= bound + allowance,
                    f"mean {mean:.3f}, bound {bound:.3f}, allowance {allowance:.3f}")

    return _timed("sampling", limit)(body)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "distances": distances_suite,
    "slack": slack_suite,
    "lemma-bounds": lemma_suite,
    "ratios": ratios_suite,
    "reconstruct": reconstruct_suite,
    "mpc-fidelity": mpc_fidelity_suite,
    "mpc-resources": mpc_resources_suite,
    "sampling": sampling_suite,
}
