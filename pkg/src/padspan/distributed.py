"""Distributed approximate solving of network-design programs.

The solver samples many padded decompositions in parallel (all bundled into
one message stream), has every cluster center solve its restricted program,
broadcasts the solutions back, and caps a scaled per-edge average at one. The
averaged vector costs at most (1 + epsilon) times the global optimum, and it
is feasible whenever every demand source was padded often enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cp import CpInstance, evaluate_objective
from .decomposition import Clustering, PaddedParams, decide_round, sample_radius
from .localsim import NodeStep, RoundTranscript, rng_stream, run_protocol
from .lp import CpSolution, solve_cluster_cp


class ConfigError(ValueError):
    pass


class NoCertificateError(RuntimeError):
    """A demand source was never padded, so no averaged flow exists."""


@dataclass(frozen=True)
class SolverConfig:
    """Accuracy and iteration parameters of the distributed solver.

    `lam` is the padding parameter carved out of epsilon so the per-iteration
    padding probability covers the averaging loss; iterations(n) is the number
    of parallel decompositions. t_override pins the iteration count for
    small-scale experiments and tests.
    """

    epsilon: float
    seed: int
    t_override: int | None = None

    def __post_init__(self):
        if not (0 < self.epsilon < 1):
            raise ConfigError(
                f"epsilon must be in the open interval (0, 1), got {self.epsilon}"
            )

    @property
    def lam(self) -> float:
        e = self.epsilon
        return e * (1 - e) / ((2 - e) * (1 + e))

    def iterations(self, n: int) -> int:
        if self.t_override is not None:
            return self.t_override
        e = self.epsilon
        return max(1, math.ceil(16 * (1 - e / 2) * (1 + e) * math.log(n) / e**2))


def round_bound(config: SolverConfig, n: int, D: int) -> float:
    """Deterministic ceiling on the rounds any solver run may consume."""
    return 5 * ((2 * D / config.lam) * math.log(n) + D) + 10


@dataclass
class IterationRecord:
    """One decomposition iteration: partition, cluster solutions, bookkeeping.

    `padded[u]` says B(u, D) stayed inside u's cluster; `edge_same[e]` says
    both endpoints of e shared a cluster. padded[u] implies edge_same on
    every edge at u.
    """

    index: int
    clustering: Clustering
    solutions: dict[int, CpSolution]
    cluster_keys: dict[int, frozenset[int]]
    padded: np.ndarray
    edge_same: np.ndarray


@dataclass
class DistributedRun:
    solution: CpSolution
    transcript: RoundTranscript
    records: list[IterationRecord]
    config: SolverConfig


class _A2State:
    """Mutable per-node state threaded through all solver phases."""

    __slots__ = (
        "node", "radii", "accepted", "centers", "known", "known_dist",
        "downstream", "solutions",
    )

    def __init__(self, node: int, t: int):
        self.node = node
        self.radii = np.zeros(t)
        # per iteration: origin -> (hop distance, remaining budget, via neighbor)
        self.accepted: list[dict[int, tuple[int, int, int]]] = [
            dict() for _ in range(t)
        ]
        self.centers = np.zeros(t, dtype=np.int64)
        # probe: origin node -> its per-iteration cluster vector / hop distance
        self.known: dict[int, np.ndarray] = {}
        self.known_dist: dict[int, int] = {}
        # gather: (iteration, center) -> neighbors that route through us
        self.downstream: dict[tuple[int, int], list[int]] = {}
        # broadcast: iteration -> this node's cluster solution
        self.solutions: dict[int, CpSolution] = {}


def _dominated(accepted: dict[int, tuple[int, int, int]], origin: int,
               rem: int) -> bool:
    return any(o < origin and r >= rem for o, (_, r, _) in accepted.items())


def solve_distributed(
    instance: CpInstance,
    config: SolverConfig,
    transcript: RoundTranscript | None = None,
    lp_cache: dict | None = None,
) -> DistributedRun:
    """Run the full distributed solver on the LOCAL engine.

    Returns the capped averaged solution, the round transcript (phases:
    decomposition, gather incl. the padding probe, solve-broadcast), and one
    record per iteration for certificates and audits.

    `lp_cache` maps (member frozenset, demand tuple) to cluster solutions;
    passing a dict shares solves across iterations and with the caller (the
    whole-graph entry doubles as the oracle optimum). Caching only skips
    repeated node computation, which the model charges zero rounds anyway.
    """
    g = instance.graph
    n = g.n
    if transcript is None:
        transcript = RoundTranscript()
    if not instance.demands:
        return DistributedRun(
            CpSolution(np.zeros(g.m), {}, 0.0, "optimal", 0.0, ()),
            transcript, [], config,
        )
    D = instance.D
    t = config.iterations(n)
    params = PaddedParams(k=D, epsilon=config.lam, n=n)
    states = [_A2State(u, t) for u in range(n)]
    for u in range(n):
        st = states[u]
        for i in range(t):
            rng = rng_stream(config.seed, "decomp-radius", i, u)
            st.radii[i] = sample_radius(params, rng)
            st.accepted[i][u] = (0, int(math.floor(st.radii[i])), u)

    _phase_decomposition(g, params, states, t, transcript)
    _phase_probe(g, states, D, t, transcript)
    demands_at: dict[int, list[int]] = {}
    for di, d in enumerate(instance.demands):
        demands_at.setdefault(d.u, []).append(di)
    gathered = _phase_gather(g, params, states, t, demands_at, transcript)
    solutions, keys = _solve_clusters(instance, gathered, t, lp_cache)
    _phase_broadcast(g, params, states, t, solutions, transcript)
    return _assemble(instance, config, states, solutions, keys, t, transcript)


def _phase_decomposition(g, params, states, t, transcript) -> None:
    """All t carving floods bundled: one merged payload per edge per round."""
    r_decide = decide_round(params, g.n)

    def step(u: int, st: _A2State, inbox, rnd: int) -> NodeStep:
        outbox = []
        if rnd == 0:
            per_nbr: dict[int, list] = {}
            for i in range(t):
                b = int(math.floor(st.radii[i]))
                if b >= 1:
                    for w in g.shadow_adj[u]:
                        per_nbr.setdefault(w, []).append((i, u, b - 1))
            outbox = [(w, e, 3 * len(e)) for w, e in per_nbr.items()]
        elif inbox:
            fresh: list[tuple[int, int, int, int]] = []
            arrivals: list[tuple[int, int, int, int]] = []
            for src, entries in inbox:
                for i, origin, rem in entries:
                    arrivals.append((i, origin, rem, src))
            arrivals.sort()
            for i, origin, rem, src in arrivals:
                acc = st.accepted[i]
                if origin in acc or _dominated(acc, origin, rem):
                    continue
                acc[origin] = (rnd, rem, src)
                if rem >= 1:
                    fresh.append((i, origin, rem - 1, src))
            if fresh:
                per_nbr = {}
                for i, origin, rem, src in fresh:
                    for w in g.shadow_adj[u]:
                        if w != src:
                            per_nbr.setdefault(w, []).append((i, origin, rem))
                outbox = [(w, e, 3 * len(e)) for w, e in per_nbr.items()]
        if rnd >= r_decide:
            for i in range(t):
                st.centers[i] = min(st.accepted[i])
            return NodeStep(st, outbox, done=True)
        return NodeStep(st, outbox, done=False, wake=r_decide)

    run_protocol(g, step, states, max_rounds=r_decide + 2,
                 transcript=transcript, phase="decomposition")


def _phase_probe(g, states, D, t, transcript) -> None:
    """Every node learns the cluster vector of everyone within D hops."""

    def step(u: int, st: _A2State, inbox, rnd: int) -> NodeStep:
        forward: list[tuple[int, np.ndarray, int]] = []
        if rnd == 0:
            st.known[u] = st.centers
            st.known_dist[u] = 0
            if D >= 1:
                forward.append((u, st.centers, D - 1))
        else:
            for _, entries in inbox:
                for origin, vec, rem in entries:
                    if origin not in st.known:
                        st.known[origin] = vec
                        st.known_dist[origin] = rnd
                        if rem >= 1:
                            forward.append((origin, vec, rem - 1))
        outbox = []
        if forward:
            size = sum(2 + len(v) for _, v, _ in forward)
            outbox = [(w, forward, size) for w in g.shadow_adj[u]]
        return NodeStep(st, outbox, done=True)

    run_protocol(g, step, states, max_rounds=D + 1,
                 transcript=transcript, phase="gather")


def _phase_gather(g, params, states, t, demands_at, transcript):
    """Route per-iteration node reports to cluster centers along flood trees.

    A report names the node and, when its D-ball stayed inside the cluster,
    its resident demands. Intermediate nodes remember who routed through them
    so the broadcast can retrace the tree. Returns per (iteration, center)
    the member set and padded demand indices.
    """
    n = g.n
    r_gather = min(math.ceil(params.radius_cap), n - 1)
    gathered: list[dict[int, dict]] = [dict() for _ in range(t)]

    def accept(center: int, i: int, report) -> None:
        node, padded, dids = report
        bucket = gathered[i].setdefault(center, {"members": set(), "demands": []})
        bucket["members"].add(node)
        if padded:
            bucket["demands"].extend(dids)

    def step(u: int, st: _A2State, inbox, rnd: int) -> NodeStep:
        per_nbr: dict[int, list] = {}
        if rnd == 0:
            ball_nodes = list(st.known_dist)
            for i in range(t):
                c = int(st.centers[i])
                padded = all(int(st.known[w][i]) == c for w in ball_nodes)
                report = (u, padded,
                          tuple(demands_at.get(u, ())) if padded else ())
                if c == u:
                    accept(c, i, report)
                else:
                    nxt = st.accepted[i][c][2]
                    per_nbr.setdefault(nxt, []).append((i, c, report))
        else:
            for src, entries in inbox:
                for i, c, report in entries:
                    key = (i, c)
                    children = st.downstream.setdefault(key, [])
                    if src not in children:
                        children.append(src)
                    if c == u:
                        accept(c, i, report)
                    else:
                        nxt = st.accepted[i][c][2]
                        per_nbr.setdefault(nxt, []).append((i, c, report))
        outbox = [
            (w, entries, sum(5 + len(r[2]) for _, _, r in entries))
            for w, entries in per_nbr.items()
        ]
        return NodeStep(st, outbox, done=True)

    run_protocol(g, step, states, max_rounds=r_gather + 2,
                 transcript=transcript, phase="gather")
    return gathered


def _solve_clusters(instance, gathered, t, lp_cache=None):
    """Centers solve their cluster programs; identical member sets share one solve."""
    cache: dict[tuple, CpSolution] = {} if lp_cache is None else lp_cache
    solutions: list[dict[int, CpSolution]] = [dict() for _ in range(t)]
    keys: list[dict[int, frozenset[int]]] = [dict() for _ in range(t)]
    for i in range(t):
        for center, bucket in gathered[i].items():
            members = frozenset(bucket["members"])
            dids = tuple(sorted(set(bucket["demands"])))
            key = (members, dids)
            sol = cache.get(key)
            if sol is None:
                sol = solve_cluster_cp(instance, members, demand_indices=list(dids))
                cache[key] = sol
            solutions[i][center] = sol
            keys[i][center] = members
    return solutions, keys


def _phase_broadcast(g, params, states, t, solutions, transcript) -> None:
    """Send each cluster solution back down the recorded gather tree."""
    n = g.n
    r_bcast = min(math.ceil(params.radius_cap), n - 1)
    size_cache: dict[int, int] = {}

    def sol_size(sol: CpSolution) -> int:
        key = id(sol)
        if key not in size_cache:
            size_cache[key] = (
                int(np.count_nonzero(sol.x))
                + sum(len(f) for f in sol.flows.values()) + 2
            )
        return size_cache[key]

    def step(u: int, st: _A2State, inbox, rnd: int) -> NodeStep:
        per_nbr: dict[int, list] = {}
        if rnd == 0:
            # a center may itself belong to a smaller-id cluster, so it
            # broadcasts whatever it solved regardless of its own membership
            for i in range(t):
                if u in solutions[i]:
                    sol = solutions[i][u]
                    if int(st.centers[i]) == u:
                        st.solutions[i] = sol
                    for child in st.downstream.get((i, u), ()):
                        per_nbr.setdefault(child, []).append((i, u, sol))
        else:
            for _, entries in inbox:
                for i, c, sol in entries:
                    if int(st.centers[i]) == c:
                        st.solutions[i] = sol
                    for child in st.downstream.get((i, c), ()):
                        per_nbr.setdefault(child, []).append((i, c, sol))
        outbox = [
            (w, entries, sum(3 + sol_size(s) for _, _, s in entries))
            for w, entries in per_nbr.items()
        ]
        return NodeStep(st, outbox, done=True)

    run_protocol(g, step, states, max_rounds=r_bcast + 2,
                 transcript=transcript, phase="solve-broadcast")


def _assemble(instance, config, states, solutions, keys, t,
              transcript) -> DistributedRun:
    """Cap-averaged edge vector, endpoint consistency check, and records."""
    g = instance.graph
    n = g.n
    eps = config.epsilon
    centers_mat = np.stack([st.centers for st in states])  # (n, t)
    xt = np.zeros(g.m)
    for e, (u, v) in enumerate(g.edges):
        same = np.nonzero(centers_mat[u] == centers_mat[v])[0]
        total_u = 0.0
        total_v = 0.0
        for i in same:
            sol_u = states[u].solutions.get(int(i))
            sol_v = states[v].solutions.get(int(i))
            if sol_u is None or sol_v is None:
                raise RuntimeError(f"missing broadcast solution at edge {e}")
            total_u += sol_u.x[e]
            total_v += sol_v.x[e]
        # both endpoints evaluate the same rule from their own received data
        val_u = min(1.0, (1 + eps) / t * total_u)
        val_v = min(1.0, (1 + eps) / t * total_v)
        if abs(val_u - val_v) > 1e-12:
            raise RuntimeError(
                f"endpoint disagreement on edge {e}: {val_u} vs {val_v}"
            )
        xt[e] = val_u

    dist = g.distance_matrix()
    D = instance.D
    records = []
    for i in range(t):
        assign = centers_mat[:, i].copy()
        clustering = Clustering(
            assignment=assign,
            centers={int(c): int(c) for c in np.unique(assign)},
            radii=np.array([st.radii[i] for st in states]),
            pi_rank=np.arange(n),
        )
        padded = np.zeros(n, dtype=bool)
        for u in range(n):
            members = assign[np.asarray(dist[u] <= D).nonzero()[0]]
            padded[u] = bool(np.all(members == assign[u]))
        edge_same = np.array(
            [assign[u] == assign[v] for u, v in g.edges], dtype=bool
        )
        for e, (u, v) in enumerate(g.edges):
            if padded[u] and not edge_same[e]:
                raise RuntimeError(f"padding bookkeeping violated at edge {e}")
        records.append(IterationRecord(
            index=i, clustering=clustering, solutions=solutions[i],
            cluster_keys=keys[i], padded=padded, edge_same=edge_same,
        ))

    value = evaluate_objective(instance.objective, xt, g)
    solution = CpSolution(
        x=xt, flows={}, value=value, status="optimal", residual=0.0,
        demand_indices=tuple(range(len(instance.demands))),
    )
    return DistributedRun(solution, transcript, records, config)


def cached_global_oracle(instance: CpInstance, lp_cache: dict,
                         tol: float = 1e-9) -> CpSolution:
    """Whole-graph optimum, reusing the solver's cache entry when present."""
    key = (
        frozenset(range(instance.graph.n)),
        tuple(range(len(instance.demands))),
    )
    sol = lp_cache.get(key)
    if sol is None:
        sol = solve_cluster_cp(
            instance, range(instance.graph.n), tol=tol,
            demand_indices=list(key[1]),
        )
        lp_cache[key] = sol
    return sol


# -- certificates ----------------------------------------------------------


def implied_flow(run: DistributedRun, instance: CpInstance,
                 demand_index: int) -> np.ndarray:
    """Averaged path-flow certificate for one demand.

    Averages the demand's cluster flows over the iterations where the source
    ball was padded; the total is always at least one unit, and the vector
    respects the capped averaged capacities whenever the padded-iteration
    count clears t/(1+epsilon).
    """
    d = instance.demands[demand_index]
    contributions = []
    for rec in run.records:
        if not rec.padded[d.u]:
            continue
        sol = rec.solutions.get(rec.clustering.cluster_of(d.u))
        if sol is None or demand_index not in sol.flows:
            raise NoCertificateError(
                f"iteration {rec.index} padded node {d.u} but carries no flow "
                f"for demand {demand_index}"
            )
        contributions.append(sol.flows[demand_index])
    if not contributions:
        raise NoCertificateError(
            f"demand {demand_index}: source {d.u} was never padded"
        )
    return np.mean(np.stack(contributions), axis=0)


@dataclass
class ConcentrationReport:
    counts: dict[int, int]
    threshold: float
    passed: dict[int, bool]

    @property
    def all_pass(self) -> bool:
        return all(self.passed.values())

    @property
    def pass_fraction(self) -> float:
        if not self.passed:
            return 1.0
        return sum(self.passed.values()) / len(self.passed)


def concentration_report(run: DistributedRun,
                         instance: CpInstance) -> ConcentrationReport:
    """Per demand source: padded in more than t/(1+epsilon) iterations?"""
    t = len(run.records)
    threshold = t / (1 + run.config.epsilon)
    sources = sorted({d.u for d in instance.demands})
    counts = {u: int(sum(rec.padded[u] for rec in run.records)) for u in sources}
    passed = {u: counts[u] > threshold for u in sources}
    return ConcentrationReport(counts=counts, threshold=threshold, passed=passed)
