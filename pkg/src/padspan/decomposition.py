"""Sampling padded decompositions: ball-carving partitions whose clusters have
bounded diameter and which keep each radius-k ball intact with probability at
least 1 - epsilon.

Two samplers are provided: a vectorized centralized reference, and a
message-passing protocol on the LOCAL engine whose output matches the
centralized sampler exactly when the permutation is node-ID order and the
radius draws share one seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphs import Graph
from .localsim import NodeStep, RoundTranscript, rng_stream, run_protocol


class DecompositionError(ValueError):
    """Invalid parameters or a clustering violating its invariants."""


@dataclass(frozen=True)
class PaddedParams:
    """Parameters of a (k, epsilon)-padded decomposition on an n-node graph.

    The carving radius is r = 2k/epsilon and every chosen radius is capped at
    r*ln(n) + k.
    """

    k: float
    epsilon: float
    n: int

    def __post_init__(self):
        if self.k < 0:
            raise DecompositionError(f"k must be nonnegative, got {self.k}")
        if not (0 < self.epsilon <= 1):
            raise DecompositionError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.n < 1:
            raise DecompositionError(f"n must be positive, got {self.n}")

    @property
    def r(self) -> float:
        return (2.0 / self.epsilon) * self.k

    @property
    def radius_cap(self) -> float:
        return self.r * math.log(self.n) + self.k


def sample_radius(
    params: PaddedParams, rng: np.random.Generator, n: int | None = None
) -> float:
    """Draw one carving radius by inverse CDF.

    The density (n/(n-1)) * exp(-z/r) / r on [0, r ln n] inverts to
    z = -r * ln(1 - u*(n-1)/n) for uniform u in [0, 1); the result is then
    clamped at the radius cap.
    """
    if n is None:
        n = params.n
    if n < 2:
        raise DecompositionError(f"radius sampling needs n >= 2, got {n}")
    if params.k == 0:
        return 0.0
    u = rng.random()
    z = -params.r * math.log1p(-u * (n - 1) / n)
    return min(z, params.r * math.log(n) + params.k)


@dataclass
class Clustering:
    """A partition of nodes with per-cluster centers and carving radii.

    Cluster ids are the center node indices. `pi_rank[v]` is the position of
    node v in the permutation that carved this clustering.
    """

    assignment: np.ndarray
    centers: dict[int, int]
    radii: np.ndarray
    pi_rank: np.ndarray

    def clusters(self) -> dict[int, list[int]]:
        """Cluster id -> sorted member list."""
        out: dict[int, list[int]] = {}
        for u, c in enumerate(self.assignment):
            out.setdefault(int(c), []).append(u)
        return out

    def cluster_of(self, u: int) -> int:
        return int(self.assignment[u])


def _assign(g: Graph, radii: np.ndarray, pi_order: np.ndarray) -> np.ndarray:
    """Each node joins the permutation-earliest center whose radius reaches it."""
    dist = g.distance_matrix()
    # eligible[v, u]: node u is within v's carving radius
    eligible = dist <= radii[:, None]
    ordered = eligible[pi_order]
    first_rank = np.argmax(ordered, axis=0)
    return pi_order[first_rank].astype(np.int64)


def sample_decomposition_centralized(
    g: Graph,
    params: PaddedParams,
    seed: int,
    iteration: int = 0,
    permutation: str = "random",
) -> Clustering:
    """Sample one padded decomposition with the centralized reference sampler.

    `permutation` is either "random" (seeded Fisher-Yates) or "ids"
    (ascending node index, matching the distributed protocol). Radii are
    drawn from per-node streams keyed by (seed, iteration, node), identical
    to the draws the distributed protocol makes.
    """
    n = g.n
    if n == 1:
        return Clustering(
            assignment=np.zeros(1, dtype=np.int64), centers={0: 0},
            radii=np.zeros(1), pi_rank=np.zeros(1, dtype=np.int64),
        )
    radii = np.array(
        [
            sample_radius(params, rng_stream(seed, "decomp-radius", iteration, v))
            for v in range(n)
        ]
    )
    if permutation == "random":
        pi_order = rng_stream(seed, "decomp-perm", iteration).permutation(n)
    elif permutation == "ids":
        pi_order = np.arange(n)
    else:
        raise DecompositionError(f"unknown permutation source {permutation!r}")
    assignment = _assign(g, radii, pi_order)
    pi_rank = np.empty(n, dtype=np.int64)
    pi_rank[pi_order] = np.arange(n)
    centers = {int(c): int(c) for c in np.unique(assignment)}
    return Clustering(assignment=assignment, centers=centers, radii=radii,
                      pi_rank=pi_rank)


# -- distributed sampler -------------------------------------------------


@dataclass
class _FloodState:
    """Per-node flood bookkeeping for the decomposition protocol."""

    budget: int
    # origin -> (hop distance, remaining budget, delivering neighbor)
    accepted: dict[int, tuple[int, int, int]]
    center: int | None = None


def _dominated(accepted: dict[int, tuple[int, int, int]], origin: int,
               budget: int) -> bool:
    """An entry loses to any accepted smaller-id origin with >= budget left."""
    return any(
        o < origin and rem >= budget for o, (_, rem, _) in accepted.items()
    )


def decide_round(params: PaddedParams, n: int) -> int:
    """Round at which every flood has certainly arrived.

    Budgets never exceed the radius cap and hop distances never exceed n-1;
    nodes know n, so they can decide at the smaller of the two.
    """
    return min(math.ceil(params.radius_cap), n - 1)


def sample_decomposition_distributed(
    g: Graph,
    params: PaddedParams,
    seed: int,
    iteration: int = 0,
    transcript: RoundTranscript | None = None,
) -> tuple[Clustering, RoundTranscript]:
    """Sample a padded decomposition with the LOCAL flood protocol.

    Every node draws its radius, floods (id, hop budget) outward, and after
    the decide round adopts the smallest node id whose flood reached it. The
    permutation is therefore ascending node id; output equals the centralized
    sampler run with permutation="ids" and the same seed/iteration.
    """
    n = g.n
    if n == 1:
        clustering = sample_decomposition_centralized(
            g, params, seed, iteration, permutation="ids"
        )
        if transcript is None:
            transcript = RoundTranscript()
        transcript.charge("decomposition", 0)
        return clustering, transcript
    r_decide = decide_round(params, n)
    radii = np.empty(n)
    states = []
    for u in range(n):
        rng = rng_stream(seed, "decomp-radius", iteration, u)
        radii[u] = sample_radius(params, rng)
        states.append(
            _FloodState(budget=int(math.floor(radii[u])),
                        accepted={u: (0, int(math.floor(radii[u])), u)})
        )

    def step(u: int, state: _FloodState, inbox, rnd: int) -> NodeStep:
        outbox = []
        if rnd == 0:
            if state.budget >= 1:
                entry = [(u, state.budget - 1)]
                outbox = [(w, entry, 3) for w in g.shadow_adj[u]]
        else:
            fresh: list[tuple[int, int]] = []
            arrivals = []
            for src, entries in inbox:
                for origin, rem in entries:
                    arrivals.append((origin, rem, src))
            arrivals.sort()
            for origin, rem, src in arrivals:
                if origin in state.accepted:
                    continue
                if _dominated(state.accepted, origin, rem):
                    continue
                state.accepted[origin] = (rnd, rem, src)
                if rem >= 1:
                    fresh.append((origin, rem - 1, src))
            if fresh:
                for w in g.shadow_adj[u]:
                    entries = [(o, b) for o, b, src in fresh if src != w]
                    if entries:
                        outbox.append((w, entries, 2 * len(entries) + 1))
        if rnd >= r_decide:
            state.center = min(state.accepted)
            return NodeStep(state, outbox, done=True)
        return NodeStep(state, outbox, done=False, wake=r_decide)

    final, transcript = run_protocol(
        g, step, states, max_rounds=r_decide + 2,
        transcript=transcript, phase="decomposition",
    )
    assignment = np.array([s.center for s in final], dtype=np.int64)
    centers = {int(c): int(c) for c in np.unique(assignment)}
    clustering = Clustering(
        assignment=assignment, centers=centers, radii=radii,
        pi_rank=np.arange(n),
    )
    return clustering, transcript


# -- batch Monte Carlo sampling -------------------------------------------


def sample_assignments_batch(
    g: Graph,
    params: PaddedParams,
    seed: int,
    count: int,
    permutation: str = "random",
) -> np.ndarray:
    """Sample `count` clusterings at once; returns a (count, n) assignment array.

    Draws the same radius distribution as the per-node streams but from one
    batch stream, so it is the right tool for Monte Carlo statistics, not for
    matching the distributed protocol draw-for-draw. Every sampled clustering
    is checked against the 2x radius-cap diameter bound.
    """
    n = g.n
    rng = rng_stream(seed, "decomp-batch")
    u = rng.random((count, n))
    if params.k == 0:
        radii = np.zeros((count, n))
    else:
        z = -params.r * np.log1p(-u * (n - 1) / n)
        radii = np.minimum(z, params.radius_cap)
    dist = g.distance_matrix()
    out = np.empty((count, n), dtype=np.int64)
    cap2 = 2 * params.radius_cap
    for s in range(count):
        if permutation == "random":
            pi_order = rng.permutation(n)
        else:
            pi_order = np.arange(n)
        assign = _assign(g, radii[s], pi_order)
        same = assign[:, None] == assign[None, :]
        finite = dist < np.int64(2**39)
        diam = (dist * (same & finite)).max() if n > 1 else 0
        if diam > cap2:
            raise DecompositionError(
                f"sample {s}: cluster diameter {diam} exceeds {cap2}"
            )
        out[s] = assign
    return out


def padded_frequencies(g: Graph, assignments: np.ndarray, k: float) -> np.ndarray:
    """Per-node fraction of clusterings keeping B(u, k) in one cluster."""
    dist = g.distance_matrix()
    ball_mask = dist <= k  # (n, n)
    count = assignments.shape[0]
    freqs = np.zeros(g.n)
    big = np.int64(2**62)
    for s in range(count):
        assign = assignments[s]
        lo = np.where(ball_mask, assign[None, :], big).min(axis=1)
        hi = np.where(ball_mask, assign[None, :], -1).max(axis=1)
        freqs += lo == hi
    return freqs / count


# -- invariant checks and serialization ----------------------------------


def validate_clustering(
    g: Graph, params: PaddedParams, clustering: Clustering
) -> None:
    """Assert partition totality, center distance, and diameter invariants."""
    n = g.n
    if clustering.assignment.shape != (n,):
        raise DecompositionError("assignment is not total")
    dist = g.distance_matrix()
    cap = params.radius_cap
    for u in range(n):
        c = clustering.cluster_of(u)
        r_c = clustering.radii[c]
        if not (dist[c, u] <= r_c <= cap + 1e-12):
            raise DecompositionError(
                f"node {u}: d(center {c}, u)={dist[c, u]} vs radius {r_c}"
            )
    for c, members in clustering.clusters().items():
        idx = np.array(members)
        d_max = dist[np.ix_(idx, idx)].max()
        if d_max > 2 * cap:
            raise DecompositionError(
                f"cluster {c} has hop diameter {d_max} > {2 * cap}"
            )


def cluster_diameters(g: Graph, clustering: Clustering) -> dict[int, int]:
    """Hop diameter of each cluster, measured in the communication graph."""
    dist = g.distance_matrix()
    out = {}
    for c, members in clustering.clusters().items():
        idx = np.array(members)
        out[c] = int(dist[np.ix_(idx, idx)].max())
    return out


def padded_nodes(g: Graph, clustering: Clustering, k: float) -> np.ndarray:
    """Boolean vector: is B(u, k) contained in u's cluster, for every u."""
    dist = g.distance_matrix()
    assign = clustering.assignment
    out = np.empty(g.n, dtype=bool)
    for u in range(g.n):
        members = assign[np.asarray(dist[u] <= k).nonzero()[0]]
        out[u] = bool(np.all(members == assign[u]))
    return out


CLUSTERING_CSV_HEADER = "node,cluster_id,center,r_v"


def clustering_csv(clustering: Clustering) -> str:
    """Serialize as CSV: one row per node."""
    lines = [CLUSTERING_CSV_HEADER]
    for u, c in enumerate(clustering.assignment):
        lines.append(f"{u},{int(c)},{clustering.centers[int(c)]},"
                     f"{float(clustering.radii[u])!r}")
    return "\n".join(lines) + "\n"
