"""Distance-bounded network-design program instances.

An instance couples demand pairs with explicit families of allowed directed
paths (length-bounded, simple) and a partition-friendly objective over edge
vectors. Objectives decompose across any node partition through a combiner
whenever the vector is zero on cross-cluster edges.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, as_edge_vector, directed_distances_from, read_graph, write_graph

DEFAULT_PATH_CAP = 100_000


class InstanceError(ValueError):
    """Malformed demand, path family, or objective."""


class InfeasibleDemandError(InstanceError):
    """A demand's length bound is below the directed distance."""


# -- path enumeration ----------------------------------------------------


def enumerate_paths(
    g: Graph, u: int, v: int, max_len: int, cap: int = DEFAULT_PATH_CAP
) -> list[tuple[int, ...]]:
    """All simple directed u->v paths with at most `max_len` edges.

    Output is in lexicographic node-sequence order (DFS over ascending
    adjacency). Returns [] when no path exists; raises InstanceError when the
    family would exceed `cap` paths.
    """
    g.check_node(u)
    g.check_node(v)
    if max_len < 1:
        raise InstanceError(f"max_len must be >= 1, got {max_len}")
    paths: list[tuple[int, ...]] = []
    prefix = [u]
    on_path = {u}

    def dfs(node: int) -> None:
        if node == v and len(prefix) > 1:
            paths.append(tuple(prefix))
            if len(paths) > cap:
                raise InstanceError(
                    f"path family for ({u},{v}) exceeds cap {cap}"
                )
            return
        if len(prefix) > max_len:
            return
        for w in g.out_adj[node]:
            if w in on_path:
                continue
            prefix.append(w)
            on_path.add(w)
            dfs(w)
            prefix.pop()
            on_path.remove(w)

    dfs(u)
    return paths


def path_edge_indices(g: Graph, path: tuple[int, ...]) -> tuple[int, ...]:
    """Edge indices along a node sequence; raises if a hop is not an edge."""
    idx = []
    for a, b in zip(path[:-1], path[1:]):
        e = g.edge_index.get((a, b))
        if e is None and not g.directed:
            e = g.edge_index.get((b, a))
        if e is None:
            raise InstanceError(f"path hop ({a},{b}) is not a graph edge")
        idx.append(e)
    return tuple(idx)


# -- objectives ----------------------------------------------------------


def fractional_degrees(g: Graph, x: np.ndarray, mode: str = "inout") -> np.ndarray:
    """Per-node fractional degree under an edge vector."""
    deg = np.zeros(g.n)
    us = np.fromiter((e[0] for e in g.edges), dtype=np.int64, count=g.m)
    vs = np.fromiter((e[1] for e in g.edges), dtype=np.int64, count=g.m)
    if mode in ("out", "inout"):
        np.add.at(deg, us, x)
    if mode in ("in", "inout"):
        np.add.at(deg, vs, x)
    return deg


@dataclass(frozen=True)
class Objective:
    """Nondecreasing convex objective with a per-partition combiner.

    Kinds: "linear-sum" (combiner: sum), "max-degree" over fractional node
    degrees (combiner: max; degree_mode picks out/in/in+out), and "p-norm"
    with p >= 1 or inf (combiner: the same norm).
    """

    kind: str
    p: float = 0.0
    degree_mode: str = "inout"

    def __post_init__(self):
        if self.kind not in ("linear-sum", "max-degree", "p-norm"):
            raise InstanceError(f"unknown objective kind {self.kind!r}")
        if self.kind == "p-norm" and not (self.p >= 1):
            raise InstanceError(f"p-norm needs p >= 1, got {self.p}")
        if self.degree_mode not in ("out", "in", "inout"):
            raise InstanceError(f"unknown degree mode {self.degree_mode!r}")

    def label(self) -> str:
        if self.kind == "max-degree":
            return f"max-degree:{self.degree_mode}"
        if self.kind == "p-norm":
            p_str = "inf" if math.isinf(self.p) else f"{self.p:g}"
            return f"p-norm:{p_str}"
        return self.kind


def linear_sum() -> Objective:
    return Objective("linear-sum")


def max_degree(mode: str = "inout") -> Objective:
    return Objective("max-degree", degree_mode=mode)


def p_norm(p: float) -> Objective:
    return Objective("p-norm", p=float(p))


def objective_from_label(label: str) -> Objective:
    """Inverse of Objective.label()."""
    if label == "linear-sum":
        return linear_sum()
    if label.startswith("max-degree"):
        _, _, mode = label.partition(":")
        return max_degree(mode or "inout")
    if label.startswith("p-norm"):
        _, _, p = label.partition(":")
        return p_norm(float(p))
    raise InstanceError(f"unknown objective label {label!r}")


def evaluate_objective(obj: Objective, x, g: Graph) -> float:
    """Objective value of a nonnegative edge vector."""
    x = as_edge_vector(g, x)
    if obj.kind == "linear-sum":
        return float(np.sum(x))
    if obj.kind == "max-degree":
        deg = fractional_degrees(g, x, obj.degree_mode)
        return float(deg.max()) if g.n else 0.0
    if math.isinf(obj.p):
        return float(x.max()) if x.size else 0.0
    return float(np.sum(x**obj.p) ** (1.0 / obj.p))


def combiner_value(obj: Objective, cluster_values) -> float:
    """Combine per-cluster objective values into the global value."""
    vals = np.asarray(list(cluster_values), dtype=float)
    if np.any(vals < 0):
        raise InstanceError("combiner values must be nonnegative")
    if vals.size == 0:
        return 0.0
    if obj.kind == "linear-sum":
        return float(vals.sum())
    if obj.kind == "max-degree":
        return float(vals.max())
    if math.isinf(obj.p):
        return float(vals.max())
    return float(np.sum(vals**obj.p) ** (1.0 / obj.p))


# -- instances -----------------------------------------------------------


@dataclass(frozen=True)
class Demand:
    """Ordered pair with a per-pair path length bound."""

    u: int
    v: int
    bound: int


@dataclass
class CpInstance:
    """Graph, demands, allowed-path families, and objective.

    `families[i]` lists the allowed paths of demand i as node tuples, and
    `family_edges[i]` the matching edge-index tuples. D is the length of the
    longest allowed path across all demands.
    """

    graph: Graph
    demands: tuple[Demand, ...]
    families: tuple[tuple[tuple[int, ...], ...], ...]
    objective: Objective
    family_edges: tuple[tuple[tuple[int, ...], ...], ...] = field(repr=False, default=())
    spanning: bool = False

    def __post_init__(self):
        if not self.family_edges:
            self.family_edges = tuple(
                tuple(path_edge_indices(self.graph, p) for p in fam)
                for fam in self.families
            )
        self._validate()

    def _validate(self) -> None:
        g = self.graph
        if len(self.families) != len(self.demands):
            raise InstanceError("one path family required per demand")
        for d, fam in zip(self.demands, self.families):
            g.check_node(d.u)
            g.check_node(d.v)
            if d.u == d.v:
                raise InstanceError(f"degenerate demand ({d.u},{d.v})")
            if not fam:
                raise InfeasibleDemandError(
                    f"demand ({d.u},{d.v}) has no allowed path within bound {d.bound}"
                )
            for p in fam:
                if p[0] != d.u or p[-1] != d.v:
                    raise InstanceError(f"path {p} does not join ({d.u},{d.v})")
                if len(set(p)) != len(p):
                    raise InstanceError(f"path {p} is not simple")
                if len(p) - 1 > d.bound:
                    raise InstanceError(
                        f"path {p} longer than bound {d.bound} for ({d.u},{d.v})"
                    )

    @property
    def D(self) -> int:
        """Longest allowed path length over every demand (0 if no demands)."""
        return max(
            (len(p) - 1 for fam in self.families for p in fam), default=0
        )

    def endpoints(self) -> set[int]:
        out: set[int] = set()
        for d in self.demands:
            out.add(d.u)
            out.add(d.v)
        return out


def build_spanner_instance(
    g: Graph,
    k: int,
    objective: Objective | None = None,
    cap: int = DEFAULT_PATH_CAP,
) -> CpInstance:
    """Stretch-k spanner relaxation: one demand per edge, detours up to k hops."""
    if k < 1:
        raise InstanceError(f"stretch must be >= 1, got {k}")
    if objective is None:
        objective = linear_sum()
    demands = tuple(Demand(u, v, k) for u, v in g.edges)
    families = tuple(
        tuple(enumerate_paths(g, u, v, k, cap=cap)) for u, v in g.edges
    )
    spanning = _is_spanning(g.n, demands)
    return CpInstance(g, demands, families, objective, spanning=spanning)


def build_dsn_instance(
    g: Graph,
    demands: list[tuple[int, int, int]],
    objective: Objective | None = None,
    cap: int = DEFAULT_PATH_CAP,
) -> CpInstance:
    """Steiner-network instance with per-demand distance bounds.

    Each demand (u, v, L) requires a directed u->v path of at most L edges;
    a bound below the directed distance raises InfeasibleDemandError. The
    spanning flag records whether every node is some demand's endpoint.
    """
    if objective is None:
        objective = linear_sum()
    dms = []
    fams = []
    for u, v, bound in demands:
        g.check_node(u)
        g.check_node(v)
        if u == v:
            raise InstanceError(f"degenerate demand ({u},{v})")
        dist = directed_distances_from(g, u)
        if dist[v] > bound:
            raise InfeasibleDemandError(
                f"demand ({u},{v}) unreachable within bound {bound} "
                f"(directed distance {'inf' if dist[v] >= 2**40 else int(dist[v])})"
            )
        dms.append(Demand(u, v, int(bound)))
        fams.append(tuple(enumerate_paths(g, u, v, int(bound), cap=cap)))
    dms_t = tuple(dms)
    return CpInstance(
        g, dms_t, tuple(fams), objective, spanning=_is_spanning(g.n, dms_t)
    )


def _is_spanning(n: int, demands: tuple[Demand, ...]) -> bool:
    touched: set[int] = set()
    for d in demands:
        touched.add(d.u)
        touched.add(d.v)
    return touched == set(range(n))


# -- instance files ------------------------------------------------------


def write_instance(instance: CpInstance, path: str, graph_filename: str | None = None) -> None:
    """Write the instance as structured text plus a graph file next to it.

    The serialization is canonical: reading it back re-enumerates the same
    path families in the same order.
    """
    base = os.path.dirname(os.path.abspath(path))
    if graph_filename is None:
        graph_filename = os.path.basename(path) + ".graph"
    write_graph(instance.graph, os.path.join(base, graph_filename))
    lines = [
        "padspan-instance v1",
        f"graph {graph_filename}",
        f"objective {instance.objective.label()}",
        f"spanning {int(instance.spanning)}",
        f"demands {len(instance.demands)}",
    ]
    lines.extend(f"{d.u} {d.v} {d.bound}" for d in instance.demands)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_instance(path: str, cap: int = DEFAULT_PATH_CAP) -> CpInstance:
    """Parse an instance file written by :func:`write_instance`."""
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "padspan-instance v1":
        raise InstanceError(f"{path}: not a padspan instance file")
    head = dict(ln.split(None, 1) for ln in lines[1:5])
    g = read_graph(os.path.join(base, head["graph"]))
    objective = objective_from_label(head["objective"])
    count = int(head["demands"])
    demand_rows = lines[5 : 5 + count]
    if len(demand_rows) != count:
        raise InstanceError(f"{path}: expected {count} demand rows")
    triples = [tuple(int(t) for t in row.split()) for row in demand_rows]
    inst = build_dsn_instance(g, triples, objective, cap=cap)
    if inst.spanning != bool(int(head["spanning"])):
        raise InstanceError(f"{path}: spanning flag mismatch")
    return inst
