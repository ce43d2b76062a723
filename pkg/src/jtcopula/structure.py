"""Junction trees: representation, validation and structure search.

A :class:`JunctionTree` is a set of clusters (sorted tuples of variable ids)
plus tree edges between cluster positions. Each edge carries the separator
``K_a & K_b``. Structure search maximises the weight

    sum_K I(K) - sum_edges I(S_e)

over second-order trees (exactly, maximum spanning tree on pairwise mutual
information) and over third-order "cherry" trees (greedily, or exhaustively
for small ``n``).
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidStructure, SingleVariable, TooFewVariables
from .infotheory import multi_information, mutual_information_matrix
from .sdc import SdcTable, marginalize

__all__ = [
    "JunctionTree",
    "Violation",
    "ValidationReport",
    "validate",
    "kruskal",
    "chow_liu",
    "t_cherry_k3",
    "t_cherry_exact",
    "junction_tree_from_clusters",
    "random_junction_tree",
]


@dataclass(frozen=True)
class JunctionTree:
    """Clusters and cluster-tree edges; separators are derived per edge."""

    clusters: tuple
    edges: tuple = ()

    def __post_init__(self):
        clusters = tuple(tuple(sorted(int(v) for v in K)) for K in self.clusters)
        edges = tuple(tuple(sorted((int(a), int(b)))) for a, b in self.edges)
        object.__setattr__(self, "clusters", clusters)
        object.__setattr__(self, "edges", edges)

    @property
    def variables(self) -> frozenset:
        return frozenset(v for K in self.clusters for v in K)

    @property
    def separators(self) -> tuple:
        """Separator of every edge, in edge order (may be empty)."""
        out = []
        for a, b in self.edges:
            if 0 <= a < len(self.clusters) and 0 <= b < len(self.clusters):
                out.append(tuple(sorted(set(self.clusters[a]) & set(self.clusters[b]))))
            else:
                out.append(())
        return tuple(out)

    @property
    def separator_exponents(self) -> dict:
        """Distinct non-empty separator -> number of edges carrying it."""
        return dict(Counter(S for S in self.separators if S))

    @property
    def separator_multiplicities(self) -> dict:
        """Distinct non-empty separator ``S`` -> ``v_S``, the number of clusters containing ``S``."""
        out = {}
        for S in sorted(set(S for S in self.separators if S)):
            out[S] = sum(1 for K in self.clusters if set(S) <= set(K))
        return out

    @property
    def width(self) -> int:
        return max(len(K) for K in self.clusters)

    def neighbors(self) -> dict:
        adj = defaultdict(list)
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return {k: sorted(v, key=lambda c: self.clusters[c]) for k, v in adj.items()}

    def to_dict(self) -> dict:
        return {
            "clusters": [list(K) for K in self.clusters],
            "edges": [list(e) for e in self.edges],
            "separators": [list(S) for S in self.separators],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JunctionTree":
        return cls(tuple(tuple(K) for K in d["clusters"]), tuple(tuple(e) for e in d.get("edges", ())))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set:
        return {v.code for v in self.violations}

    def add(self, code, message):
        self.violations.append(Violation(code, message))

    def to_dict(self) -> dict:
        return {"valid": self.ok, "violations": [{"code": v.code, "message": v.message} for v in self.violations]}


def _components(nodes, edges):
    parent = {x: x for x in nodes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        parent[find(a)] = find(b)
    return len({find(x) for x in nodes})


def validate(jt: JunctionTree, n: int) -> ValidationReport:
    """Check every junction-tree invariant and list the violations found.

    Codes: ``cluster``, ``edge``, ``tree``, ``coverage``, ``subset-cluster``,
    ``rip`` (running intersection) and ``counting-lemma``.
    """
    report = ValidationReport()
    k = len(jt.clusters)
    if k == 0:
        report.add("cluster", "no clusters")
        return report
    for c, K in enumerate(jt.clusters):
        if not K:
            report.add("cluster", f"cluster {c} is empty")
        if len(set(K)) != len(K):
            report.add("cluster", f"cluster {c} repeats a variable")
        bad = [v for v in K if not 0 <= v < n]
        if bad:
            report.add("cluster", f"cluster {c} holds unknown variables {bad}")
    seen = set()
    good_edges = []
    for a, b in jt.edges:
        if not (0 <= a < k and 0 <= b < k):
            report.add("edge", f"edge ({a}, {b}) references a missing cluster")
            continue
        if a == b:
            report.add("edge", f"self-loop on cluster {a}")
            continue
        if (a, b) in seen:
            report.add("edge", f"duplicate edge ({a}, {b})")
            continue
        seen.add((a, b))
        good_edges.append((a, b))
    if len(jt.edges) != k - 1 or _components(range(k), good_edges) != 1:
        report.add("tree", f"{k} clusters with {len(jt.edges)} edges do not form a tree")
    missing = sorted(set(range(n)) - jt.variables)
    if missing:
        report.add("coverage", f"variables {missing} are in no cluster")
    sets = [set(K) for K in jt.clusters]
    for a, b in itertools.permutations(range(k), 2):
        if sets[a] <= sets[b] and (sets[a] != sets[b] or a < b):
            report.add("subset-cluster", f"cluster {jt.clusters[a]} is contained in cluster {jt.clusters[b]}")
    for v in sorted(jt.variables):
        holders = [c for c in range(k) if v in sets[c]]
        sub = [(a, b) for a, b in good_edges if v in sets[a] and v in sets[b]]
        if _components(holders, sub) != 1:
            report.add("rip", f"clusters containing variable {v} are not connected in the tree")
        if len(holders) != len(sub) + 1:
            report.add("counting-lemma",
                       f"variable {v}: {len(holders)} clusters but {len(sub)} separators")
    return report


class _DisjointSet:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y) -> bool:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return False
        if ry < rx:
            rx, ry = ry, rx
        self.parent[ry] = rx
        return True


def kruskal(vertices, weights: dict) -> list:
    """Maximum-weight spanning tree.

    ``weights`` maps ``(u, v)`` with ``u < v`` to a real weight. Equal
    weights are broken by the lexicographic order of ``(u, v)``. Returns the
    chosen edges sorted.
    """
    ds = _DisjointSet(vertices)
    chosen = []
    for (u, v), _ in sorted(weights.items(), key=lambda kv: (-kv[1], kv[0])):
        if ds.union(u, v):
            chosen.append((u, v))
            if len(chosen) == len(ds.parent) - 1:
                break
    return sorted(chosen)


def _pair_tree(pairs) -> JunctionTree:
    """Cluster tree for the edges of a spanning tree: clusters sharing a variable form a chain."""
    clusters = sorted(pairs)
    holders = defaultdict(list)
    for c, K in enumerate(clusters):
        for v in K:
            holders[v].append(c)
    edges = []
    for v in sorted(holders):
        chain = holders[v]
        edges.extend(zip(chain, chain[1:]))
    return JunctionTree(tuple(clusters), tuple(sorted(edges)))


def chow_liu(t: SdcTable) -> JunctionTree:
    """Second-order junction tree of maximum weight (maximum spanning tree on pairwise MI)."""
    if t.d < 2:
        raise SingleVariable("a second-order tree needs at least two variables")
    if t.d == 2:
        return JunctionTree((t.scope,), ())
    mi = mutual_information_matrix(t)
    weights = {(t.scope[a], t.scope[b]): mi[a, b] for a, b in itertools.combinations(range(t.d), 2)}
    return _pair_tree(kruskal(t.scope, weights))


class _InfoCache:
    def __init__(self, t):
        self.t = t
        self.memo = {}

    def __call__(self, vars_):
        key = tuple(sorted(vars_))
        if key not in self.memo:
            self.memo[key] = multi_information(marginalize(self.t, key))
        return self.memo[key]


def t_cherry_k3(t: SdcTable) -> JunctionTree:
    """Greedy third-order cherry junction tree.

    Seeds with the triple of largest multi-information, then repeatedly
    attaches the unused variable ``v`` to the pair ``(a, b)`` of an existing
    cluster that maximises ``I(a, b, v) - I(a, b)``. Ties are broken by
    ``(v, a, b, cluster position)``.
    """
    if t.d < 3:
        raise TooFewVariables("a third-order tree needs at least three variables")
    info = _InfoCache(t)
    seed = min(itertools.combinations(t.scope, 3), key=lambda tri: (-info(tri), tri))
    clusters = [seed]
    edges = []
    unused = sorted(set(t.scope) - set(seed))
    # pair -> first cluster holding it
    pairs = {p: 0 for p in itertools.combinations(seed, 2)}
    while unused:
        best = None
        for v in unused:
            for (a, b), c in pairs.items():
                gain = info((a, b, v)) - info((a, b))
                key = (-gain, v, a, b, c)
                if best is None or key < best:
                    best = key
        _, v, a, b, c = best
        new = tuple(sorted((a, b, v)))
        clusters.append(new)
        edges.append((c, len(clusters) - 1))
        for p in itertools.combinations(new, 2):
            pairs.setdefault(p, len(clusters) - 1)
        unused.remove(v)
    return JunctionTree(tuple(clusters), tuple(edges))


def t_cherry_exact(t: SdcTable, max_n: int = 7) -> JunctionTree:
    """Best third-order cherry tree by exhaustive search (``n <= max_n`` only)."""
    if t.d < 3:
        raise TooFewVariables("a third-order tree needs at least three variables")
    if t.d > max_n:
        raise InvalidStructure(f"exhaustive search is limited to n <= {max_n}, got n={t.d}")
    info = _InfoCache(t)
    everything = frozenset(t.scope)
    best = [-math.inf, None]
    seen = set()

    def grow(clusters, edges, weight, covered):
        key = frozenset(clusters)
        if key in seen:
            return
        seen.add(key)
        if covered == everything:
            if weight > best[0] + 1e-12 or (abs(weight - best[0]) <= 1e-12 and sorted(clusters) < sorted(best[1][0])):
                best[0] = weight
                best[1] = (list(clusters), list(edges))
            return
        for v in sorted(everything - covered):
            for c, K in enumerate(clusters):
                for a, b in itertools.combinations(K, 2):
                    new = tuple(sorted((a, b, v)))
                    grow(clusters + [new], edges + [(c, len(clusters))],
                         weight + info(new) - info((a, b)), covered | {v})

    for tri in itertools.combinations(t.scope, 3):
        grow([tri], [], info(tri), frozenset(tri))
    clusters, edges = best[1]
    return JunctionTree(tuple(clusters), tuple(edges))


def junction_tree_from_clusters(clusters) -> JunctionTree:
    """Connect clusters by a maximum spanning tree on intersection sizes.

    For the clique family of a chordal graph the result satisfies the
    running intersection property; use :func:`validate` to confirm.
    """
    clusters = [tuple(sorted(K)) for K in clusters]
    if len(clusters) == 1:
        return JunctionTree(tuple(clusters), ())
    weights = {(a, b): len(set(clusters[a]) & set(clusters[b]))
               for a, b in itertools.combinations(range(len(clusters)), 2)}
    return JunctionTree(tuple(clusters), tuple(kruskal(range(len(clusters)), weights)))


def random_junction_tree(n: int, rng: np.random.Generator, max_cluster: int = 4,
                         allow_empty_separators: bool = False) -> JunctionTree:
    """Random valid junction tree over variables ``0..n-1``.

    Clusters are grown one at a time: pick an existing cluster, keep a
    proper subset of it as the separator and add at least one fresh
    variable.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if max_cluster < 2 and n > 1 and not allow_empty_separators:
        raise ValueError("max_cluster must be >= 2 to connect clusters by non-empty separators")
    order = [int(v) for v in rng.permutation(n)]
    # without empty separators every cluster needs >= 2 variables to leave a proper non-empty subset
    lo_size = 1 if allow_empty_separators or n == 1 else 2
    size = int(rng.integers(lo_size, min(max_cluster, n) + 1))
    clusters = [tuple(order[:size])]
    edges = []
    pos = size
    while pos < n:
        c = int(rng.integers(len(clusters)))
        K = clusters[c]
        lo = 0 if allow_empty_separators else 1
        s = int(rng.integers(lo, len(K)))  # proper subset
        sep = [K[i] for i in rng.choice(len(K), size=s, replace=False)] if s else []
        fresh_max = min(max_cluster - s, n - pos)
        if fresh_max < 1:
            continue
        f = int(rng.integers(1, fresh_max + 1))
        clusters.append(tuple(sep) + tuple(order[pos:pos + f]))
        edges.append((c, len(clusters) - 1))
        pos += f
    return JunctionTree(tuple(clusters), tuple(edges))
