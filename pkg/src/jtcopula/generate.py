"""Synthetic data with known dependence structure.

Three families:

* ``independent``: i.i.d. uniform columns.
* ``gaussian-tree``: Gaussian variables linked along a tree,
  ``x_child = rho * x_parent + sqrt(1 - rho^2) * noise``.
* ``factorized``: an exact discrete law that factorizes over a given
  junction tree, with uniform univariate margins (see
  :func:`factorized_table`); rows are drawn from it and jittered inside
  their bins.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import BadSpec
from .sdc import SdcTable
from .structure import JunctionTree, validate
from .tabular import SampleMatrix, TransformedSample

__all__ = [
    "FAMILIES",
    "independent",
    "gaussian_tree",
    "tree_edges",
    "random_uniform_tree",
    "factorized_table",
    "sample_table",
    "factorized_sample",
]

FAMILIES = ("independent", "gaussian-tree", "factorized")


def _names(n):
    return tuple(f"x{i}" for i in range(n))


def independent(n: int, N: int, rng: np.random.Generator) -> SampleMatrix:
    return SampleMatrix(rng.random((N, n)), _names(n))


def tree_edges(n: int, shape: str = "chain", rng: np.random.Generator | None = None) -> list:
    """Edges ``(parent, child)`` of a tree on ``0..n-1``, parents before children."""
    if shape == "chain":
        return [(i, i + 1) for i in range(n - 1)]
    if shape == "star":
        return [(0, i) for i in range(1, n)]
    if shape == "random":
        if rng is None:
            raise BadSpec("random tree shape needs a generator")
        return [(int(rng.integers(i)), i) for i in range(1, n)]
    raise BadSpec(f"unknown tree shape {shape!r}")


def gaussian_tree(n: int, N: int, rho: float, rng: np.random.Generator, edges=None) -> SampleMatrix:
    if not -1 < rho < 1:
        raise BadSpec("rho must lie in (-1, 1)")
    edges = tree_edges(n) if edges is None else [tuple(e) for e in edges]
    parent = {}
    for a, b in edges:
        if b in parent or not (0 <= a < n and 0 <= b < n) or a == b:
            raise BadSpec(f"edges {edges} do not describe a rooted tree on {n} variables")
        parent[b] = a
    roots = [v for v in range(n) if v not in parent]
    if len(roots) != 1:
        raise BadSpec(f"edges {edges} leave {len(roots)} roots")
    x = np.empty((N, n))
    done, active = set(), set()
    noise = rng.standard_normal((N, n))
    scale = math.sqrt(1 - rho * rho)

    def fill(v):
        if v in done:
            return
        if v in active:
            raise BadSpec(f"edges {edges} contain a cycle")
        active.add(v)
        if v in parent:
            fill(parent[v])
            x[:, v] = rho * x[:, parent[v]] + scale * noise[:, v]
        else:
            x[:, v] = noise[:, v]
        done.add(v)

    if len(parent) != n - 1:
        raise BadSpec("a tree on n variables has n - 1 edges")
    for v in range(n):
        fill(v)
    return SampleMatrix(x, _names(n))


def random_uniform_tree(n: int, k: int, rng: np.random.Generator) -> JunctionTree:
    """Random junction tree whose clusters all have ``k`` variables and separators ``k - 1``."""
    if n < k or k < 2:
        raise BadSpec(f"need n >= k >= 2, got n={n}, k={k}")
    order = [int(v) for v in rng.permutation(n)]
    clusters = [tuple(sorted(order[:k]))]
    edges = []
    for v in order[k:]:
        c = int(rng.integers(len(clusters)))
        K = clusters[c]
        drop = int(rng.integers(k))
        sep = K[:drop] + K[drop + 1:]
        clusters.append(tuple(sorted(sep + (v,))))
        edges.append((c, len(clusters) - 1))
    return JunctionTree(tuple(clusters), tuple(edges))


def _bistochastic(m, a, rng):
    q = np.zeros((m, m), dtype=np.int64)
    for _ in range(a):
        q[np.arange(m), rng.permutation(m)] += 1
    return q


def factorized_table(jt: JunctionTree, m: int, rng: np.random.Generator, a: int = 2) -> SdcTable:
    """Exact integer-count table that factorizes over ``jt`` and has uniform margins.

    Clusters are visited breadth-first from cluster 0. A variable with no
    previously placed variable in its cluster is uniform; otherwise, given
    the placed variables ``P`` of its cluster,

        p(x | P) = mean over p in P of Q_p[x_p, x] / a

    where each ``Q_p`` is a sum of ``a`` random ``m x m`` permutation
    matrices. Smaller ``a`` means stronger dependence.
    """
    n = len(jt.variables)
    report = validate(jt, n)
    if not report.ok:
        raise BadSpec(f"invalid structure: {report.violations[0].message}")
    if a < 1 or m < 1:
        raise BadSpec("a and m must be positive")
    adj = jt.neighbors()
    order, seen = [0], {0}
    for c in order:
        for nb in adj.get(c, []):
            if nb not in seen:
                seen.add(nb)
                order.append(nb)
    counts = np.ones((m,) * n, dtype=np.int64)
    total = 1
    placed = set()
    for c in order:
        local = [v for v in jt.clusters[c] if v in placed]
        for x in jt.clusters[c]:
            if x in placed:
                continue
            if not local:
                total *= m
            else:
                factor = np.zeros((m,) * n, dtype=np.int64)
                for p in local:
                    q = _bistochastic(m, a, rng)
                    shape = [1] * n
                    shape[p], shape[x] = m, m
                    axes_q = q if p < x else q.T
                    factor = factor + axes_q.reshape(shape)
                counts = counts * factor
                total *= len(local) * a
            local.append(x)
            placed.add(x)
    table = SdcTable.from_counts(tuple(range(n)), (m,) * n, counts)
    assert table.total == total
    return table


def sample_table(table: SdcTable, N: int, rng: np.random.Generator) -> TransformedSample:
    pick = rng.choice(len(table), size=N, p=table.masses())
    return TransformedSample(table.index[pick], table.bins)


def factorized_sample(table: SdcTable, N: int, rng: np.random.Generator) -> SampleMatrix:
    """Rows drawn from ``table`` and spread uniformly inside their bins: ``x = (j - U) / m``."""
    grid = sample_table(table, N, rng)
    x = (grid.indices - rng.random(grid.indices.shape)) / np.asarray(grid.bins, dtype=float)
    return SampleMatrix(x, _names(table.d))
