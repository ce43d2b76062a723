"""The fitted junction-tree copula.

The model density on the grid is

    c_J(u) = prod_K c_K(u_K) / prod_edges c_S(u_S)

with every cluster and separator table a marginal of one SDC table, which
makes the factors consistent by construction.

Sampling is ancestral over the cluster tree: the lexicographically smallest
cluster is drawn from its table, then clusters are visited breadth-first and
each new cluster is drawn from its table restricted to the separator values
already fixed. The generator is numpy's PCG64 seeded with the given integer.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    ConsistencyViolation,
    CorruptFile,
    InvalidStructure,
    MissingPartitions,
    OffGridPoint,
    SchemaMismatch,
    ScopeMismatch,
    ZeroModelMass,
)
from .sdc import SdcTable, marginalize
from .structure import JunctionTree, ValidationReport, validate
from .tabular import Partition, SampleMatrix, TransformedSample

__all__ = [
    "JtreeCopulaModel",
    "fit",
    "density",
    "density_grid",
    "check_model",
    "sample_grid",
    "sample_data_scale",
    "save",
    "load",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1
FORMAT_NAME = "jtcopula-model"


@dataclass(frozen=True, eq=False)
class JtreeCopulaModel:
    structure: JunctionTree
    cluster_tables: tuple
    separator_tables: dict
    bins: tuple
    N: int
    partitions: tuple | None = None
    column_names: tuple | None = None
    options: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.bins)

    def separator_table(self, S) -> SdcTable:
        return self.separator_tables[tuple(S)]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": SCHEMA_VERSION,
            "n": self.n,
            "N": self.N,
            "bins": list(self.bins),
            "column_names": list(self.column_names) if self.column_names else None,
            "partitions": [p.to_dict() for p in self.partitions] if self.partitions else None,
            "structure": self.structure.to_dict(),
            "cluster_tables": [tab.to_dict() for tab in self.cluster_tables],
            "separator_tables": [tab.to_dict() for _, tab in sorted(self.separator_tables.items())],
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JtreeCopulaModel":
        if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
            raise CorruptFile("not a junction-tree copula model file")
        if d.get("version") != SCHEMA_VERSION:
            raise SchemaMismatch(f"model schema version {d.get('version')!r}, this build reads {SCHEMA_VERSION}")
        try:
            structure = JunctionTree.from_dict(d["structure"])
            clusters = tuple(SdcTable.from_dict(x) for x in d["cluster_tables"])
            seps = {tab.scope: tab for tab in (SdcTable.from_dict(x) for x in d["separator_tables"])}
            parts = d.get("partitions")
            parts = tuple(Partition.from_dict(p) for p in parts) if parts else None
            names = d.get("column_names")
            model = cls(structure, clusters, seps, tuple(int(b) for b in d["bins"]), int(d["N"]),
                        parts, tuple(names) if names else None, dict(d.get("options") or {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"malformed model file: {exc}") from exc
        if model.n != int(d["n"]) or len(clusters) != len(structure.clusters):
            raise CorruptFile("model header disagrees with its tables")
        return model


def fit(t: SdcTable, structure: JunctionTree, partitions=None, column_names=None,
        options: dict | None = None) -> JtreeCopulaModel:
    """Attach the marginals of ``t`` to ``structure``."""
    if t.scope != tuple(range(t.d)):
        raise ScopeMismatch(f"fit needs a table over variables 0..n-1, got scope {t.scope}")
    report = validate(structure, t.d)
    if not report.ok:
        raise InvalidStructure("; ".join(v.message for v in report.violations))
    if partitions is not None and len(partitions) != t.d:
        raise ValueError(f"{len(partitions)} partitions for {t.d} variables")
    clusters = tuple(marginalize(t, K) for K in structure.clusters)
    seps = {S: marginalize(t, S) for S in set(structure.separators) if S}
    return JtreeCopulaModel(structure, clusters, seps, t.bins, t.total,
                            tuple(partitions) if partitions is not None else None,
                            tuple(column_names) if column_names else None, dict(options or {}))


def _check_cell(model, cell):
    if len(cell) != model.n:
        raise OffGridPoint(f"cell has {len(cell)} coordinates, model has {model.n} variables")
    for i, (j, m) in enumerate(zip(cell, model.bins)):
        if int(j) != j or not 1 <= j <= m:
            raise OffGridPoint(f"bin {j} outside 1..{m} (variable {i})")
    return tuple(int(j) for j in cell)


def density(model: JtreeCopulaModel, cell, exact: bool = False):
    """Model mass of a grid cell given by 1-based bin numbers (``Fraction`` if ``exact``)."""
    cell = _check_cell(model, cell)
    num = []
    for K, tab in zip(model.structure.clusters, model.cluster_tables):
        c = tab.count_of(tuple(cell[v] for v in K))
        if c == 0:
            return Fraction(0) if exact else 0.0
        num.append(Fraction(c, tab.total))
    den = []
    for S in model.structure.separators:
        if not S:
            continue
        tab = model.separator_table(S)
        c = tab.count_of(tuple(cell[v] for v in S))
        if c == 0:
            # every cluster factor is positive here, so the tables disagree
            raise ConsistencyViolation(f"separator {S} has no mass at {tuple(cell[v] for v in S)} "
                                       "while its clusters do")
        den.append(Fraction(c, tab.total))
    if exact:
        return math.prod(num, start=Fraction(1)) / math.prod(den, start=Fraction(1))
    return math.exp(math.fsum(math.log(x) for x in num) - math.fsum(math.log(x) for x in den))


def _broadcast(tab: SdcTable, n, bins):
    shape = [1] * n
    for v, m in zip(tab.scope, tab.bins):
        shape[v] = m
    return (tab.dense() / tab.total).reshape(shape)


def density_grid(model: JtreeCopulaModel, max_cells: int = 10 ** 6) -> np.ndarray:
    """Dense float array of the model mass on every grid cell (axis ``i`` is variable ``i``)."""
    if math.prod(model.bins) > max_cells:
        raise ValueError(f"grid of {math.prod(model.bins)} cells exceeds max_cells={max_cells}")
    out = np.ones(model.bins)
    for tab in model.cluster_tables:
        out = out * _broadcast(tab, model.n, model.bins)
    for S in model.structure.separators:
        if not S:
            continue
        den = np.broadcast_to(_broadcast(model.separator_table(S), model.n, model.bins), model.bins)
        out = np.divide(out, den, out=np.zeros(model.bins), where=den > 0)
    return out


def check_model(model: JtreeCopulaModel) -> ValidationReport:
    """Structural validation plus the table consistency conditions.

    Extra codes: ``consistency`` (separator table is not the marginal of an
    adjacent cluster table, or cluster tables disagree with the structure),
    ``uniform-margin`` (a univariate marginal is not ``N / m_i`` per bin),
    ``total`` (table total differs from the model N).
    """
    report = validate(model.structure, model.n)
    if len(model.cluster_tables) != len(model.structure.clusters):
        report.add("consistency", "number of cluster tables differs from number of clusters")
        return report
    for K, tab in zip(model.structure.clusters, model.cluster_tables):
        if tab.scope != K:
            report.add("consistency", f"table scope {tab.scope} stored for cluster {K}")
            continue
        if tab.bins != tuple(model.bins[v] for v in K):
            report.add("consistency", f"cluster {K}: bins {tab.bins} differ from model bins")
            continue
        if tab.total != model.N:
            report.add("total", f"cluster {K}: total {tab.total} != N={model.N}")
        for v in K:
            counts = marginalize(tab, (v,)).dense()
            m = model.bins[v]
            if counts.shape[0] != m or counts.sum() * 1 != model.N or np.any(counts * m != model.N):
                report.add("uniform-margin", f"cluster {K}: variable {v} marginal {counts.tolist()} is not uniform")
    wanted = {S for S in model.structure.separators if S}
    for S in sorted(wanted - set(model.separator_tables)):
        report.add("consistency", f"separator {S} has no table")
    for (a, b), S in zip(model.structure.edges, model.structure.separators):
        if not S or S not in model.separator_tables or not (0 <= a < len(model.cluster_tables) and 0 <= b < len(model.cluster_tables)):
            continue
        sep = model.separator_tables[S]
        for c in (a, b):
            tab = model.cluster_tables[c]
            if tab.scope != model.structure.clusters[c]:
                continue
            if marginalize(tab, S) != sep:
                report.add("consistency", f"separator {S} is not the marginal of cluster {tab.scope}")
    return report


def _bfs_order(structure: JunctionTree, root: int):
    adj = structure.neighbors()
    order, parent = [root], {root: None}
    queue = deque([root])
    while queue:
        c = queue.popleft()
        for nb in adj.get(c, []):
            if nb not in parent:
                parent[nb] = c
                order.append(nb)
                queue.append(nb)
    return order, parent


def sample_grid(model: JtreeCopulaModel, count: int, seed: int, root: int | None = None) -> TransformedSample:
    """Draw ``count`` i.i.d. grid cells from the model, deterministically given ``seed``."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    structure = model.structure
    if root is None:
        root = min(range(len(structure.clusters)), key=lambda c: structure.clusters[c])
    order, parent = _bfs_order(structure, root)
    draws = np.zeros((count, model.n), dtype=np.int64)
    filled = set()
    for c in order:
        K = structure.clusters[c]
        tab = model.cluster_tables[c]
        S = [v for v in K if v in filled]
        new_pos = [i for i, v in enumerate(K) if v not in filled]
        if not S:
            pick = rng.choice(len(tab), size=count, p=tab.masses())
            draws[:, list(K)] = tab.index[pick]
        else:
            sep_pos = [K.index(v) for v in S]
            groups = {}
            for i, key in enumerate(map(tuple, tab.index[:, sep_pos].tolist())):
                groups.setdefault(key, []).append(i)
            keys, inv = np.unique(draws[:, S], axis=0, return_inverse=True)
            inv = inv.reshape(-1)
            for g, key in enumerate(map(tuple, keys.tolist())):
                rows = np.flatnonzero(inv == g)
                members = groups.get(key)
                if not members:
                    raise ZeroModelMass(f"cluster {K} has no mass at separator value {key}")
                w = tab.counts[members].astype(float)
                pick = rng.choice(members, size=rows.size, p=w / w.sum())
                draws[np.ix_(rows, [K[i] for i in new_pos])] = tab.index[np.ix_(pick, new_pos)]
        filled.update(K)
    return TransformedSample(draws, model.bins)


def sample_data_scale(model: JtreeCopulaModel, count: int, seed: int) -> SampleMatrix:
    """Grid draws mapped into the data scale, uniformly inside each bin ``(e[j-1], e[j]]``."""
    if not model.partitions:
        raise MissingPartitions("model carries no partitions; refit from data to sample on the data scale")
    grid = sample_grid(model, count, seed)
    # independent stream for the within-bin offsets so grid draws match sample_grid(seed)
    rng = np.random.default_rng([seed, 1])
    out = np.empty(grid.indices.shape)
    for i, p in enumerate(model.partitions):
        edges = np.asarray(p.edges)
        j = grid.indices[:, i]
        lo, hi = edges[j - 1], edges[j]
        x = hi - rng.random(count) * (hi - lo)
        out[:, i] = np.maximum(x, np.nextafter(lo, np.inf))
    return SampleMatrix(out, model.column_names or ())


def save(model: JtreeCopulaModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1))


def load(path) -> JtreeCopulaModel:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"cannot read model file {path}: {exc}") from exc
    return JtreeCopulaModel.from_dict(data)
