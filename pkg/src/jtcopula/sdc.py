"""Sparse sample-derived copula tables.

An :class:`SdcTable` stores integer cell counts over a scope of variables
together with the sample size ``N``; the mass of a cell is ``count / N``.
Cells are keyed by 1-based bin numbers, never by floating grid values, and
zero-count cells are not stored.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from fractions import Fraction

import numpy as np

from .errors import EmptyScope, OffGridPoint, ScopeNotSubset
from .tabular import TransformedSample

__all__ = [
    "SdcTable",
    "build_sdc",
    "marginalize",
    "sdc_cdf",
    "cdf_grid",
    "cell_mass",
]


class SdcTable:
    """Immutable sparse count table.

    Attributes:
        scope: sorted tuple of variable ids covered by the table.
        bins: number of bins ``m_i`` for each variable in ``scope``.
        index: ``(k, d)`` int array of distinct cells, rows sorted
            lexicographically, entries in ``1..m_i``.
        counts: ``(k,)`` positive int array, one count per stored cell.
        total: the sample size ``N`` (sum of counts).
    """

    __slots__ = ("scope", "bins", "index", "counts", "total", "_lookup")

    def __init__(self, scope, bins, index, counts, total=None, _trusted=False):
        scope = tuple(int(s) for s in scope)
        bins = tuple(int(b) for b in bins)
        index = np.asarray(index, dtype=np.int64).reshape(-1, len(scope))
        counts = np.asarray(counts, dtype=np.int64).reshape(-1)
        if not scope:
            raise EmptyScope("a table needs at least one variable")
        if len(bins) != len(scope):
            raise ValueError("one bin count per scope variable required")
        if not _trusted:
            if list(scope) != sorted(set(scope)):
                raise ValueError(f"scope must be sorted and duplicate-free, got {scope}")
            if index.shape[0] != counts.shape[0]:
                raise ValueError("index and counts disagree in length")
            if np.any(counts <= 0):
                raise ValueError("stored counts must be positive")
            if np.any(index < 1) or np.any(index > np.asarray(bins)):
                raise OffGridPoint("cell index outside 1..m")
            uniq, inv = np.unique(index, axis=0, return_inverse=True)
            if uniq.shape[0] != index.shape[0] or np.any(np.diff(inv.reshape(-1)) <= 0):
                # duplicate or unsorted rows: merge and sort
                merged = np.zeros(uniq.shape[0], dtype=np.int64)
                np.add.at(merged, inv.reshape(-1), counts)
                index, counts = uniq, merged
        computed = int(counts.sum())
        if total is not None and int(total) != computed:
            raise ValueError(f"total {total} does not equal the sum of counts {computed}")
        if computed <= 0:
            raise ValueError("table has no mass")
        index = np.ascontiguousarray(index)
        index.flags.writeable = False
        counts.flags.writeable = False
        self.scope = scope
        self.bins = bins
        self.index = index
        self.counts = counts
        self.total = computed
        self._lookup = None

    @classmethod
    def from_counts(cls, scope, bins, cells) -> "SdcTable":
        """Build from a mapping ``cell tuple -> count`` or a dense count array.

        A dense array has shape ``bins`` with ``array[j1-1, ..., jd-1]``
        holding the count of cell ``(j1, ..., jd)``.
        """
        if isinstance(cells, Mapping):
            items = [(tuple(k), int(v)) for k, v in cells.items() if int(v) != 0]
            if any(v < 0 for _, v in items):
                raise ValueError("negative count")
            index = np.array([k for k, _ in items], dtype=np.int64).reshape(-1, len(scope))
            counts = np.array([v for _, v in items], dtype=np.int64)
        else:
            dense = np.asarray(cells)
            if dense.shape != tuple(bins):
                raise ValueError(f"dense counts of shape {dense.shape}, expected {tuple(bins)}")
            if np.any(dense < 0) or not np.array_equal(dense, np.round(dense)):
                raise ValueError("dense counts must be nonnegative integers")
            nz = np.argwhere(dense > 0)
            index = nz + 1
            counts = dense[tuple(nz.T)].astype(np.int64)
        return cls(scope, bins, index, counts)

    @property
    def d(self) -> int:
        return len(self.scope)

    @property
    def N(self) -> int:
        return self.total

    def __len__(self):
        return self.counts.shape[0]

    def masses(self) -> np.ndarray:
        return self.counts / self.total

    def cells(self) -> dict:
        """``{cell: count}`` for every stored cell."""
        if self._lookup is None:
            self._lookup = {tuple(row): int(c) for row, c in zip(self.index.tolist(), self.counts.tolist())}
        return self._lookup

    def count_of(self, cell) -> int:
        return self.cells().get(tuple(int(j) for j in cell), 0)

    def dense(self) -> np.ndarray:
        """Dense int array of shape ``bins`` (only for small grids)."""
        out = np.zeros(self.bins, dtype=np.int64)
        out[tuple((self.index - 1).T)] = self.counts
        return out

    def positions(self, variables: Sequence[int]) -> list:
        try:
            return [self.scope.index(v) for v in variables]
        except ValueError:
            raise ScopeNotSubset(f"{tuple(variables)} is not a subset of scope {self.scope}") from None

    def grid_values(self) -> np.ndarray:
        return self.index / np.asarray(self.bins, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, SdcTable):
            return NotImplemented
        return (self.scope == other.scope and self.bins == other.bins and self.total == other.total
                and np.array_equal(self.index, other.index) and np.array_equal(self.counts, other.counts))

    def __hash__(self):
        return hash((self.scope, self.bins, self.total, self.index.tobytes(), self.counts.tobytes()))

    def __repr__(self):
        return f"SdcTable(scope={self.scope}, bins={self.bins}, cells={len(self)}, N={self.total})"

    def to_dict(self) -> dict:
        return {
            "scope": list(self.scope),
            "bins": list(self.bins),
            "cells": [{"idx": row, "count": c} for row, c in zip(self.index.tolist(), self.counts.tolist())],
            "N": self.total,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SdcTable":
        scope = d["scope"]
        index = np.array([c["idx"] for c in d["cells"]], dtype=np.int64).reshape(-1, len(scope))
        counts = np.array([c["count"] for c in d["cells"]], dtype=np.int64)
        return cls(scope, d["bins"], index, counts, total=d["N"])


def build_sdc(ts: TransformedSample, scope: Sequence[int] | None = None) -> SdcTable:
    """Count distinct grid rows of ``ts``; variables are numbered by column.

    ``scope`` relabels the columns (it must be sorted), which is how a
    projected sample keeps its original variable ids.
    """
    scope = tuple(range(ts.n)) if scope is None else tuple(scope)
    uniq, counts = np.unique(ts.indices, axis=0, return_counts=True)
    return SdcTable(scope, ts.bins, uniq, counts, _trusted=True)


def marginalize(t: SdcTable, D: Sequence[int]) -> SdcTable:
    """Sum ``t`` over the variables outside ``D``; the result scope is ``sorted(D)``."""
    D = sorted(set(int(v) for v in D))
    if not D:
        raise EmptyScope("cannot marginalize onto an empty scope")
    pos = t.positions(D)
    if len(pos) == t.d:
        return t
    sub = t.index[:, pos]
    uniq, inv = np.unique(sub, axis=0, return_inverse=True)
    counts = np.zeros(uniq.shape[0], dtype=np.int64)
    np.add.at(counts, inv.reshape(-1), t.counts)
    return SdcTable(D, [t.bins[p] for p in pos], uniq, counts, _trusted=True)


def _to_bin(u, m, var):
    """Grid coordinate ``u`` (float, Fraction or int) to its bin number in ``0..m``."""
    if isinstance(u, (Fraction, int, np.integer)):
        j = Fraction(u) * m
        if j.denominator != 1:
            raise OffGridPoint(f"{u} is not a multiple of 1/{m} (variable {var})")
        j = int(j)
    else:
        x = float(u) * m
        j = int(round(x))
        if abs(x - j) > 1e-9:
            raise OffGridPoint(f"{u} is not a multiple of 1/{m} (variable {var})")
    if not 0 <= j <= m:
        raise OffGridPoint(f"{u} outside [0, 1] (variable {var})")
    return j


def sdc_cdf(t: SdcTable, point: Sequence, exact: bool = False):
    """Copula CDF: mass of stored cells that are componentwise ``<=`` ``point``.

    ``point`` gives one grid value ``j / m_i`` (or 0) per scope variable.
    Returns a ``Fraction`` when ``exact`` is set, else a float.
    """
    if len(point) != t.d:
        raise OffGridPoint(f"point has {len(point)} coordinates, table scope has {t.d}")
    limit = np.array([_to_bin(u, m, v) for u, m, v in zip(point, t.bins, t.scope)], dtype=np.int64)
    hits = int(t.counts[np.all(t.index <= limit, axis=1)].sum())
    return Fraction(hits, t.total) if exact else hits / t.total


def cdf_grid(t: SdcTable) -> np.ndarray:
    """Counts ``N * C(j_1/m_1, ..., j_d/m_d)`` on the full grid, shape ``(m_i + 1, ...)``.

    Index 0 along an axis is the grid value 0. Integer valued, hence exact.
    """
    out = np.zeros(tuple(m + 1 for m in t.bins), dtype=np.int64)
    out[tuple(t.index.T)] = t.counts
    for axis in range(t.d):
        np.cumsum(out, axis=axis, out=out)
    return out


def cell_mass(t: SdcTable, cell: Sequence, exact: bool = False):
    """Mass of one cell given by bin numbers ``1..m_i``; 0 for unstored cells."""
    if len(cell) != t.d:
        raise OffGridPoint(f"cell has {len(cell)} coordinates, table scope has {t.d}")
    for j, m, v in zip(cell, t.bins, t.scope):
        if int(j) != j or not 1 <= j <= m:
            raise OffGridPoint(f"bin {j} outside 1..{m} (variable {v})")
    c = t.count_of(cell)
    return Fraction(c, t.total) if exact else c / t.total
