"""Sample ingestion, per-variable partitions and the rank transform.

A *uniform* partition splits a column into ``m`` bins holding exactly
``N / m`` observations each; its interior edges are order statistics of the
column. A *general* partition is any strictly increasing set of edges (for
example equidistant ones) and only records how many observations land in
each bin.

Bins are half-open on the left, ``(e[j-1], e[j]]``, and numbered ``1..m``.
Bin ``j`` of variable ``i`` corresponds to the grid value ``j / m_i``.
"""
from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateValues,
    IndivisibleN,
    NonFinite,
    NonMonotoneEdges,
    ParseError,
    PartitionKindMismatch,
    RaggedRows,
    UncoveredValue,
)

__all__ = [
    "SampleMatrix",
    "Partition",
    "TransformedSample",
    "load_sample",
    "write_sample",
    "uniform_partition",
    "general_partition",
    "partition_sample",
    "truncate_sample",
    "transform",
    "contingency",
    "UNIFORM",
    "GENERAL",
]

UNIFORM = "uniform-frequency"
GENERAL = "general"
TIE_POLICIES = ("error", "stable-rank")


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``N x n`` matrix of finite observations with column labels."""

    values: np.ndarray
    column_names: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ParseError(f"sample must be a non-empty 2-d matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise NonFinite("non-finite value", row=int(r), col=int(c))
        names = tuple(self.column_names) or tuple(f"x{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ParseError(f"{len(names)} column names for {values.shape[1]} columns")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "column_names", names)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.values[:, i]

    def take_rows(self, rows) -> "SampleMatrix":
        return SampleMatrix(self.values[rows], self.column_names)

    def __eq__(self, other):
        if not isinstance(other, SampleMatrix):
            return NotImplemented
        return self.column_names == other.column_names and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class Partition:
    """Bin edges ``e_0 < e_1 < ... < e_m`` of one variable.

    ``bin_counts[j-1]`` is the number of training observations in bin ``j``.
    """

    variable_index: int
    edges: tuple
    kind: str
    bin_counts: tuple

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2:
            raise NonMonotoneEdges("a partition needs at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise NonMonotoneEdges(f"edges must be strictly increasing: {edges}")
        if self.kind not in (UNIFORM, GENERAL):
            raise ValueError(f"unknown partition kind {self.kind!r}")
        counts = tuple(int(c) for c in self.bin_counts)
        if len(counts) != len(edges) - 1 or any(c < 0 for c in counts):
            raise ValueError("bin_counts must hold one nonnegative count per bin")
        if self.kind == UNIFORM and len(set(counts)) > 1:
            raise ValueError(f"uniform partition with unequal bin counts {counts}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "bin_counts", counts)

    @property
    def m(self) -> int:
        return len(self.edges) - 1

    @property
    def N(self) -> int:
        return sum(self.bin_counts)

    def assign(self, values) -> np.ndarray:
        """Map values to 1-based bin numbers by edge membership."""
        values = np.asarray(values, dtype=float)
        bins = np.searchsorted(np.asarray(self.edges), values, side="left")
        bad = (bins < 1) | (bins > self.m)
        if np.any(bad):
            v = values[np.argmax(bad)]
            raise UncoveredValue(f"value {v!r} of variable {self.variable_index} outside ({self.edges[0]}, {self.edges[-1]}]")
        return bins.astype(np.int64)

    def bin_bounds(self, j: int) -> tuple:
        return self.edges[j - 1], self.edges[j]

    def to_dict(self) -> dict:
        return {
            "variable_index": self.variable_index,
            "edges": list(self.edges),
            "m": self.m,
            "kind": self.kind,
            "bin_counts": list(self.bin_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Partition":
        p = cls(int(d["variable_index"]), tuple(d["edges"]), d["kind"], tuple(d["bin_counts"]))
        if "m" in d and int(d["m"]) != p.m:
            raise ValueError(f"partition m={d['m']} disagrees with {p.m} bins")
        return p


@dataclass(frozen=True, eq=False)
class TransformedSample:
    """The sample mapped onto the copula grid.

    ``indices[k, i]`` is the bin number ``j`` (1-based) of row ``k`` in
    variable ``i``; the grid value is ``j / bins[i]``.
    """

    indices: np.ndarray
    bins: tuple

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        bins = tuple(int(b) for b in self.bins)
        if idx.ndim != 2 or idx.shape[0] < 1 or idx.shape[1] != len(bins):
            raise ValueError(f"indices of shape {idx.shape} do not match {len(bins)} variables")
        if np.any(idx < 1) or np.any(idx > np.asarray(bins)):
            raise ValueError("bin index out of range")
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "bins", bins)

    @property
    def N(self) -> int:
        return self.indices.shape[0]

    @property
    def n(self) -> int:
        return self.indices.shape[1]

    @property
    def bin_counts_per_column(self) -> tuple:
        return self.bins

    @property
    def grid_values(self) -> np.ndarray:
        return self.indices / np.asarray(self.bins, dtype=float)

    def project(self, columns: Sequence[int]) -> "TransformedSample":
        columns = list(columns)
        return TransformedSample(self.indices[:, columns], tuple(self.bins[c] for c in columns))


def _parse_float(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a real number", row=row, col=col) from None
    if not math.isfinite(value):
        raise NonFinite(f"non-finite value {text!r}", row=row, col=col)
    return value


def load_sample(path, delimiter: str = ",", header: bool = True) -> SampleMatrix:
    """Read a rectangular CSV of reals (first row is the header by default).

    Rows are numbered from 1 in error messages, counting the header line.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path} is empty")
    if header:
        names, body, offset = tuple(c.strip() for c in rows[0]), rows[1:], 2
    else:
        names, body, offset = (), rows, 1
    if not body:
        raise ParseError(f"{path} has no data rows")
    width = len(names) if header else len(body[0])
    values = []
    for k, row in enumerate(body):
        if len(row) != width:
            raise RaggedRows(f"expected {width} fields, found {len(row)}", row=k + offset)
        values.append([_parse_float(c.strip(), k + offset, j + 1) for j, c in enumerate(row)])
    return SampleMatrix(np.array(values, dtype=float), names)


def write_sample(sample: SampleMatrix, fh, precision: int = 17) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(sample.column_names)
    fmt = f"{{:.{precision}g}}"
    for row in sample.values:
        writer.writerow([fmt.format(v) for v in row])


def _outer_delta(sorted_col, interior, delta_scale):
    # widths of the bins measured between observed min, interior edges and observed max
    points = np.concatenate(([sorted_col[0]], interior, [sorted_col[-1]]))
    widths = np.diff(points)
    delta = delta_scale * float(np.median(widths))
    spread = float(sorted_col[-1] - sorted_col[0])
    if spread > 0:
        # a vanishing median width must not collapse the outer edges
        delta = max(delta, 1e-6 * spread)
    elif delta <= 0 or not math.isfinite(delta):
        delta = 0.5
    return delta


def uniform_partition(column, m: int, tie_policy: str = "stable-rank", variable_index: int = 0,
                      delta: float | None = None, delta_scale: float = 0.5) -> Partition:
    """Equal-frequency partition of ``column`` into ``m`` bins.

    Interior edge ``j`` is the ``(j N / m)``-th order statistic. The outer
    edges are ``min - delta`` and ``max + delta``; by default ``delta`` is
    ``delta_scale`` times the median bin width (bins measured between the
    observed extremes and the interior edges).

    With ``tie_policy="stable-rank"`` tied values are ordered by row index,
    so a tie group may be split across two bins; edge membership is then
    ambiguous for the tied value and :func:`transform` (which works on
    ranks) is the authoritative assignment for the training sample.
    """
    col = np.asarray(column, dtype=float)
    N = col.shape[0]
    m = int(m)
    if m < 1:
        raise ValueError("m must be a positive integer")
    if tie_policy not in TIE_POLICIES:
        raise ValueError(f"tie_policy must be one of {TIE_POLICIES}")
    if N % m:
        raise IndivisibleN(m, N)
    order = np.argsort(col, kind="stable")
    sorted_col = col[order]
    if tie_policy == "error" and np.any(np.diff(sorted_col) == 0):
        raise DuplicateValues(f"variable {variable_index} has tied values")
    per_bin = N // m
    interior = sorted_col[[j * per_bin - 1 for j in range(1, m)]]
    if delta is None:
        delta = _outer_delta(sorted_col, interior, delta_scale)
    elif delta <= 0:
        raise ValueError("delta must be positive")
    lo, hi = sorted_col[0] - delta, sorted_col[-1] + delta
    lo = min(lo, np.nextafter(sorted_col[0], -np.inf))
    hi = max(hi, np.nextafter(sorted_col[-1], np.inf))
    edges = np.concatenate(([lo], interior, [hi]))
    if np.any(np.diff(edges) <= 0):
        raise DuplicateValues(f"variable {variable_index}: a tie group fills a whole bin, edges collapse")
    return Partition(variable_index, tuple(edges), UNIFORM, (per_bin,) * m)


def general_partition(column, edges, variable_index: int = 0) -> Partition:
    """Arbitrary partition; counts are taken by ``(e[j-1], e[j]]`` membership."""
    edges = tuple(float(e) for e in edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise NonMonotoneEdges(f"edges must be strictly increasing: {edges}")
    probe = Partition(variable_index, edges, GENERAL, (0,) * (len(edges) - 1))
    bins = probe.assign(column)
    counts = np.bincount(bins - 1, minlength=probe.m)
    return Partition(variable_index, edges, GENERAL, tuple(int(c) for c in counts))


def _as_bins(bins, n):
    if isinstance(bins, Iterable) and not isinstance(bins, (str, bytes)):
        bins = tuple(int(b) for b in bins)
        if len(bins) != n:
            raise ValueError(f"{len(bins)} bin counts given for {n} columns")
    else:
        bins = (int(bins),) * n
    if any(b < 1 for b in bins):
        raise ValueError("bins must be >= 1")
    return bins


def partition_sample(sample: SampleMatrix, bins, tie_policy: str = "stable-rank",
                     delta_scale: float = 0.5) -> list:
    """Uniform partitions for every column; ``bins`` is an int or one int per column."""
    bins = _as_bins(bins, sample.n)
    return [uniform_partition(sample.column(i), bins[i], tie_policy, i, delta_scale=delta_scale)
            for i in range(sample.n)]


def truncate_sample(sample: SampleMatrix, bins) -> SampleMatrix:
    """Keep the first ``L`` rows, ``L`` the largest multiple of ``lcm(bins)`` not above ``N``."""
    bins = _as_bins(bins, sample.n)
    step = reduce(math.lcm, bins)
    keep = (sample.N // step) * step
    if keep == 0:
        raise IndivisibleN(step, sample.N)
    return sample.take_rows(slice(0, keep))


def transform(sample: SampleMatrix, partitions: Sequence[Partition]) -> TransformedSample:
    """Rank transform of the training sample onto the grid.

    Row ``k`` of column ``i`` goes to bin ``floor(r / (N / m_i)) + 1`` where
    ``r`` is its 0-based stable rank; without ties this is exactly edge
    membership in a uniform partition of this column.
    """
    if len(partitions) != sample.n:
        raise ValueError(f"{len(partitions)} partitions for {sample.n} columns")
    N = sample.N
    out = np.empty((N, sample.n), dtype=np.int64)
    for i, p in enumerate(partitions):
        if p.kind != UNIFORM:
            raise PartitionKindMismatch(f"column {i}: transform needs a uniform partition, got {p.kind}")
        if p.N != N:
            raise ValueError(f"column {i}: partition built for N={p.N}, sample has N={N}")
        ranks = np.empty(N, dtype=np.int64)
        ranks[np.argsort(sample.column(i), kind="stable")] = np.arange(N)
        out[:, i] = ranks // (N // p.m) + 1
    return TransformedSample(out, tuple(p.m for p in partitions))


def contingency(sample: SampleMatrix, partitions: Sequence[Partition]) -> tuple:
    """Sparse joint counts and per-variable counts under arbitrary partitions.

    Returns ``(joint, marginals)``: ``joint`` maps a tuple of 1-based bin
    numbers to its count, ``marginals[i]`` is the array of bin counts of
    variable ``i``.
    """
    cols = [p.assign(sample.column(i)) for i, p in enumerate(partitions)]
    idx = np.stack(cols, axis=1)
    uniq, counts = np.unique(idx, axis=0, return_counts=True)
    joint = {tuple(int(v) for v in row): int(c) for row, c in zip(uniq, counts)}
    marginals = [np.bincount(c - 1, minlength=p.m) for c, p in zip(cols, partitions)]
    return joint, marginals
