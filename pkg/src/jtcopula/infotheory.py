"""Entropies, multi-information, junction-tree weight and KL divergence.

All quantities are in bits. ``0 log 0`` is taken as 0.

The divergence computed here is ``sum_u c(u) log2(c(u) / c_J(u))``: data
table ``c`` against the junction-tree model ``c_J``.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Mapping, Sequence

import numpy as np

from .errors import InconsistentMarginals, ScopeMismatch, ZeroModelMass
from .sdc import SdcTable, marginalize

__all__ = [
    "entropy",
    "entropy_of_counts",
    "multi_information",
    "mutual_information_matrix",
    "info_content_uniform",
    "info_content_general",
    "jtree_weight",
    "cluster_informations",
    "structure_constant",
    "kl_formula",
    "kl_direct",
]

# int64 products stay exact in float64 below this bound
_EXACT_LIMIT = 2 ** 53


def _fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).tolist())


def entropy_of_counts(counts, total=None) -> float:
    counts = np.asarray(counts, dtype=np.int64)
    counts = counts[counts > 0]
    if total is None:
        total = int(counts.sum())
    p = counts / total
    return max(0.0, -_fsum(p * np.log2(p)))


def entropy(t: SdcTable) -> float:
    """``-sum p log2 p`` over the stored cells."""
    return entropy_of_counts(t.counts, t.total)


def multi_information(t: SdcTable) -> float:
    """``sum_i H(t_i) - H(t)``, evaluated as ``sum_u p(u) log2(p(u) / prod_i p_i(u_i))``.

    The ratio is formed from integer counts, ``c N^(d-1) / prod c_i``, so an
    exactly independent cell contributes exactly 0.
    """
    d = t.d
    if d == 1:
        return 0.0
    N = t.total
    marg = []
    for p in range(d):
        counts = np.bincount(t.index[:, p], weights=t.counts, minlength=t.bins[p] + 1).astype(np.int64)
        marg.append(counts[t.index[:, p]])
    p = t.counts / N
    if float(N) ** d < _EXACT_LIMIT:
        num = t.counts * N ** (d - 1)
        den = np.prod(np.stack(marg), axis=0)
        logs = np.log2(num / den)
    else:
        logs = np.log2(t.counts) + (d - 1) * math.log2(N) - np.sum(np.log2(np.stack(marg)), axis=0)
    return max(0.0, _fsum(p * logs))


def mutual_information_matrix(t: SdcTable) -> np.ndarray:
    """Pairwise mutual informations between the scope variables (scope order)."""
    d = t.d
    out = np.zeros((d, d))
    for a, b in itertools.combinations(range(d), 2):
        out[a, b] = out[b, a] = multi_information(marginalize(t, (t.scope[a], t.scope[b])))
    return out


def info_content_uniform(t: SdcTable) -> float:
    """Information content under uniform partitions: ``sum log2 m_i + sum p log2 p``."""
    p = t.masses()
    return sum(math.log2(m) for m in t.bins) + _fsum(p * np.log2(p))


def info_content_general(joint_counts, marginal_counts: Sequence) -> float:
    """Information content under arbitrary partitions.

    Args:
        joint_counts: mapping ``cell -> count`` (1-based bins) or a dense
            integer array with one axis per variable.
        marginal_counts: per-variable arrays of bin counts ``k_j``.

    Returns ``sum_i H(k^i / N) - H(q)`` where ``q`` are the joint cell
    frequencies.
    """
    marginal_counts = [np.asarray(k, dtype=np.int64) for k in marginal_counts]
    n = len(marginal_counts)
    if isinstance(joint_counts, Mapping):
        cells = np.array(list(joint_counts.keys()), dtype=np.int64).reshape(-1, n)
        counts = np.array(list(joint_counts.values()), dtype=np.int64)
    else:
        dense = np.asarray(joint_counts)
        if dense.ndim != n:
            raise InconsistentMarginals(f"joint table has {dense.ndim} axes, {n} marginals given")
        nz = np.argwhere(dense > 0)
        cells = nz + 1
        counts = dense[tuple(nz.T)].astype(np.int64)
    if np.any(counts < 0):
        raise InconsistentMarginals("negative joint count")
    N = int(counts.sum())
    for i, k in enumerate(marginal_counts):
        derived = np.bincount(cells[:, i] - 1, weights=counts, minlength=len(k)).astype(np.int64)
        if len(derived) != len(k) or not np.array_equal(derived, k):
            raise InconsistentMarginals(f"variable {i}: marginal counts {k.tolist()} != joint-derived {derived.tolist()}")
    h_marg = sum(entropy_of_counts(k, N) for k in marginal_counts)
    return h_marg - entropy_of_counts(counts, N)


def _check_scope(jt, t: SdcTable):
    if set(jt.variables) != set(t.scope):
        raise ScopeMismatch(f"structure covers {sorted(jt.variables)}, table scope is {list(t.scope)}")


def cluster_informations(jt, t: SdcTable) -> tuple:
    """Multi-information per cluster and per edge separator (empty separators give 0)."""
    _check_scope(jt, t)
    clusters = [multi_information(marginalize(t, K)) for K in jt.clusters]
    seps = [multi_information(marginalize(t, S)) if S else 0.0 for S in jt.separators]
    return clusters, seps


def jtree_weight(jt, t: SdcTable) -> float:
    """Cluster multi-informations minus separator multi-informations.

    Separators are counted once per tree edge; on a valid junction tree this
    matches the grouped ``(v_S - 1)`` exponents whenever all separators of
    the tree are incomparable (e.g. uniform-width trees).
    """
    clusters, seps = cluster_informations(jt, t)
    return _fsum(clusters) - _fsum(seps)


def structure_constant(t: SdcTable) -> float:
    """``sum_i log2 m_i - H(t)``; independent of any junction tree."""
    return sum(math.log2(m) for m in t.bins) - entropy(t)


def kl_formula(jt, t: SdcTable) -> float:
    """Closed-form divergence ``-H(t) - weight + sum_i log2 m_i``."""
    _check_scope(jt, t)
    return structure_constant(t) - jtree_weight(jt, t)


def kl_direct(jt, model, t: SdcTable) -> float:
    """Literal ``sum_u c(u) log2(c(u) / c_J(u))`` over the support of ``t``.

    ``model`` provides the cluster and separator tables (a fitted
    :class:`~jtcopula.model.JtreeCopulaModel`); ``c_J`` is evaluated
    cell by cell from them.
    """
    _check_scope(jt, t)
    if tuple(model.structure.clusters) != tuple(jt.clusters):
        raise ScopeMismatch("model was fitted on a different structure")
    N = t.total
    scope_pos = {v: i for i, v in enumerate(t.scope)}
    cluster_pos = [[scope_pos[v] for v in K] for K in jt.clusters]
    sep_pos = [[scope_pos[v] for v in S] for S in jt.separators]
    ctabs = [(tab.cells(), tab.total) for tab in model.cluster_tables]
    stabs = [(model.separator_table(S).cells(), model.separator_table(S).total) if S else None
             for S in jt.separators]
    terms = []
    for row, c in zip(t.index.tolist(), t.counts.tolist()):
        log_model = 0.0
        for pos, (cells, tot) in zip(cluster_pos, ctabs):
            mass = cells.get(tuple(row[p] for p in pos), 0)
            if mass == 0:
                raise ZeroModelMass(f"cluster mass 0 at data cell {row}")
            log_model += math.log2(mass / tot)
        for pos, tab in zip(sep_pos, stabs):
            if tab is None:
                continue
            cells, tot = tab
            mass = cells.get(tuple(row[p] for p in pos), 0)
            if mass == 0:
                raise ZeroModelMass(f"separator mass 0 at data cell {row}")
            log_model -= math.log2(mass / tot)
        p = c / N
        terms.append(p * (math.log2(p) - log_model))
    return math.fsum(terms)
