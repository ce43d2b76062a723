import itertools
from collections import Counter

import numpy as np
import pytest

from jtcopula.errors import InvalidStructure, SingleVariable, TooFewVariables
from jtcopula.generate import factorized_table, random_uniform_tree
from jtcopula.infotheory import jtree_weight, kl_formula, multi_information, mutual_information_matrix
from jtcopula.model import density_grid, fit
from jtcopula.sdc import SdcTable, marginalize
from jtcopula.structure import (
    JunctionTree,
    chow_liu,
    junction_tree_from_clusters,
    kruskal,
    random_junction_tree,
    t_cherry_exact,
    t_cherry_k3,
    validate,
)

from oracles import prufer_trees, random_table


def full_grid(bins):
    cells = {c: 1 for c in itertools.product(*(range(1, m + 1) for m in bins))}
    return SdcTable.from_counts(tuple(range(len(bins))), bins, cells)


def pair_weight(mi, edges):
    return sum(mi[a, b] for a, b in edges)


class TestValidate:
    def test_two_clusters(self):
        jt = JunctionTree(((0, 1), (1, 2)), ((0, 1),))
        assert validate(jt, 3).ok
        assert jt.separators == ((1,),)
        assert jt.separator_multiplicities == {(1,): 2}

    def test_missing_variable(self):
        jt = JunctionTree(((0, 1), (2, 3)), ((0, 1),))
        report = validate(jt, 5)
        assert report.codes() == {"coverage"}

    @pytest.mark.parametrize("edges", [((0, 1), (1, 2)), ((0, 1), (0, 2)), ((0, 2), (1, 2))])
    def test_triangle_violates_rip(self, edges):
        jt = JunctionTree(((0, 1), (1, 2), (0, 2)), edges)
        assert "rip" in validate(jt, 3).codes()

    def test_triangle_with_three_edges(self):
        jt = JunctionTree(((0, 1), (1, 2), (0, 2)), ((0, 1), (1, 2), (0, 2)))
        assert "tree" in validate(jt, 3).codes()

    def test_disconnected(self):
        jt = JunctionTree(((0, 1), (1, 2), (3, 4)), ((0, 1),))
        assert "tree" in validate(jt, 5).codes()

    def test_subset_cluster(self):
        jt = JunctionTree(((0, 1, 2), (1, 2)), ((0, 1),))
        assert validate(jt, 3).codes() == {"subset-cluster"}

    def test_bad_edge_and_cluster(self):
        jt = JunctionTree(((0, 9), (0, 1)), ((0, 5),))
        codes = validate(jt, 2).codes()
        assert {"cluster", "edge", "tree"} <= codes

    def test_empty_separator_tree_is_valid(self):
        jt = JunctionTree(((0, 1), (2, 3)), ((0, 1),))
        assert validate(jt, 4).ok
        assert jt.separator_exponents == {}

    def test_report_serializes(self):
        d = validate(JunctionTree(((0,),)), 2).to_dict()
        assert d["valid"] is False and d["violations"][0]["code"] == "coverage"

    def test_dict_roundtrip(self, rng):
        jt = random_junction_tree(6, rng)
        assert JunctionTree.from_dict(jt.to_dict()) == jt


class TestRandomTrees:
    def test_all_valid(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 11))
            jt = random_junction_tree(n, rng, allow_empty_separators=bool(rng.integers(2)))
            assert validate(jt, n).ok

    def test_counting_lemma(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 11))
            jt = random_junction_tree(n, rng)
            for v in range(n):
                holders = sum(v in K for K in jt.clusters)
                seps = sum(v in S for S in jt.separators)
                assert holders == seps + 1

    @pytest.mark.parametrize("k", [2, 3])
    def test_exponent_forms_agree_on_uniform_width(self, rng, k):
        # equal-size clusters with (k-1)-separators: no separator nests inside another
        for _ in range(200):
            n = int(rng.integers(k, 11))
            jt = random_uniform_tree(n, k, rng)
            grouped = {S: v - 1 for S, v in jt.separator_multiplicities.items()}
            assert jt.separator_exponents == grouped

    def test_exponent_forms_differ_with_nested_separators(self):
        jt = JunctionTree(((1, 2), (2, 3, 4), (2, 3, 5), (2, 6)), ((0, 1), (1, 2), (2, 3)))
        assert validate(jt, 7).codes() == {"coverage"}  # variable 0 unused
        assert jt.separator_exponents == {(2,): 2, (2, 3): 1}
        assert jt.separator_multiplicities == {(2,): 4, (2, 3): 2}

    def test_per_edge_form_normalizes_where_grouped_does_not(self, rng):
        jt = JunctionTree(((0, 1), (1, 2, 3), (1, 2, 4), (1, 5)), ((0, 1), (1, 2), (2, 3)))
        assert validate(jt, 6).ok
        t, _, _ = random_table(rng, n_min=6, n_max=6, N_max=96, bin_choices=(2,))
        model = fit(t, jt)
        assert density_grid(model).sum() == pytest.approx(1, abs=1e-12)
        grouped = np.ones((2,) * 6)
        for K in jt.clusters:
            grouped = grouped * _broadcast(marginalize(t, K), 6)
        for S, v in jt.separator_multiplicities.items():
            sep = _broadcast(marginalize(t, S), 6)
            with np.errstate(divide="ignore", invalid="ignore"):
                grouped = np.where(sep > 0, grouped / sep ** (v - 1), 0)
        assert abs(grouped.sum() - 1) > 1e-3


def _broadcast(tab, n):
    shape = [1] * n
    for v, m in zip(tab.scope, tab.bins):
        shape[v] = m
    return (tab.dense() / tab.total).reshape(shape)


class TestKruskal:
    def test_three_variable_example(self):
        w = {(0, 1): 1.0, (1, 2): 1.0, (0, 2): 0.2}
        assert kruskal(range(3), w) == [(0, 1), (1, 2)]
        best = max(prufer_trees(3), key=lambda es: sum(w[e] for e in es))
        assert sorted(best) == [(0, 1), (1, 2)]

    def test_ties_are_lexicographic(self):
        w = {e: 0.0 for e in itertools.combinations(range(5), 2)}
        assert kruskal(range(5), w) == [(0, 1), (0, 2), (0, 3), (0, 4)]


class TestChowLiu:
    def test_single_variable(self):
        with pytest.raises(SingleVariable):
            chow_liu(full_grid((3,)))

    def test_two_variables_single_cluster(self, rng):
        t, _, _ = random_table(rng, n_min=2, n_max=2)
        assert chow_liu(t).clusters == ((0, 1),)

    def test_independent_full_grid_is_star(self):
        jt = chow_liu(full_grid((2, 3, 2, 2)))
        assert jt.clusters == ((0, 1), (0, 2), (0, 3))
        assert validate(jt, 4).ok

    def test_chain_table(self):
        # columns 0 and 1 are identical; column 2 agrees with them 3 times in 4
        cells = Counter()
        for a in (1, 2):
            cells[(a, a, a)] += 3
            cells[(a, a, 3 - a)] += 1
        t = SdcTable.from_counts((0, 1, 2), (2, 2, 2), dict(cells))
        jt = chow_liu(t)
        mi = mutual_information_matrix(t)
        assert mi[0, 1] == pytest.approx(1.0)
        assert mi[0, 2] == mi[1, 2] < 1
        assert set(jt.clusters) == {(0, 1), (0, 2)}  # tie broken towards the smaller pair

    def test_optimal_over_all_spanning_trees(self, rng):
        for _ in range(25):
            t, _, _ = random_table(rng, n_min=3, n_max=6)
            mi = mutual_information_matrix(t)
            best = max(pair_weight(mi, es) for es in prufer_trees(t.d))
            jt = chow_liu(t)
            assert jtree_weight(jt, t) == pytest.approx(best, abs=1e-12)
            assert validate(jt, t.d).ok


class TestCherry:
    def test_too_few(self):
        with pytest.raises(TooFewVariables):
            t_cherry_k3(full_grid((2, 2)))
        with pytest.raises(TooFewVariables):
            t_cherry_exact(full_grid((2, 2)))

    def test_three_variables(self, rng):
        t, _, _ = random_table(rng, n_min=3, n_max=3)
        jt = t_cherry_k3(t)
        assert jt.clusters == ((0, 1, 2),)
        assert jtree_weight(jt, t) == pytest.approx(multi_information(t))

    def test_valid_on_random_tables(self, rng):
        for _ in range(20):
            t, _, _ = random_table(rng, n_min=5, n_max=5)
            jt = t_cherry_k3(t)
            assert validate(jt, 5).ok
            assert {len(K) for K in jt.clusters} == {3}
            assert all(len(S) == 2 for S in jt.separators)

    def test_recovers_factorized_tables(self):
        recovered = 0
        for seed in range(30):
            rng = np.random.default_rng(seed)
            true = random_uniform_tree(5, 3, rng)
            t = factorized_table(true, 4, rng, a=2)
            got = t_cherry_k3(t)
            assert abs(kl_formula(got, t)) <= 1e-9
            recovered += sorted(got.clusters) == sorted(true.clusters)
        # the rest are equal-weight alternatives
        assert recovered >= 25

    def test_exact_dominates_heuristic(self, rng):
        for _ in range(8):
            t, _, _ = random_table(rng, n_min=4, n_max=6, N_max=48)
            exact = t_cherry_exact(t)
            assert validate(exact, t.d).ok
            assert jtree_weight(exact, t) >= jtree_weight(t_cherry_k3(t), t) - 1e-12

    def test_exact_reaches_true_weight(self):
        rng = np.random.default_rng(3)
        true = random_uniform_tree(5, 3, rng)
        t = factorized_table(true, 3, rng)
        assert abs(kl_formula(t_cherry_exact(t), t)) <= 1e-9

    def test_exact_size_gate(self, rng):
        t, _, _ = random_table(rng, n_min=5, n_max=5)
        with pytest.raises(InvalidStructure):
            t_cherry_exact(t, max_n=4)


def test_tree_from_cliques(rng):
    jt = random_uniform_tree(7, 3, rng)
    rebuilt = junction_tree_from_clusters(reversed(jt.clusters))
    assert validate(rebuilt, 7).ok
