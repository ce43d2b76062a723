import itertools
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jtcopula.errors import EmptyScope, OffGridPoint, ScopeNotSubset
from jtcopula.sdc import SdcTable, build_sdc, cdf_grid, cell_mass, marginalize, sdc_cdf
from jtcopula.tabular import TransformedSample

from oracles import brute_cdf, count_rows, random_table


def ts_from_rows(rows, bins):
    return TransformedSample(np.array(rows), bins)


class TestBuild:
    def test_two_cells(self):
        t = build_sdc(ts_from_rows([(1, 1), (2, 2), (1, 1), (2, 2)], (2, 2)))
        assert t.cells() == {(1, 1): 2, (2, 2): 2}
        assert t.masses().tolist() == [0.5, 0.5]

    def test_distinct_rows(self, rng):
        rows = list(itertools.product(range(1, 4), repeat=2))
        t = build_sdc(ts_from_rows(rows, (3, 3)))
        assert len(t) == 9 and set(t.counts.tolist()) == {1}

    def test_single_variable_uniform(self):
        t = build_sdc(ts_from_rows([[j] for j in (1, 2, 3, 4) * 2], (4,)))
        assert [cell_mass(t, (j,), exact=True) for j in range(1, 5)] == [Fraction(1, 4)] * 4

    def test_matches_literal_count(self, rng):
        t, ts, _ = random_table(rng, n_min=3)
        assert t.cells() == dict(count_rows(ts.indices.tolist()))
        assert t.total == ts.N

    def test_support_bound(self, rng):
        for _ in range(20):
            t, _, _ = random_table(rng)
            assert len(t) <= min(t.total, int(np.prod(t.bins)))


class TestMarginalize:
    def test_single_variable_is_uniform(self, rng):
        t, _, _ = random_table(rng, n_min=2)
        for v in t.scope:
            mt = marginalize(t, (v,))
            m = t.bins[v]
            assert mt.cells() == {(j,): t.total // m for j in range(1, m + 1)}

    def test_identity(self, rng):
        t, _, _ = random_table(rng)
        assert marginalize(t, t.scope) == t

    def test_projection_oracle(self, rng):
        t, ts, _ = random_table(rng, n_min=3, n_max=3)
        got = marginalize(t, (0, 2))
        assert got.cells() == dict(count_rows(ts.indices[:, [0, 2]].tolist()))
        assert got == build_sdc(ts.project([0, 2]), scope=(0, 2))

    def test_errors(self, rng):
        t, _, _ = random_table(rng, n_min=2, n_max=2)
        with pytest.raises(EmptyScope):
            marginalize(t, ())
        with pytest.raises(ScopeNotSubset):
            marginalize(t, (0, 7))


class TestCdf:
    def test_zero_coordinate(self, rng):
        t, _, _ = random_table(rng, n_min=2)
        point = [1] * t.d
        point[0] = 0
        assert sdc_cdf(t, point) == 0

    def test_all_ones(self, rng):
        t, _, _ = random_table(rng)
        assert sdc_cdf(t, [1] * t.d, exact=True) == 1

    def test_univariate_section(self, rng):
        t, _, _ = random_table(rng, n_min=2)
        m = t.bins[-1]
        for j in range(m + 1):
            point = [1] * (t.d - 1) + [Fraction(j, m)]
            assert sdc_cdf(t, point, exact=True) == Fraction(j, m)

    def test_float_grid_values_accepted(self):
        t = build_sdc(ts_from_rows([(1, 2), (2, 1), (3, 3)], (3, 3)))
        assert sdc_cdf(t, (2 / 3, 2 / 3)) == pytest.approx(2 / 3)

    def test_off_grid(self):
        t = build_sdc(ts_from_rows([(1, 1), (2, 2)], (2, 2)))
        with pytest.raises(OffGridPoint):
            sdc_cdf(t, (0.3, 1))
        with pytest.raises(OffGridPoint):
            sdc_cdf(t, (1.5, 1))

    def test_matches_brute_force(self, rng):
        t, ts, _ = random_table(rng, n_min=3, n_max=4)
        rows = ts.indices.tolist()
        grid = cdf_grid(t)
        for idx in itertools.product(*(range(m + 1) for m in t.bins)):
            expected = brute_cdf(rows, idx)
            assert grid[idx] == expected
        for _ in range(25):
            idx = [int(rng.integers(m + 1)) for m in t.bins]
            point = [Fraction(j, m) for j, m in zip(idx, t.bins)]
            assert sdc_cdf(t, point, exact=True) == Fraction(brute_cdf(rows, idx), t.total)


class TestCellMass:
    def test_lookup_and_missing(self):
        t = build_sdc(ts_from_rows([(1, 1), (1, 1), (2, 2)], (2, 2)))
        assert cell_mass(t, (1, 1), exact=True) == Fraction(2, 3)
        assert cell_mass(t, (1, 2)) == 0

    def test_sums_to_one(self, rng):
        t, _, _ = random_table(rng, n_max=3)
        total = sum(cell_mass(t, c, exact=True) for c in itertools.product(*(range(1, m + 1) for m in t.bins)))
        assert total == 1

    def test_off_grid(self):
        t = build_sdc(ts_from_rows([(1, 1)], (2, 2)))
        with pytest.raises(OffGridPoint):
            cell_mass(t, (0, 1))
        with pytest.raises(OffGridPoint):
            cell_mass(t, (1, 3))


class TestTableType:
    def test_from_counts_mapping_and_dense_agree(self):
        dense = np.array([[2, 0], [1, 3]])
        a = SdcTable.from_counts((0, 1), (2, 2), dense)
        b = SdcTable.from_counts((0, 1), (2, 2), {(2, 2): 3, (1, 1): 2, (2, 1): 1})
        assert a == b
        np.testing.assert_array_equal(a.dense(), dense)

    def test_unsorted_duplicate_rows_are_merged(self):
        t = SdcTable((0,), (3,), [[3], [1], [3]], [1, 2, 4])
        assert t.cells() == {(1,): 2, (3,): 5}
        assert t.index[:, 0].tolist() == [1, 3]

    def test_json_roundtrip(self, rng):
        t, _, _ = random_table(rng)
        d = json.loads(json.dumps(t.to_dict()))
        assert set(d) == {"scope", "bins", "cells", "N"}
        assert SdcTable.from_dict(d) == t

    def test_total_mismatch(self):
        with pytest.raises(ValueError):
            SdcTable((0,), (2,), [[1]], [1], total=2)

    def test_immutable(self, rng):
        t, _, _ = random_table(rng)
        with pytest.raises(ValueError):
            t.counts[0] = 99


@st.composite
def tables(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_table(np.random.default_rng(seed), n_min=2)[0]


@given(tables(), st.data())
@settings(max_examples=60, deadline=None)
def test_marginalize_nests(t, data):
    d1 = data.draw(st.lists(st.sampled_from(t.scope), min_size=1, unique=True))
    d2 = data.draw(st.lists(st.sampled_from(sorted(d1)), min_size=1, unique=True))
    assert marginalize(marginalize(t, d1), d2) == marginalize(t, d2)


@given(tables())
@settings(max_examples=60, deadline=None)
def test_cdf_grid_copula_axioms(t):
    grid = cdf_grid(t)
    N = t.total
    for axis, m in enumerate(t.bins):
        assert np.all(np.diff(grid, axis=axis) >= 0)
        assert np.all(np.take(grid, 0, axis=axis) == 0)
        section = grid[tuple(slice(None) if a == axis else -1 for a in range(t.d))]
        assert all(section[j] * m == N * j for j in range(m + 1))
