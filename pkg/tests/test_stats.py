from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dfaudit.errors import EmptyTable
from dfaudit.model import DEFAULT_REGISTRY
from dfaudit.stats import (
    CorrelationMatrix,
    CorrelationPolicy,
    attribute_distribution,
    count_marks,
    cross_dataset_exclusion,
    pearson_correlations,
    support_filter,
    top_correlations,
)
from dfaudit.synth import PlantedPair, SynthConfig, generate_population

from helpers import brute_pearson, table

DATA = Path(__file__).parent / "data"


def test_distribution_male_example():
    labels = np.array([1] * 7015 + [-1] * 2985)
    pos, neg, und = attribute_distribution(table(labels)).of("attr0")
    assert round(pos, 2) == 70.15 and round(neg, 2) == 29.85 and und == 0


def test_distribution_all_undefined_and_counts():
    assert attribute_distribution(table(np.zeros(5))).of("attr0") == (0.0, 0.0, 100.0)
    assert attribute_distribution(table([1, 1, -1, 0])).of("attr0") == (50.0, 25.0, 25.0)
    with pytest.raises(EmptyTable):
        attribute_distribution(table(np.zeros((0, 2))))


@given(arrays(np.int8, st.tuples(st.integers(1, 50), st.integers(1, 5)), elements=st.integers(-1, 1)))
def test_distribution_sums_to_100(labels):
    pct = attribute_distribution(table(labels)).percentages
    assert np.all(pct >= 0)
    np.testing.assert_allclose(pct.sum(axis=1), 100.0, atol=1e-9)


def test_pearson_examples(backend):
    a = [1, 1, -1, -1]
    b = [1, -1, 1, -1]
    m = pearson_correlations(table(np.array([a, b, [-x for x in a]]).T))
    assert m.pearson[0, 0] == 1.0
    assert m.pearson[0, 1] == pytest.approx(0.0, abs=1e-15)
    assert m.pearson[0, 2] == -1.0
    assert m.support[0, 1] == 4


def test_pearson_undefined_pairs(backend):
    m = pearson_correlations(table([[1, 0, 1], [1, 1, -1], [0, -1, 1]]))
    assert np.isnan(m.pearson[0, 1])  # one jointly defined sample
    assert np.isnan(m.pearson[0, 0])  # constant column
    assert m.pearson[2, 2] == 1.0


random_tables = st.integers(1, 200).flatmap(
    lambda n: st.integers(1, 10).flatmap(lambda k: arrays(np.int8, (n, k), elements=st.integers(-1, 1)))
)


@given(random_tables, st.sampled_from(["defined-pairs", "zero-as-value"]))
def test_pearson_matches_bruteforce(labels, policy):
    got = pearson_correlations(table(labels), policy).pearson
    want = brute_pearson(labels, policy)
    np.testing.assert_array_equal(np.isnan(got), np.isnan(want))
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12, equal_nan=True)
    np.testing.assert_array_equal(got, got.T)


@given(arrays(np.int8, st.tuples(st.integers(2, 60), st.integers(1, 6)), elements=st.sampled_from([-1, 1])))
def test_policies_agree_without_undefined(labels):
    a = pearson_correlations(table(labels), CorrelationPolicy.DEFINED_PAIRS_ONLY).pearson
    b = pearson_correlations(table(labels), CorrelationPolicy.ZERO_AS_VALUE).pearson
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15, equal_nan=True)


def _matrix(r: list[list[float]]) -> CorrelationMatrix:
    r = np.array(r, dtype=float)
    names = tuple(f"attr{i}" for i in range(len(r)))
    return CorrelationMatrix(names, r, np.full(r.shape, 10), CorrelationPolicy.DEFINED_PAIRS_ONLY)


def test_top_single_pair():
    top = top_correlations(_matrix([[1, 0.8], [0.8, 1]]), 20)
    assert [(p.attr_a, p.attr_b, p.pearson) for p in top.positive] == [("attr0", "attr1", 0.8)]
    assert top.negative == []


def test_top_sort_oracle_with_ties():
    r = [[1, 0.5, -0.2, 0.5], [0.5, 1, 0.9, -0.2], [-0.2, 0.9, 1, np.nan], [0.5, -0.2, np.nan, 1]]
    top = top_correlations(_matrix(r), 2)
    pairs = [(i, j, r[i][j]) for i in range(4) for j in range(i + 1, 4) if not np.isnan(r[i][j])]
    oracle_pos = sorted((p for p in pairs if p[2] > 0), key=lambda p: (-p[2], p[0], p[1]))[:2]
    oracle_neg = sorted((p for p in pairs if p[2] < 0), key=lambda p: (p[2], p[0], p[1]))[:2]
    assert [(p.attr_a, p.attr_b) for p in top.positive] == [(f"attr{i}", f"attr{j}") for i, j, _ in oracle_pos]
    assert [(p.attr_a, p.attr_b) for p in top.negative] == [(f"attr{i}", f"attr{j}") for i, j, _ in oracle_neg]
    with pytest.raises(ValueError):
        top_correlations(_matrix(r), 0)


def test_planted_mustache_goatee_ranks_first():
    cfg = SynthConfig(
        n_samples=20_000,
        seed=11,
        planted_pairs=(PlantedPair("Mustache", "Goatee", 0.9),),
    )
    t, _, _ = generate_population(cfg)
    best = top_correlations(pearson_correlations(t), 20).positive[0]
    assert {best.attr_a, best.attr_b} == {"Mustache", "Goatee"}


def test_support_filter_examples():
    col = lambda pos, neg: [1] * pos + [-1] * neg + [0] * (5100 - pos - neg)
    t = table(np.array([col(99, 5000), col(100, 100), col(0, 5000)]).T)
    res = support_filter(t, 100)
    assert res.kept.tolist() == [False, True, False]
    assert res.positive_count.tolist() == [99, 100, 0]
    with pytest.raises(ValueError):
        support_filter(t, 0)


@given(arrays(np.int8, st.tuples(st.integers(0, 30), st.just(3)), elements=st.integers(-1, 1)),
       arrays(np.int8, st.tuples(st.integers(0, 30), st.just(3)), elements=st.integers(-1, 1)),
       st.integers(1, 10))
def test_support_filter_monotone(a, b, k):
    before = support_filter(table(a), k).kept
    after = support_filter(table(np.vstack([a, b])), k).kept
    assert not np.any(before & ~after)


def test_cross_dataset_exclusion_examples():
    res = cross_dataset_exclusion({"Rosy Cheeks": 5, "Bald": 2, "Brown Eyes": 0}, max_marks=2)
    assert res.kept == ["Bald"]
    assert set(res.excluded) == {"Rosy Cheeks", "Brown Eyes"}
    assert res.excluded["Brown Eyes"] == "override"
    with pytest.raises(ValueError):
        cross_dataset_exclusion({"Bald": 0}, keep=["Brown Eyes"])


def test_count_marks():
    t1 = table(np.array([[1] * 100 + [-1] * 100, [1] * 200]).T)
    t2 = table(np.array([[1] * 10 + [-1] * 190, [1] * 100 + [-1] * 100]).T)
    assert count_marks([support_filter(t1), support_filter(t2)]) == {"attr0": 1, "attr1": 1}


def test_curation_fixture_is_consistent():
    cur = json.loads((DATA / "curation.json").read_text())
    assert list(cur["marks"]) == DEFAULT_REGISTRY.names
    assert len(cur["kept"]) == 31
    excluded = set(cur["excluded_insufficient_support"]) | set(cur["excluded_low_accuracy"])
    assert excluded.isdisjoint(cur["kept"]) and len(excluded) + 31 == 47
