from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfaudit.bias import (
    SLICES,
    BiasReport,
    ControlGroupSpec,
    ErrorPair,
    ErrorSlice,
    RPKind,
    RPValue,
    audit,
    corrected_relative_performance,
    error_pair,
    group_error_rates,
    pdrp_ddrp,
    relative_performance,
    sample_control_groups,
    slice_error,
)
from dfaudit.errors import DegenerateGroup, InsufficientData
from dfaudit.model import DEFAULT_REGISTRY, AuditDataset
from dfaudit.stats import support_filter
from dfaudit.synth import SynthConfig, generate_population

from helpers import dataset, pair

rates = st.floats(0.0, 1.0)
pos_rates = st.floats(1e-4, 1.0)


def test_balanced_from_slices_table_example():
    # printed Male/Positive row: fake 6.87%, pristine 23.16%, balanced 15.01%
    counts = np.array([7684, 2316, 9313, 687])  # pristine right/wrong, fake right/wrong
    assert slice_error(counts, ErrorSlice.FAKE) == pytest.approx(0.0687)
    assert slice_error(counts, ErrorSlice.PRISTINE) == pytest.approx(0.2316)
    assert slice_error(counts, ErrorSlice.BALANCED) == pytest.approx(0.15015, abs=1e-12)


def test_six_sample_fixture():
    labels = [1, 1, 1, 1, 1, 1, -1, -1]
    truth = [1, 1, 1, 0, 0, 0, 1, 0]
    pred = [0, 1, 1, 1, 0, 0, 1, 0]
    ds = dataset(labels, truth, pred)
    third = 1 / 3
    assert group_error_rates(ds, "attr0", ErrorSlice.FAKE).err_pos == pytest.approx(third)
    assert group_error_rates(ds, "attr0", ErrorSlice.PRISTINE).err_pos == pytest.approx(third)
    bal = group_error_rates(ds, "attr0", "balanced")
    assert bal.err_pos == pytest.approx(third) and bal.err_neg == 0.0
    assert (bal.n_pos, bal.n_neg) == (6, 2)


def test_perfect_predictor_all_zero():
    ds = dataset([1, 1, -1, -1, 0], [1, 0, 1, 0, 1], [1, 0, 1, 0, 1])
    for s in SLICES:
        p = group_error_rates(ds, "attr0", s)
        assert p.err_pos == p.err_neg == 0.0


def test_degenerate_group_raises():
    ds = dataset([1, 1, -1, -1], [1, 1, 1, 0], [1, 1, 1, 0])
    with pytest.raises(DegenerateGroup) as exc:
        group_error_rates(ds, "attr0", ErrorSlice.BALANCED)
    assert "positive" in str(exc.value) and "pristine" in str(exc.value)
    assert group_error_rates(ds, "attr0", ErrorSlice.FAKE).err_pos == 0.0


def test_rp_examples():
    rp = relative_performance(pair(15.01, 7.79))
    assert rp.kind is RPKind.FINITE
    assert abs(100 * rp.value - (-92.70)) < 0.1
    assert round(100 * rp.value, 2) == -92.68
    assert relative_performance(pair(5, 5)).value == 0.0
    assert relative_performance(pair(12.26, 0)).kind is RPKind.NEG_GROUP_PERFECT
    assert relative_performance(pair(0, 0)).kind is RPKind.BOTH_PERFECT
    assert relative_performance(pair(0, 3)) == RPValue.finite(1.0)
    assert relative_performance(None).kind is RPKind.DEGENERATE


def test_crp_table_example():
    crp = corrected_relative_performance(pair(15.01, 7.79), pair(9.34, 10.09))
    assert 100 * crp.value == pytest.approx(9.34 / 10.09 * 100 - 15.01 / 7.79 * 100, abs=1e-9)
    assert round(100 * crp.value, 2) == -100.12


def test_ddrp_wearing_hat_example():
    ddrp = corrected_relative_performance(pair(0.00, 3.46), pair(5.00, 3.63))
    assert round(100 * ddrp.value, 1) == 137.7


def test_crp_zero_when_pairs_equal():
    p = pair(12.0, 8.0)
    assert corrected_relative_performance(p, p).value == 0.0


def test_crp_sentinel_side():
    good, bad = pair(10, 5), pair(10, 0)
    assert corrected_relative_performance(bad, good) == RPValue(RPKind.NEG_GROUP_PERFECT, None, "data")
    assert corrected_relative_performance(good, pair(0, 0)) == RPValue(RPKind.BOTH_PERFECT, None, "control")
    assert corrected_relative_performance(bad, pair(0, 0)).side == "both"
    assert corrected_relative_performance(None, good).kind is RPKind.DEGENERATE


@given(rates, pos_rates, rates, pos_rates)
def test_crp_equals_rp_difference(dp, dn, cp, cn):
    d, c = ErrorPair(dp, dn, 1, 1), ErrorPair(cp, cn, 1, 1)
    crp = corrected_relative_performance(d, c).value
    diff = relative_performance(d).value - relative_performance(c).value
    assert abs(crp - diff) <= 1e-12 * max(1.0, abs(dp / dn), abs(cp / cn))


@given(pos_rates, pos_rates)
def test_group_swap(ep, en):
    rp = relative_performance(ErrorPair(ep, en, 1, 1)).value
    swapped = relative_performance(ErrorPair(en, ep, 1, 1)).value
    assert swapped == pytest.approx(1 - 1 / (1 - rp), rel=1e-12, abs=1e-12)
    assert (ep < en) == (rp > 0)


@given(st.integers(1, 60), st.integers(1, 60), st.integers(0, 2**64 - 1), st.integers(1, 4))
def test_control_sizes_match(n_pos, n_neg, seed, reps):
    labels = [1] * n_pos + [-1] * n_neg + [0] * 7
    n = len(labels)
    ds = dataset(labels, [i % 2 for i in range(n)], [0] * n)
    draws = sample_control_groups(ds, "attr0", ControlGroupSpec(seed, reps))
    assert len(draws) == reps
    for pos, neg in draws:
        assert len(pos) == n_pos and len(neg) == n_neg
        assert len(set(pos.tolist())) == n_pos and len(set(neg.tolist())) == n_neg
        assert pos.min() >= 0 and max(pos.max(), neg.max()) < n


def test_control_sizes_example():
    labels = [1] * 1200 + [-1] * 300 + [0] * 500
    ds = dataset(labels, [i % 2 for i in range(2000)], [0] * 2000)
    ((pos, neg),) = sample_control_groups(ds, "attr0", ControlGroupSpec(7))
    assert (len(pos), len(neg)) == (1200, 300)


def test_all_positive_control_is_permutation():
    ds = dataset([1] * 10, [0, 1] * 5, [0] * 10)
    ((pos, neg),) = sample_control_groups(ds, "attr0")
    assert sorted(pos.tolist()) == list(range(10)) and len(neg) == 0
    with pytest.raises(DegenerateGroup):
        sample_control_groups(dataset([0] * 4, [0, 1] * 2, [0] * 4), "attr0")


def test_insufficient_data_with_replacement_off():
    from dfaudit.bias import _draw

    with pytest.raises(InsufficientData):
        _draw(np.random.default_rng(0), 3, 4, replacement=False)
    assert len(_draw(np.random.default_rng(0), 3, 4, replacement=True)) == 4


def test_exhaustive_control_expectation_four_samples():
    # population of 4 with one misclassification: error 25%
    codes = np.array([0, 0, 1, 0])
    errors = [codes[list(c)].mean() for c in itertools.combinations(range(4), 2)]
    assert abs(np.mean(errors) - 0.25) <= 1e-12


def test_control_stream_keyed_by_attribute_index():
    rng = np.random.default_rng(4)
    lab = rng.integers(-1, 2, (300, 3))
    ds = dataset(lab, rng.integers(0, 2, 300), rng.integers(0, 2, 300))
    full = audit(ds, spec=ControlGroupSpec(5))
    part = audit(ds, kept=["attr2"], spec=ControlGroupSpec(5))
    assert part.rows[0].to_dict() == full.rows[2].to_dict()


def test_pdrp_ddrp_same_draw_as_audit():
    rng = np.random.default_rng(8)
    ds = dataset(rng.integers(-1, 2, 400), rng.integers(0, 2, 400), rng.integers(0, 2, 400))
    spec = ControlGroupSpec(3)
    row = audit(ds, spec=spec).rows[0]
    assert pdrp_ddrp(ds, "attr0", spec) == (row.pdrp, row.ddrp)


def test_pdrp_ddrp_perfect_predictor():
    truth = [0, 1] * 10
    ds = dataset([1, -1] * 5 + [-1, 1] * 5, truth, truth)
    assert pdrp_ddrp(ds, "attr0") == (
        RPValue(RPKind.BOTH_PERFECT, None, "both"),
        RPValue(RPKind.BOTH_PERFECT, None, "both"),
    )


def test_pdrp_equals_ddrp_when_slices_coincide():
    d, c = pair(12, 6), pair(9, 9)
    assert corrected_relative_performance(d, c) == corrected_relative_performance(d, c)


def _synth_dataset(n=5000, seed=1, **kw):
    t, p, _ = generate_population(SynthConfig(n_samples=n, seed=seed, **kw))
    return AuditDataset(t, p)


def test_audit_31_rows_registry_order():
    ds = _synth_dataset()
    kept = [n for i, n in enumerate(DEFAULT_REGISTRY.names) if i % 3 != 0][:31]
    rep = audit(ds, kept=list(reversed(kept)))
    assert [r.attribute for r in rep.rows] == kept
    assert len(rep.rows) == 31


def test_audit_empty_kept():
    rep = audit(_synth_dataset(200), kept=[])
    assert rep.rows == []
    assert json.loads(rep.to_json())["rows"] == [] and "seed" in rep.provenance


def test_audit_deterministic_and_roundtrips():
    ds = _synth_dataset()
    kept = support_filter(ds.annotations, 100)
    a = audit(ds, kept=kept, spec=ControlGroupSpec(42, reps=3)).to_json()
    b = audit(ds, kept=kept, spec=ControlGroupSpec(42, reps=3)).to_json()
    assert a == b
    assert BiasReport.from_json(a).to_json() == a
    c = audit(ds, kept=kept, spec=ControlGroupSpec(43, reps=3)).to_json()
    assert c != a


def test_audit_schema():
    ds = _synth_dataset(2000)
    doc = json.loads(audit(ds, kept=["Male"], spec=ControlGroupSpec(1, reps=2)).to_json())
    row = doc["rows"][0]
    for src in ("data", "control"):
        for s in ("balanced", "fake", "pristine"):
            assert set(row["errors"][src][s]) >= {"pos", "neg"}
    for key in ("rp_data", "rp_control", "crp", "pdrp", "ddrp"):
        assert row[key]["kind"] in ("finite", "neg_group_perfect", "both_perfect", "degenerate")
    assert set(row["control_std"]) == {"balanced", "fake", "pristine"}
    assert doc["provenance"]["reps"] == 2


def test_audit_reps_mean_and_std():
    rng = np.random.default_rng(2)
    ds = dataset(rng.integers(-1, 2, 500), rng.integers(0, 2, 500), rng.integers(0, 2, 500))
    spec = ControlGroupSpec(9, reps=4)
    row = audit(ds, spec=spec).rows[0]
    codes = ds.outcome_codes()
    per = []
    for pos, neg in sample_control_groups(ds, "attr0", spec):
        p = error_pair(np.bincount(codes[pos], minlength=4), np.bincount(codes[neg], minlength=4), ErrorSlice.FAKE)
        per.append((p.err_pos, p.err_neg))
    per = np.array(per)
    got = row.control[ErrorSlice.FAKE]
    assert got.err_pos == pytest.approx(per[:, 0].mean(), abs=1e-15)
    assert row.control_std[ErrorSlice.FAKE][1] == pytest.approx(per[:, 1].std(ddof=1), abs=1e-15)


def test_audit_degenerate_row_does_not_abort():
    lab = np.array([[1, 1], [1, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]])
    truth = [1, 1, 0, 0, 1, 1]  # the -1 group of attr0 has no pristine samples
    ds = dataset(lab, truth, truth)
    rep = audit(ds)
    r0, r1 = rep.rows
    assert r0.data[ErrorSlice.BALANCED] is None
    assert r0.rp_data.kind is RPKind.DEGENERATE and r0.crp.kind is RPKind.DEGENERATE
    assert "negative group" in r0.degenerate["data.balanced"]
    assert r0.ddrp.kind is not RPKind.DEGENERATE
    assert r1.data[ErrorSlice.BALANCED] is not None
    BiasReport.from_json(rep.to_json())


def test_audit_with_replacement_runs():
    ds = _synth_dataset(1000)
    rep = audit(ds, kept=["Male"], spec=ControlGroupSpec(1, replacement=True))
    assert rep.provenance["replacement"] is True


def test_control_spec_validation():
    with pytest.raises(ValueError):
        ControlGroupSpec(reps=0)
    with pytest.raises(ValueError):
        ControlGroupSpec(seed=-1)


def test_control_unbiased_statistically():
    # attribute-independent errors: mean control error over many reps ~ population error
    ds = _synth_dataset(4000, seed=3, attributes=("Male",))
    pop = ds.outcome_codes()
    pop_err = (np.count_nonzero(pop == 1) / np.count_nonzero(pop < 2) + np.count_nonzero(pop == 3) / np.count_nonzero(pop >= 2)) / 2
    row = audit(ds, spec=ControlGroupSpec(0, reps=200)).rows[0]
    c = row.control[ErrorSlice.BALANCED]
    assert abs(c.err_pos - pop_err) < 0.003 and abs(c.err_neg - pop_err) < 0.003
