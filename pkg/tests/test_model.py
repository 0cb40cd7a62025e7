from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfaudit.errors import DuplicateSampleId, MismatchedIds, UnknownAttribute
from dfaudit.model import (
    DEFAULT_REGISTRY,
    AnnotationTable,
    AttributeRegistry,
    AuditDataset,
    Category,
    JoinPolicy,
    PredictionRecord,
    PredictionSet,
    SampleClass,
    TernaryLabel,
    join,
    validate_annotations,
)

from helpers import registry, table


def test_ternary_values():
    assert [int(v) for v in TernaryLabel] == [-1, 0, 1]


def test_default_registry_shape():
    names = DEFAULT_REGISTRY.names
    assert len(names) == 47 and len(set(names)) == 47
    assert names[0] == "Male" and names[-1] == "Attractive"
    assert DEFAULT_REGISTRY["Brown Eyes"].excluded_low_accuracy
    assert DEFAULT_REGISTRY["Bags Under Eyes"].excluded_low_accuracy
    assert sum(a.excluded_low_accuracy for a in DEFAULT_REGISTRY) == 2
    assert DEFAULT_REGISTRY["Goatee"].category is Category.BEARD


def test_registry_errors_and_subset():
    with pytest.raises(UnknownAttribute):
        DEFAULT_REGISTRY.index("Tail")
    with pytest.raises(ValueError):
        AttributeRegistry.from_names(["a", "a"])
    sub = DEFAULT_REGISTRY.subset(["Goatee", "Male"])
    assert sub.names == ["Male", "Goatee"]


def test_table_validates_on_construction():
    reg = registry(2)
    with pytest.raises(ValueError):
        AnnotationTable(reg, ["a"], np.array([[1, 2]], dtype=np.int8))
    with pytest.raises(ValueError):
        AnnotationTable(reg, ["a"], np.array([[1, 0, 1]], dtype=np.int8))
    with pytest.raises(DuplicateSampleId):
        AnnotationTable(reg, ["a", "a"], np.zeros((2, 2), dtype=np.int8))


def test_table_is_immutable():
    t = table([[1, -1], [0, 1]])
    with pytest.raises(ValueError):
        t.labels[0, 0] = 0
    assert t.row("s00001").tolist() == [0, 1]
    assert t.column("attr1").tolist() == [-1, 1]


def test_validate_well_formed_is_empty():
    rows = [("a", [1, 0]), ("b", [-1, -1]), ("c", [0, 0])]
    assert len(validate_annotations(rows, registry(2))) == 0
    assert not validate_annotations(table([[1, 0], [0, 0]]), registry(2))


def test_validate_invalid_label_names_row():
    rep = validate_annotations([("a", [1, 0]), ("b", [2, 0])], registry(2))
    (f,) = rep.of_kind("invalid label")
    assert (f.row, f.sample_id) == (1, "b")


def test_validate_duplicate_id_against_linear_scan():
    rows = [("v001_f009", [1]), ("v001_f010", [0]), ("v001_f011", [-1]), ("v001_f010", [1])]
    seen, oracle = set(), 0
    for sid, _ in rows:
        oracle += sid in seen
        seen.add(sid)
    rep = validate_annotations(rows, registry(1))
    dups = rep.of_kind("duplicate id")
    assert len(dups) == oracle == 1
    assert dups[0].sample_id == "v001_f010"


def test_validate_wrong_arity_and_never_raises():
    rep = validate_annotations([("a", [1]), ("b", [1, 0, 0]), ("c", ["x", None])], registry(2))
    assert len(rep.of_kind("wrong arity")) == 2
    assert len(rep.of_kind("invalid label")) == 2


def _preds(ids, truth=None):
    truth = np.zeros(len(ids), dtype=np.uint8) if truth is None else truth
    return PredictionSet(ids, truth, truth)


def test_join_strict_identical():
    t = table(np.zeros((5, 1)))
    ds = join(t, _preds(t.sample_ids), JoinPolicy.STRICT)
    assert len(ds) == 5


def test_join_intersect_subset():
    t = table(np.zeros((5, 1)))
    ds = join(t, _preds(t.sample_ids[1:4]), "intersect")
    assert len(ds) == 3
    assert ds.sample_ids == t.sample_ids[1:4]


def test_join_strict_extra_id():
    t = table(np.zeros((5, 1)))
    ids = list(t.sample_ids) + ["extra"]
    oracle = len(set(ids) ^ set(t.sample_ids))
    with pytest.raises(MismatchedIds) as exc:
        join(t, _preds(ids), JoinPolicy.STRICT)
    assert exc.value.count == oracle == 1


def test_join_follows_annotation_order():
    t = table([[1], [0], [-1]])
    p = PredictionSet(list(reversed(t.sample_ids)), np.array([1, 0, 0]), np.array([1, 1, 0]))
    ds = join(t, p, "strict")
    assert ds.truth.tolist() == [0, 0, 1]
    assert ds.predicted.tolist() == [0, 1, 1]


@given(st.sets(st.integers(0, 30)), st.sets(st.integers(0, 30)))
def test_join_intersect_idempotent(a_ids, p_ids):
    a_ids, p_ids = sorted(a_ids), sorted(p_ids)
    t = table(np.zeros((len(a_ids), 1)), ids=[f"x{i}" for i in a_ids])
    once = join(t, _preds([f"x{i}" for i in p_ids]), "intersect")
    twice = join(once.annotations, once.predictions, "intersect")
    assert once == twice
    assert set(once.sample_ids) == {f"x{i}" for i in set(a_ids) & set(p_ids)}


def test_outcome_codes():
    t = table([[1]] * 4)
    ds = AuditDataset(t, PredictionSet(t.sample_ids, np.array([0, 0, 1, 1]), np.array([0, 1, 1, 0])))
    assert ds.outcome_codes().tolist() == [0, 1, 2, 3]


def test_prediction_records_and_threshold():
    recs = [
        PredictionRecord("a", SampleClass.FAKE, SampleClass.PRISTINE, 0.7),
        PredictionRecord("b", SampleClass.PRISTINE, SampleClass.PRISTINE, 0.5),
        PredictionRecord("c", SampleClass.PRISTINE, SampleClass.FAKE, None),
    ]
    ps = PredictionSet.from_records(recs, score_threshold=0.5)
    assert ps.predicted.tolist() == [1, 1, 1]
    assert [r.score for r in ps] == [0.7, 0.5, None]
