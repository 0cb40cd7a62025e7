from __future__ import annotations

from typing import Sequence

import numpy as np

from dfaudit.bias import SLICES, BiasReport, BiasRow, ErrorPair, ErrorSlice
from dfaudit.model import AnnotationTable, AttributeRegistry, AuditDataset, PredictionSet


def registry(n: int) -> AttributeRegistry:
    return AttributeRegistry.from_names([f"attr{i}" for i in range(n)])


def table(labels, names: Sequence[str] | None = None, ids: Sequence[str] | None = None) -> AnnotationTable:
    labels = np.asarray(labels, dtype=np.int8)
    if labels.ndim == 1:
        labels = labels[:, None]
    reg = AttributeRegistry.from_names(names) if names else registry(labels.shape[1])
    ids = ids or [f"s{i:05d}" for i in range(labels.shape[0])]
    return AnnotationTable(reg, ids, labels)


def dataset(labels, truth, predicted, names: Sequence[str] | None = None) -> AuditDataset:
    t = table(labels, names)
    return AuditDataset(t, PredictionSet(t.sample_ids, np.asarray(truth), np.asarray(predicted)))


def pair(pos_pct: float, neg_pct: float) -> ErrorPair:
    return ErrorPair(pos_pct / 100.0, neg_pct / 100.0, 100, 100)


def row_from_percent(
    attribute: str, data: dict[str, tuple[float, float]], control: dict[str, tuple[float, float]]
) -> BiasRow:
    """Row from printed percentages keyed by slice name; a missing slice copies the balanced one."""
    def pairs(src):
        out = {}
        for s in SLICES:
            v = src.get(s.value, src["balanced"])
            out[s] = pair(*v)
        return out

    return BiasRow.from_pairs(attribute, pairs(data), pairs(control))


def report(*rows: BiasRow) -> BiasReport:
    return BiasReport(list(rows), {"seed": 0, "reps": 1})


__all__ = ["registry", "table", "dataset", "pair", "row_from_percent", "report", "ErrorSlice"]


def brute_pearson(labels: np.ndarray, policy: str = "defined-pairs") -> np.ndarray:
    """Double-loop textbook Pearson, independent of the co-occurrence kernel."""
    n, k = labels.shape
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(k):
            x = labels[:, i].astype(float)
            y = labels[:, j].astype(float)
            if policy == "defined-pairs":
                keep = (x != 0) & (y != 0)
                x, y = x[keep], y[keep]
            if len(x) < 2:
                continue
            mx, my = x.mean(), y.mean()
            sxx = ((x - mx) ** 2).sum()
            syy = ((y - my) ** 2).sum()
            if sxx == 0 or syy == 0:
                continue
            out[i, j] = ((x - mx) * (y - my)).sum() / np.sqrt(sxx * syy)
    return out


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    """Log one acceptance verdict; conftest prints the collected lines at the end."""
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"ACCEPTANCE criterion {criterion}: {'PASS' if ok else 'FAIL'}: {detail}")
