"""Annotation-side analytics: label distributions, Pearson correlations, curation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .errors import EmptyTable
from .model import LOW_ACCURACY_ATTRIBUTES, AnnotationTable


@dataclass(frozen=True)
class DistributionSummary:
    names: tuple[str, ...]
    counts: np.ndarray  # (attributes, 3): positive, negative, undefined
    n_rows: int

    @property
    def percentages(self) -> np.ndarray:
        return 100.0 * self.counts / self.n_rows

    def of(self, name: str) -> tuple[float, float, float]:
        pos, neg, und = self.percentages[self.names.index(name)]
        return float(pos), float(neg), float(und)

    def to_dict(self) -> dict:
        pct = self.percentages
        return {
            "n_rows": self.n_rows,
            "attributes": [
                {
                    "attribute": name,
                    "positive": int(self.counts[i, 0]),
                    "negative": int(self.counts[i, 1]),
                    "undefined": int(self.counts[i, 2]),
                    "positive_pct": float(pct[i, 0]),
                    "negative_pct": float(pct[i, 1]),
                    "undefined_pct": float(pct[i, 2]),
                }
                for i, name in enumerate(self.names)
            ],
        }


def label_counts(table: AnnotationTable) -> np.ndarray:
    """``(attributes, 3)`` counts of +1, -1, 0 per column."""
    lab = table.labels
    pos = np.count_nonzero(lab == 1, axis=0)
    neg = np.count_nonzero(lab == -1, axis=0)
    return np.stack([pos, neg, len(table) - pos - neg], axis=1).astype(np.int64)


def attribute_distribution(table: AnnotationTable) -> DistributionSummary:
    if len(table) == 0:
        raise EmptyTable("cannot summarise an empty annotation table")
    return DistributionSummary(tuple(table.registry.names), label_counts(table), len(table))


class CorrelationPolicy(enum.Enum):
    DEFINED_PAIRS_ONLY = "defined-pairs"
    ZERO_AS_VALUE = "zero-as-value"


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson coefficients; NaN marks pairs that are not defined."""

    names: tuple[str, ...]
    pearson: np.ndarray
    support: np.ndarray
    policy: CorrelationPolicy

    def get(self, a: str, b: str) -> float:
        return float(self.pearson[self.names.index(a), self.names.index(b)])


def _pearson_from_sums(n, sx, sy, sxy, sxx, syy):
    n = n.astype(np.float64)
    num = n * sxy - sx * sy
    va = n * sxx - sx * sx
    vb = n * syy - sy * sy
    ok = (n >= 2) & (va > 0) & (vb > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(ok, num / np.sqrt(va * vb), np.nan)
    return np.clip(r, -1.0, 1.0)


def pearson_correlations(
    table: AnnotationTable, policy: CorrelationPolicy | str = CorrelationPolicy.DEFINED_PAIRS_ONLY
) -> CorrelationMatrix:
    """Pairwise Pearson over the +/-1 encoding.

    ``defined-pairs`` uses only samples where both attributes are defined;
    ``zero-as-value`` treats undefined cells as the value 0. Pairs with fewer
    than two samples or zero variance are NaN.
    """
    policy = CorrelationPolicy(policy)
    if len(table) == 0:
        raise EmptyTable("cannot correlate an empty annotation table")
    xx, xd, dd = (m.astype(np.float64) for m in _kernels.cooccurrence(table.labels))
    a = len(table.registry)
    if policy is CorrelationPolicy.DEFINED_PAIRS_ONLY:
        support = dd.astype(np.int64)
        # sum over jointly defined samples: x_a given b is xd[a, b], x_b is xd[b, a]
        r = _pearson_from_sums(support, xd, xd.T, xx, dd, dd)
    else:
        n = len(table)
        support = np.full((a, a), n, dtype=np.int64)
        sx = np.diag(xd)
        sxx = np.diag(dd)
        r = _pearson_from_sums(support, sx[:, None], sx[None, :], xx, sxx[:, None], sxx[None, :])
    diag = np.arange(a)
    r[diag, diag] = np.where(np.isnan(r[diag, diag]), np.nan, 1.0)
    r = np.triu(r) + np.triu(r, 1).T  # exact symmetry
    return CorrelationMatrix(tuple(table.registry.names), r, support, policy)


@dataclass(frozen=True)
class CorrelatedPair:
    attr_a: str
    attr_b: str
    pearson: float
    support: int


@dataclass(frozen=True)
class TopCorrelations:
    positive: list[CorrelatedPair]
    negative: list[CorrelatedPair]


def defined_pairs(matrix: CorrelationMatrix) -> list[tuple[int, int]]:
    """Off-diagonal ``(i, j)``, ``i < j``, with a defined coefficient, in registry order."""
    i, j = np.triu_indices(len(matrix.names), k=1)
    ok = ~np.isnan(matrix.pearson[i, j])
    return list(zip(i[ok].tolist(), j[ok].tolist()))


def top_correlations(matrix: CorrelationMatrix, k: int) -> TopCorrelations:
    """Up to ``k`` strongest positive and ``k`` strongest negative pairs.

    Ties keep registry order of the pair.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pairs = defined_pairs(matrix)
    r = matrix.pearson

    def make(ij: tuple[int, int]) -> CorrelatedPair:
        i, j = ij
        return CorrelatedPair(matrix.names[i], matrix.names[j], float(r[i, j]), int(matrix.support[i, j]))

    pos = sorted((p for p in pairs if r[p] > 0), key=lambda p: (-r[p], p))
    neg = sorted((p for p in pairs if r[p] < 0), key=lambda p: (r[p], p))
    return TopCorrelations([make(p) for p in pos[:k]], [make(p) for p in neg[:k]])


@dataclass(frozen=True)
class SupportFilterResult:
    names: tuple[str, ...]
    positive_count: np.ndarray
    negative_count: np.ndarray
    min_count: int

    @property
    def kept(self) -> np.ndarray:
        return (self.positive_count >= self.min_count) & (self.negative_count >= self.min_count)

    def kept_names(self) -> list[str]:
        return [n for n, k in zip(self.names, self.kept) if k]

    def excluded_names(self) -> list[str]:
        return [n for n, k in zip(self.names, self.kept) if not k]

    def is_kept(self, name: str) -> bool:
        return bool(self.kept[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "min_count": self.min_count,
            "attributes": [
                {"attribute": n, "positive": int(p), "negative": int(q), "kept": bool(k)}
                for n, p, q, k in zip(self.names, self.positive_count, self.negative_count, self.kept)
            ],
        }


def support_filter(table: AnnotationTable, min_count: int = 100) -> SupportFilterResult:
    """Keep attributes with at least ``min_count`` positive and ``min_count`` negative labels."""
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts = label_counts(table)
    return SupportFilterResult(tuple(table.registry.names), counts[:, 0], counts[:, 1], min_count)


def count_marks(results: Iterable[SupportFilterResult]) -> dict[str, int]:
    """Per attribute, the number of datasets where the support filter dropped it."""
    marks: dict[str, int] = {}
    for res in results:
        for name, kept in zip(res.names, res.kept):
            marks[name] = marks.get(name, 0) + (0 if kept else 1)
    return marks


DEFAULT_EXCLUSION_OVERRIDES = tuple(sorted(LOW_ACCURACY_ATTRIBUTES))


@dataclass(frozen=True)
class CurationResult:
    kept: list[str]
    excluded: dict[str, str]  # attribute -> reason


def cross_dataset_exclusion(
    marks: Mapping[str, int],
    max_marks: int = 2,
    overrides: Iterable[str] = DEFAULT_EXCLUSION_OVERRIDES,
    keep: Iterable[str] = (),
) -> CurationResult:
    """Drop attributes unusable in more than ``max_marks`` datasets, or listed in ``overrides``.

    ``keep`` force-includes attributes regardless of their mark count, for
    curated lists that do not follow the threshold.
    """
    overrides = set(overrides)
    keep = set(keep)
    clash = overrides & keep
    if clash:
        raise ValueError(f"attributes both excluded and force-kept: {sorted(clash)}")
    kept: list[str] = []
    excluded: dict[str, str] = {}
    for name, m in marks.items():
        if name in overrides:
            excluded[name] = "override"
        elif m > max_marks and name not in keep:
            excluded[name] = f"insufficient support in {m} datasets"
        else:
            kept.append(name)
    return CurationResult(kept, excluded)
