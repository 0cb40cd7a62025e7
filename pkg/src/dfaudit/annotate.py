"""Confidence-thresholded annotation transfer and the human-agreement study."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Sequence

import numpy as np

from .errors import DuplicatePair, NoOverlap, ParseError, UnknownAttribute
from .model import AnnotationTable, AttributeRegistry, TernaryLabel

DEFAULT_CONFIDENCE_THRESHOLD = 0.90


@dataclass(frozen=True)
class ConfidenceRecord:
    sample_id: str
    attribute: str
    decision: TernaryLabel
    confidence: float

    def __post_init__(self) -> None:
        if self.decision not in (TernaryLabel.POSITIVE, TernaryLabel.NEGATIVE):
            raise ValueError(f"decision must be +1 or -1, got {self.decision!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FilterConfig:
    """Decisions with confidence strictly below ``threshold`` become undefined."""

    threshold: float = DEFAULT_CONFIDENCE_THRESHOLD

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")

    def keeps(self, confidence: float) -> bool:
        return confidence >= self.threshold


def apply_confidence_filter(
    records: Iterable[ConfidenceRecord],
    config: FilterConfig,
    registry: AttributeRegistry,
    sample_ids: Sequence[str] | None = None,
) -> AnnotationTable:
    """Assemble ternary labels from upstream classifier decisions.

    Rows appear in first-seen order (after any ``sample_ids`` given up front);
    pairs absent from the stream stay undefined.
    """
    width = len(registry)
    row_of: dict[str, int] = {}
    rows: list[bytearray] = []
    ids: list[str] = []

    def row_for(sid: str) -> int:
        r = row_of.get(sid)
        if r is None:
            r = row_of[sid] = len(rows)
            rows.append(bytearray(width))
            ids.append(sid)
        return r

    for sid in sample_ids or ():
        row_for(sid)
    seen: set[int] = set()
    for rec in records:
        if rec.attribute not in registry:
            raise UnknownAttribute(rec.attribute)
        col = registry.index(rec.attribute)
        r = row_for(rec.sample_id)
        key = r * width + col
        if key in seen:
            raise DuplicatePair(rec.sample_id, rec.attribute)
        seen.add(key)
        if config.keeps(rec.confidence):
            rows[r][col] = 1 if rec.decision == TernaryLabel.POSITIVE else 0xFF
    labels = np.frombuffer(b"".join(rows), dtype=np.int8).reshape(len(rows), width)
    return AnnotationTable(registry, ids, labels.copy())


def load_confidences(source: BinaryIO) -> Iterator[ConfidenceRecord]:
    """Stream records from ``sample_id,attribute,decision,confidence``."""
    header = source.readline().decode("utf-8-sig").rstrip("\r\n").split(",")
    expected = ["sample_id", "attribute", "decision", "confidence"]
    if header != expected:
        raise ParseError(1, 1, f"expected header {','.join(expected)}")
    for line_no, raw in enumerate(source, start=2):
        parts = raw.decode("utf-8").rstrip("\r\n").split(",")
        if len(parts) != 4:
            raise ParseError(line_no, min(len(parts), 4) + 1, f"expected 4 fields, got {len(parts)}")
        sid, attr, dec, conf = parts
        if dec not in ("1", "-1"):
            raise ParseError(line_no, 3, f"decision must be 1 or -1, got {dec!r}")
        try:
            c = float(conf)
        except ValueError:
            raise ParseError(line_no, 4, f"confidence {conf!r} is not a number") from None
        if not 0.0 <= c <= 1.0:
            raise ParseError(line_no, 4, f"confidence {c} outside [0, 1]")
        yield ConfidenceRecord(sid, attr, TernaryLabel(int(dec)), c)


@dataclass(frozen=True)
class AttributeScore:
    accuracy: float
    precision: float | None  # None: no predicted positives
    recall: float | None  # None: no human positives
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def support(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class CorrectnessReport:
    per_attribute: dict[str, AttributeScore] = field(default_factory=dict)

    def _mean(self, attr: str) -> float | None:
        vals = [getattr(s, attr) for s in self.per_attribute.values()]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def macro_accuracy(self) -> float | None:
        return self._mean("accuracy")

    @property
    def macro_precision(self) -> float | None:
        return self._mean("precision")

    @property
    def macro_recall(self) -> float | None:
        return self._mean("recall")

    def format_macro(self, decimals: int = 2) -> str:
        vals = (self.macro_accuracy, self.macro_precision, self.macro_recall)
        return " ".join("n/a" if v is None else f"{v:.{decimals}f}" for v in vals)

    def to_dict(self) -> dict:
        return {
            "attributes": {
                name: {
                    "accuracy": s.accuracy,
                    "precision": s.precision,
                    "recall": s.recall,
                    "tp": s.tp,
                    "tn": s.tn,
                    "fp": s.fp,
                    "fn": s.fn,
                }
                for name, s in self.per_attribute.items()
            },
            "macro": {
                "accuracy": self.macro_accuracy,
                "precision": self.macro_precision,
                "recall": self.macro_recall,
            },
        }


def score_from_counts(tp: int, tn: int, fp: int, fn: int) -> AttributeScore:
    total = tp + tn + fp + fn
    return AttributeScore(
        accuracy=(tp + tn) / total,
        precision=tp / (tp + fp) if tp + fp else None,
        recall=tp / (tp + fn) if tp + fn else None,
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
    )


def correctness_study(
    generated: AnnotationTable, human: AnnotationTable, attributes: Iterable[str] | None = None
) -> CorrectnessReport:
    """Score generated labels against human labels, positive = +1.

    Only samples present in both tables and cells defined in both count.
    """
    if generated.registry.names != human.registry.names:
        raise ValueError("generated and human tables must share a registry")
    common = [i for i, s in enumerate(generated.sample_ids) if s in human]
    g_rows = np.array(common, dtype=np.intp)
    h_rows = np.array([human.row_index(generated.sample_ids[i]) for i in common], dtype=np.intp)
    names = list(attributes) if attributes is not None else generated.registry.names
    scores: dict[str, AttributeScore] = {}
    for name in names:
        col = generated.registry.index(name)
        g = generated.labels[g_rows, col]
        h = human.labels[h_rows, col]
        both = (g != 0) & (h != 0)
        if not both.any():
            raise NoOverlap(name)
        g, h = g[both], h[both]
        scores[name] = score_from_counts(
            tp=int(np.count_nonzero((g == 1) & (h == 1))),
            tn=int(np.count_nonzero((g == -1) & (h == -1))),
            fp=int(np.count_nonzero((g == 1) & (h == -1))),
            fn=int(np.count_nonzero((g == -1) & (h == 1))),
        )
    return CorrectnessReport(scores)
