"""Domain types: attribute registry, annotation tables, predictions, joined audit data."""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DuplicateSampleId, MismatchedIds, MissingIdentity, UnknownAttribute


class TernaryLabel(enum.IntEnum):
    NEGATIVE = -1
    UNDEFINED = 0
    POSITIVE = 1


class SampleClass(enum.IntEnum):
    PRISTINE = 0
    FAKE = 1


class Category(enum.Enum):
    DEMOGRAPHICS = "Demographics"
    SKIN = "Skin"
    HAIR = "Hair"
    BEARD = "Beard"
    FACE_GEOMETRY = "FaceGeometry"
    MOUTH = "Mouth"
    NOSE = "Nose"
    ACCESSORIES = "Accessories"
    OTHER = "Other"


@dataclass(frozen=True)
class Attribute:
    name: str
    category: Category
    excluded_low_accuracy: bool = False


@dataclass(frozen=True)
class AttributeRegistry:
    """Ordered attribute catalog; its order is the column order everywhere."""

    attributes: tuple[Attribute, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        index: dict[str, int] = {}
        for i, a in enumerate(attrs):
            if a.name in index:
                raise ValueError(f"duplicate attribute name {a.name!r}")
            index[a.name] = i
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_names(cls, names: Iterable[str], category: Category = Category.OTHER) -> "AttributeRegistry":
        return cls(tuple(Attribute(n, category) for n in names))

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def __len__(self) -> int:
        return len(self.attributes)

    def __iter__(self) -> Iterator[Attribute]:
        return iter(self.attributes)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __getitem__(self, name: str) -> Attribute:
        return self.attributes[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownAttribute(name) from None

    def subset(self, names: Iterable[str]) -> "AttributeRegistry":
        """Registry restricted to ``names``, keeping this registry's order."""
        wanted = set(names)
        for n in wanted:
            self.index(n)
        return AttributeRegistry(tuple(a for a in self.attributes if a.name in wanted))


_C = Category
_DEFAULT_ATTRIBUTES = (
    ("Male", _C.DEMOGRAPHICS),
    ("Young", _C.DEMOGRAPHICS),
    ("Middle Aged", _C.DEMOGRAPHICS),
    ("Senior", _C.DEMOGRAPHICS),
    ("Asian", _C.DEMOGRAPHICS),
    ("White", _C.DEMOGRAPHICS),
    ("Black", _C.DEMOGRAPHICS),
    ("Rosy Cheeks", _C.SKIN),
    ("Shiny Skin", _C.SKIN),
    ("Bald", _C.HAIR),
    ("Wavy Hair", _C.HAIR),
    ("Receding Hairline", _C.HAIR),
    ("Bangs", _C.HAIR),
    ("Sideburns", _C.BEARD),
    ("Black Hair", _C.HAIR),
    ("Blond Hair", _C.HAIR),
    ("Brown Hair", _C.HAIR),
    ("Gray Hair", _C.HAIR),
    ("No Beard", _C.BEARD),
    ("Mustache", _C.BEARD),
    ("5'o Clock Shadow", _C.BEARD),
    ("Goatee", _C.BEARD),
    ("Oval Face", _C.FACE_GEOMETRY),
    ("Square Face", _C.FACE_GEOMETRY),
    ("Round Face", _C.FACE_GEOMETRY),
    ("Double Chin", _C.FACE_GEOMETRY),
    ("High Cheekbones", _C.FACE_GEOMETRY),
    ("Chubby", _C.FACE_GEOMETRY),
    ("Obstructed Forehead", _C.FACE_GEOMETRY),
    ("Fully Visible Forehead", _C.FACE_GEOMETRY),
    ("Brown Eyes", _C.OTHER),
    ("Bags Under Eyes", _C.OTHER),
    ("Bushy Eyebrows", _C.OTHER),
    ("Arched Eyebrows", _C.OTHER),
    ("Mouth Closed", _C.MOUTH),
    ("Smiling", _C.MOUTH),
    ("Big Lips", _C.MOUTH),
    ("Big Nose", _C.NOSE),
    ("Pointy Nose", _C.NOSE),
    ("Heavy Makeup", _C.ACCESSORIES),
    ("Wearing Hat", _C.ACCESSORIES),
    ("Wearing Earrings", _C.ACCESSORIES),
    ("Wearing Necktie", _C.ACCESSORIES),
    ("Wearing Lipstick", _C.ACCESSORIES),
    ("No Eyewear", _C.ACCESSORIES),
    ("Eyeglasses", _C.ACCESSORIES),
    ("Attractive", _C.OTHER),
)
LOW_ACCURACY_ATTRIBUTES = frozenset({"Brown Eyes", "Bags Under Eyes"})

DEFAULT_REGISTRY = AttributeRegistry(
    tuple(Attribute(n, c, n in LOW_ACCURACY_ATTRIBUTES) for n, c in _DEFAULT_ATTRIBUTES)
)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class AnnotationTable:
    """Dense sample x attribute matrix of ternary labels (int8, one byte per cell)."""

    __slots__ = ("registry", "sample_ids", "labels", "_row_index")

    def __init__(self, registry: AttributeRegistry, sample_ids: Sequence[str], labels: np.ndarray):
        labels = np.ascontiguousarray(labels, dtype=np.int8)
        ids = tuple(sample_ids)
        if labels.ndim != 2 or labels.shape != (len(ids), len(registry)):
            raise ValueError(
                f"labels shape {labels.shape} does not match {len(ids)} rows x {len(registry)} attributes"
            )
        if labels.size and (labels.min() < -1 or labels.max() > 1):
            raise ValueError("labels must be in {-1, 0, 1}")
        index = {s: i for i, s in enumerate(ids)}
        if len(index) != len(ids):
            dup = next(s for s, c in Counter(ids).items() if c > 1)
            raise DuplicateSampleId(dup)
        self.registry = registry
        self.sample_ids = ids
        self.labels = _readonly(labels)
        self._row_index = index

    def __len__(self) -> int:
        return len(self.sample_ids)

    def __repr__(self) -> str:
        return f"AnnotationTable({len(self)} rows x {len(self.registry)} attributes)"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotationTable):
            return NotImplemented
        return (
            self.registry.names == other.registry.names
            and self.sample_ids == other.sample_ids
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]

    def column(self, name: str) -> np.ndarray:
        return self.labels[:, self.registry.index(name)]

    def row(self, sample_id: str) -> np.ndarray:
        return self.labels[self._row_index[sample_id]]

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self._row_index

    def row_index(self, sample_id: str) -> int:
        return self._row_index[sample_id]

    def take(self, rows: np.ndarray | Sequence[int]) -> "AnnotationTable":
        rows = np.asarray(rows, dtype=np.intp)
        return AnnotationTable(self.registry, [self.sample_ids[i] for i in rows], self.labels[rows])

    def select_attributes(self, names: Iterable[str]) -> "AnnotationTable":
        sub = self.registry.subset(names)
        cols = [self.registry.index(a.name) for a in sub]
        return AnnotationTable(sub, self.sample_ids, self.labels[:, cols])

    def checksum(self) -> int:
        """CRC-32 of the label bytes in row-major registry order."""
        import zlib

        return zlib.crc32(self.labels.tobytes())


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    truth: SampleClass
    predicted: SampleClass
    score: float | None = None


class PredictionSet:
    """Column-oriented predictions; ``score`` is NaN where absent."""

    __slots__ = ("sample_ids", "truth", "predicted", "score", "_row_index")

    def __init__(
        self,
        sample_ids: Sequence[str],
        truth: np.ndarray,
        predicted: np.ndarray,
        score: np.ndarray | None = None,
    ):
        ids = tuple(sample_ids)
        n = len(ids)
        truth = np.ascontiguousarray(truth, dtype=np.uint8)
        predicted = np.ascontiguousarray(predicted, dtype=np.uint8)
        if truth.shape != (n,) or predicted.shape != (n,):
            raise ValueError("truth/predicted length must match sample_ids")
        if n and (truth.max() > 1 or predicted.max() > 1):
            raise ValueError("truth/predicted must be 0 (pristine) or 1 (fake)")
        if score is not None:
            score = np.ascontiguousarray(score, dtype=np.float64)
            if score.shape != (n,):
                raise ValueError("score length must match sample_ids")
            score = _readonly(score)
        index = {s: i for i, s in enumerate(ids)}
        if len(index) != n:
            dup = next(s for s, c in Counter(ids).items() if c > 1)
            raise DuplicateSampleId(dup)
        self.sample_ids = ids
        self.truth = _readonly(truth)
        self.predicted = _readonly(predicted)
        self.score = score
        self._row_index = index

    @classmethod
    def from_records(
        cls, records: Iterable[PredictionRecord], score_threshold: float | None = None
    ) -> "PredictionSet":
        """Build from records; with ``score_threshold``, predicted = fake iff score >= threshold."""
        recs = list(records)
        score = np.array([np.nan if r.score is None else r.score for r in recs], dtype=np.float64)
        predicted = np.array([int(r.predicted) for r in recs], dtype=np.uint8)
        if score_threshold is not None:
            has = ~np.isnan(score)
            predicted[has] = score[has] >= score_threshold
        return cls(
            [r.sample_id for r in recs],
            np.array([int(r.truth) for r in recs], dtype=np.uint8),
            predicted,
            score if not np.all(np.isnan(score)) else None,
        )

    def __len__(self) -> int:
        return len(self.sample_ids)

    def __iter__(self) -> Iterator[PredictionRecord]:
        for i, sid in enumerate(self.sample_ids):
            s = None
            if self.score is not None and not np.isnan(self.score[i]):
                s = float(self.score[i])
            yield PredictionRecord(sid, SampleClass(int(self.truth[i])), SampleClass(int(self.predicted[i])), s)

    def __contains__(self, sample_id: object) -> bool:
        return sample_id in self._row_index

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PredictionSet):
            return NotImplemented
        same_score = (self.score is None and other.score is None) or (
            self.score is not None
            and other.score is not None
            and np.array_equal(self.score, other.score, equal_nan=True)
        )
        return (
            self.sample_ids == other.sample_ids
            and np.array_equal(self.truth, other.truth)
            and np.array_equal(self.predicted, other.predicted)
            and same_score
        )

    __hash__ = None  # type: ignore[assignment]

    def row_index(self, sample_id: str) -> int:
        return self._row_index[sample_id]

    def take(self, rows: np.ndarray | Sequence[int]) -> "PredictionSet":
        rows = np.asarray(rows, dtype=np.intp)
        return PredictionSet(
            [self.sample_ids[i] for i in rows],
            self.truth[rows],
            self.predicted[rows],
            None if self.score is None else self.score[rows],
        )


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    identity_of: Mapping[str, str]

    def identities(self) -> list[str]:
        return sorted(set(self.identity_of.values()))

    def check_covers(self, sample_ids: Iterable[str]) -> None:
        missing = [s for s in sample_ids if s not in self.identity_of]
        if missing:
            raise MissingIdentity(f"{len(missing)} sample ids have no identity, e.g. {missing[0]!r}")


class AuditDataset:
    """Annotations and predictions aligned row-for-row over a shared id set."""

    __slots__ = ("annotations", "predictions")

    def __init__(self, annotations: AnnotationTable, predictions: PredictionSet):
        if annotations.sample_ids != predictions.sample_ids:
            raise ValueError("annotations and predictions must be aligned; use join()")
        self.annotations = annotations
        self.predictions = predictions

    def __len__(self) -> int:
        return len(self.annotations)

    def __repr__(self) -> str:
        return f"AuditDataset({len(self)} samples x {len(self.registry)} attributes)"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AuditDataset):
            return NotImplemented
        return self.annotations == other.annotations and self.predictions == other.predictions

    __hash__ = None  # type: ignore[assignment]

    @property
    def registry(self) -> AttributeRegistry:
        return self.annotations.registry

    @property
    def sample_ids(self) -> tuple[str, ...]:
        return self.annotations.sample_ids

    @property
    def labels(self) -> np.ndarray:
        return self.annotations.labels

    @property
    def truth(self) -> np.ndarray:
        return self.predictions.truth

    @property
    def predicted(self) -> np.ndarray:
        return self.predictions.predicted

    def outcome_codes(self) -> np.ndarray:
        """Per-sample code ``2 * truth + wrong``: 0/1 pristine right/wrong, 2/3 fake right/wrong."""
        wrong = self.truth != self.predicted
        return (2 * self.truth + wrong).astype(np.uint8)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update("\x1f".join(self.registry.names).encode())
        h.update("\n".join(self.sample_ids).encode())
        h.update(self.labels.tobytes())
        h.update(self.truth.tobytes())
        h.update(self.predicted.tobytes())
        return h.hexdigest()


class JoinPolicy(enum.Enum):
    STRICT = "strict"
    INTERSECT = "intersect"


def join(
    annotations: AnnotationTable, predictions: PredictionSet, policy: JoinPolicy | str = JoinPolicy.INTERSECT
) -> AuditDataset:
    """Align annotations with predictions; rows follow annotation order."""
    policy = JoinPolicy(policy)
    if annotations.sample_ids == predictions.sample_ids:
        return AuditDataset(annotations, predictions)
    if policy is JoinPolicy.STRICT:
        a, p = set(annotations.sample_ids), set(predictions.sample_ids)
        if a != p:
            raise MismatchedIds(len(a ^ p))
    pairs = [(i, predictions.row_index(s)) for i, s in enumerate(annotations.sample_ids) if s in predictions]
    ann_rows = np.fromiter((i for i, _ in pairs), dtype=np.intp, count=len(pairs))
    pred_rows = np.fromiter((j for _, j in pairs), dtype=np.intp, count=len(pairs))
    if len(pairs) == len(annotations):
        ann = annotations
    else:
        ann = annotations.take(ann_rows)
    return AuditDataset(ann, predictions.take(pred_rows))


@dataclass(frozen=True)
class Finding:
    kind: str  # "wrong arity" | "invalid label" | "duplicate id"
    row: int
    sample_id: str
    detail: str = ""


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def validate_annotations(
    table: AnnotationTable | Iterable[tuple[str, Sequence[int]]], registry: AttributeRegistry
) -> ValidationReport:
    """Scan raw ``(sample_id, labels)`` rows (or a built table) without raising."""
    report = ValidationReport()
    if isinstance(table, AnnotationTable):
        if table.registry.names != registry.names:
            report.findings.append(Finding("wrong arity", -1, "", "table registry differs"))
        rows: Iterable[tuple[str, Sequence[int]]] = zip(table.sample_ids, table.labels)
    else:
        rows = table
    seen: set[str] = set()
    width = len(registry)
    for i, (sid, labels) in enumerate(rows):
        labels = list(labels)
        if sid in seen:
            report.findings.append(Finding("duplicate id", i, sid))
        seen.add(sid)
        if len(labels) != width:
            report.findings.append(Finding("wrong arity", i, sid, f"{len(labels)} labels, expected {width}"))
        for j, v in enumerate(labels):
            if not (isinstance(v, (int, np.integer)) and -1 <= v <= 1):
                name = registry.attributes[j].name if j < width else f"#{j}"
                report.findings.append(Finding("invalid label", i, sid, f"{name}={v!r}"))
    return report
