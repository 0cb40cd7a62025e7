"""Streaming CSV/JSON readers and writers, plus the subject-exclusive splitter.

Dialect: comma-separated UTF-8, ``\\n`` or ``\\r\\n`` line ends, header first,
no quoting. Sample ids match ``[A-Za-z0-9._-]+``.
"""

from __future__ import annotations

import enum
import io
import json
import math
import re
import warnings
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Mapping, Sequence, TextIO

import numpy as np

from . import _kernels
from .errors import DuplicateSampleId, EmptyManifest, HeaderMismatch, MissingColumn, ParseError
from .model import AnnotationTable, AttributeRegistry, DatasetManifest, PredictionSet
from .rng import Xoshiro256StarStar

ID_PATTERN = re.compile(r"[A-Za-z0-9._\-]+")
_IDS_BLOCK = re.compile(rb"[A-Za-z0-9._\-]+(?:\n[A-Za-z0-9._\-]+)*")
CHUNK_BYTES = 1 << 23


class PredictionConflictWarning(UserWarning):
    """Explicit ``predicted`` column disagrees with ``score >= threshold``."""


def _split_header(raw: bytes, line: int = 1) -> list[str]:
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise ParseError(line, 1, f"not UTF-8: {e}") from None
    text = text.rstrip("\r\n")
    if not text:
        raise ParseError(line, 1, "missing header")
    return text.split(",")


def _check_ids(raw_ids: list[bytes], first_line: int) -> list[str]:
    blob = b"\n".join(raw_ids)
    if not _IDS_BLOCK.fullmatch(blob):
        for k, rid in enumerate(raw_ids):
            if not ID_PATTERN.fullmatch(rid.decode("utf-8", "replace")):
                reason = "empty line" if not rid else f"invalid sample id {rid!r}"
                raise ParseError(first_line + k, 1, reason)
    return blob.decode("ascii").split("\n")


def load_annotations(source: BinaryIO, registry: AttributeRegistry) -> AnnotationTable:
    """Parse ``sample_id,<attr>...`` with cells in {-1, 0, 1}, in one streaming pass.

    File columns may come in any order; the table always follows registry order.
    """
    header = _split_header(source.readline())
    if header[0] != "sample_id":
        raise ParseError(1, 1, f"first column must be 'sample_id', got {header[0]!r}")
    cols = header[1:]
    unknown = [c for c in cols if c not in registry]
    missing = [a.name for a in registry if a.name not in cols]
    if unknown or missing or len(set(cols)) != len(cols):
        raise HeaderMismatch(unknown, missing)
    colmap = np.array([registry.index(c) for c in cols], dtype=np.int64)
    n_attr = len(registry)

    ids: list[str] = []
    seen: set[str] = set()
    blocks: list[np.ndarray] = []
    line_no = 2
    while True:
        lines = source.readlines(CHUNK_BYTES)
        if not lines:
            break
        raw_ids = []
        rests = []
        for ln in lines:
            sid, sep, rest = ln.partition(b",")
            raw_ids.append(sid.rstrip(b"\r\n"))
            rests.append(rest if rest.endswith(b"\n") else rest + b"\n")
            if not sep:
                rests[-1] = b"\n"
        chunk_ids = _check_ids(raw_ids, line_no)
        for k, sid in enumerate(chunk_ids):
            if sid in seen:
                raise DuplicateSampleId(sid, line_no + k)
            seen.add(sid)
        buf = np.frombuffer(b"".join(rests), dtype=np.uint8)
        out = np.empty((len(lines), n_attr), dtype=np.int8)
        status, r, c = _kernels.parse_labels(buf, len(lines), colmap, out)
        if status != _kernels.PARSE_OK:
            line = line_no + r
            if status == _kernels.PARSE_BAD_TOKEN:
                token = rests[r].rstrip(b"\r\n").split(b",")[c].decode("utf-8", "replace")
                raise ParseError(line, c + 2, f"{cols[c]}: label {token!r} not in {{-1, 0, 1}}")
            if status == _kernels.PARSE_TOO_FEW:
                raise ParseError(line, c + 2, f"expected {len(cols)} labels, got {c}")
            raise ParseError(line, len(cols) + 2, f"more than {len(cols)} labels")
        blocks.append(out)
        ids.extend(chunk_ids)
        line_no += len(lines)
    labels = np.concatenate(blocks) if blocks else np.empty((0, n_attr), dtype=np.int8)
    return AnnotationTable(registry, ids, labels)


def _cells_as_bytes(labels: np.ndarray) -> np.ndarray:
    # Fixed 3-byte slot per cell, NUL padded; dropping NULs yields "-1,0,1\n" text.
    n, a = labels.shape
    slots = np.zeros((n, a, 3), dtype=np.uint8)
    neg = labels == -1
    slots[..., 0] = np.where(neg, ord("-"), np.where(labels == 1, ord("1"), ord("0")))
    sep = np.full((n, a), ord(","), dtype=np.uint8)
    sep[:, -1] = ord("\n")
    slots[..., 1] = np.where(neg, ord("1"), sep)
    slots[..., 2] = np.where(neg, sep, 0)
    return slots.reshape(n, a * 3)


def _ids_as_bytes(ids: Sequence[str]) -> np.ndarray:
    arr = np.array([s.encode("ascii") for s in ids])
    width = arr.dtype.itemsize
    return arr.view(np.uint8).reshape(len(ids), width)


def write_annotations(table: AnnotationTable, sink: BinaryIO, chunk_rows: int = 1 << 16) -> None:
    sink.write(("sample_id," + ",".join(table.registry.names) + "\n").encode("utf-8"))
    n = len(table)
    if len(table.registry) == 0:
        sink.write("".join(f"{s}\n" for s in table.sample_ids).encode("ascii"))
        return
    for s in range(0, n, chunk_rows):
        ids = table.sample_ids[s : s + chunk_rows]
        idb = _ids_as_bytes(ids)
        comma = np.full((len(ids), 1), ord(","), dtype=np.uint8)
        block = np.concatenate([idb, comma, _cells_as_bytes(table.labels[s : s + chunk_rows])], axis=1)
        sink.write(block[block != 0].tobytes())


def _parse_binary_column(values: list[bytes], name: str, first_line: int, col: int) -> np.ndarray:
    arr = np.array(values)
    out = np.full(len(values), 2, dtype=np.uint8)
    out[arr == b"0"] = 0
    out[arr == b"1"] = 1
    bad = np.flatnonzero(out == 2)
    if bad.size:
        k = int(bad[0])
        raise ParseError(first_line + k, col, f"{name} must be 0 or 1, got {values[k].decode('utf-8', 'replace')!r}")
    return out


def load_predictions(source: BinaryIO, score_threshold: float = 0.5) -> PredictionSet:
    """Parse ``sample_id,truth[,predicted][,score]`` (0 = pristine, 1 = fake).

    Without ``predicted``, a sample is fake iff ``score >= score_threshold``.
    When both are present the explicit column wins and a
    :class:`PredictionConflictWarning` reports disagreeing rows.
    """
    if not 0.0 < score_threshold < 1.0:
        raise ValueError("score_threshold must lie in (0, 1)")
    header = _split_header(source.readline())
    known = {"sample_id", "truth", "predicted", "score"}
    unknown = [c for c in header if c not in known]
    if unknown or len(set(header)) != len(header):
        raise HeaderMismatch(unknown, [])
    for required in ("sample_id", "truth"):
        if required not in header:
            raise MissingColumn(f"predictions file lacks a {required!r} column")
    if "predicted" not in header and "score" not in header:
        raise MissingColumn("predictions file needs a 'predicted' or 'score' column")
    pos = {c: i for i, c in enumerate(header)}
    width = len(header)

    rows = [ln.rstrip(b"\r\n").split(b",") for ln in source.readlines()]
    for k, r in enumerate(rows):
        if len(r) != width:
            raise ParseError(k + 2, min(len(r), width) + 1, f"expected {width} fields, got {len(r)}")
    columns = list(zip(*rows)) if rows else [() for _ in header]
    ids = _check_ids(list(columns[pos["sample_id"]]), 2)
    seen: set[str] = set()
    for k, sid in enumerate(ids):
        if sid in seen:
            raise DuplicateSampleId(sid, k + 2)
        seen.add(sid)
    n = len(ids)
    truth = _parse_binary_column(list(columns[pos["truth"]]), "truth", 2, pos["truth"] + 1)

    score = None
    if "score" in pos:
        raw = list(columns[pos["score"]])
        score = np.full(n, np.nan)
        for k, v in enumerate(raw):
            if not v:
                if "predicted" not in pos:
                    raise ParseError(k + 2, pos["score"] + 1, "empty score without a predicted column")
                continue
            try:
                x = float(v)
            except ValueError:
                raise ParseError(k + 2, pos["score"] + 1, f"score {v.decode('utf-8', 'replace')!r} is not a number") from None
            if not 0.0 <= x <= 1.0:
                raise ParseError(k + 2, pos["score"] + 1, f"score {x} outside [0, 1]")
            score[k] = x

    if "predicted" in pos:
        predicted = _parse_binary_column(list(columns[pos["predicted"]]), "predicted", 2, pos["predicted"] + 1)
        if score is not None:
            has = ~np.isnan(score)
            implied = (score >= score_threshold).astype(np.uint8)
            conflicts = int(np.count_nonzero(has & (implied != predicted)))
            if conflicts:
                warnings.warn(
                    f"{conflicts} rows: explicit predicted column disagrees with score >= {score_threshold}; "
                    "using the predicted column",
                    PredictionConflictWarning,
                    stacklevel=2,
                )
    else:
        assert score is not None
        predicted = (score >= score_threshold).astype(np.uint8)
    return PredictionSet(ids, truth, predicted, score)


def write_predictions(predictions: PredictionSet, sink: BinaryIO, include_score: bool | None = None) -> None:
    if include_score is None:
        include_score = predictions.score is not None
    out = io.StringIO()
    if include_score:
        out.write("sample_id,truth,predicted,score\n")
        score = predictions.score if predictions.score is not None else np.full(len(predictions), np.nan)
        for sid, t, p, s in zip(predictions.sample_ids, predictions.truth, predictions.predicted, score):
            out.write(f"{sid},{t},{p},{'' if math.isnan(s) else repr(float(s))}\n")
    else:
        out.write("sample_id,truth,predicted\n")
        for sid, t, p in zip(predictions.sample_ids, predictions.truth, predictions.predicted):
            out.write(f"{sid},{t},{p}\n")
    sink.write(out.getvalue().encode("ascii"))


def load_manifest(source: BinaryIO | TextIO) -> DatasetManifest:
    try:
        doc = json.load(source)
    except json.JSONDecodeError as e:
        raise ParseError(e.lineno, e.colno, f"invalid JSON: {e.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("identities"), dict):
        raise ParseError(1, 1, "manifest must be an object with an 'identities' map")
    ident = {str(k): str(v) for k, v in doc["identities"].items()}
    return DatasetManifest(str(doc.get("name", "")), ident)


def write_manifest(manifest: DatasetManifest, sink: TextIO) -> None:
    json.dump({"name": manifest.name, "identities": dict(manifest.identity_of)}, sink, indent=1)
    sink.write("\n")


class Split(enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True)
class SplitAssignment:
    assignment: Mapping[str, Split]
    ratios: tuple[float, float, float]

    def sizes(self) -> dict[Split, int]:
        out = {s: 0 for s in Split}
        for v in self.assignment.values():
            out[v] += 1
        return out

    def identities_in(self, split: Split) -> list[str]:
        return sorted(k for k, v in self.assignment.items() if v is split)

    def samples(self, manifest: DatasetManifest) -> dict[str, Split]:
        """Per-sample split, inherited from each sample's identity."""
        return {sid: self.assignment[ident] for sid, ident in manifest.identity_of.items()}


def subject_exclusive_split(
    manifest: DatasetManifest, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0
) -> SplitAssignment:
    """Partition identities (not samples) into train/val/test.

    Identities are sorted, shuffled with xoshiro256** seeded by ``seed``, then
    cut at ``round(cumulative_ratio * n_identities)``.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three positive numbers summing to 1")
    identities = manifest.identities()
    if not identities:
        raise EmptyManifest(f"manifest {manifest.name!r} has no identities")
    Xoshiro256StarStar(seed).shuffle(identities)
    n = len(identities)
    cut1 = round(ratios[0] * n)
    cut2 = round((ratios[0] + ratios[1]) * n)
    assignment: dict[str, Split] = {}
    for i, ident in enumerate(identities):
        assignment[ident] = Split.TRAIN if i < cut1 else Split.VAL if i < cut2 else Split.TEST
    return SplitAssignment(assignment, ratios)  # type: ignore[arg-type]


def write_splits(split: SplitAssignment, sink: TextIO) -> None:
    sink.write("identity_id,split\n")
    for ident in sorted(split.assignment):
        sink.write(f"{ident},{split.assignment[ident].value}\n")


def read_lines_as_list(source: Iterable[str]) -> list[str]:
    """Non-empty, non-comment lines (for attribute list files)."""
    return [ln.strip() for ln in source if ln.strip() and not ln.lstrip().startswith("#")]
