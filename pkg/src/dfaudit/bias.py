"""Group error rates, control groups, RP / CRP / PDRP / DDRP and the full audit.

Outcome codes (see :meth:`AuditDataset.outcome_codes`) index a length-4 count
vector ``[pristine right, pristine wrong, fake right, fake wrong]``; every error
rate below is computed from such vectors.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

from . import __version__, _kernels
from .errors import DegenerateGroup, InsufficientData
from .model import AttributeRegistry, AuditDataset
from .stats import SupportFilterResult


class ErrorSlice(enum.Enum):
    BALANCED = "balanced"
    FAKE = "fake"
    PRISTINE = "pristine"


SLICES = (ErrorSlice.BALANCED, ErrorSlice.FAKE, ErrorSlice.PRISTINE)
SOURCES = ("data", "control")


@dataclass(frozen=True)
class ErrorPair:
    """Error of the attribute-positive and attribute-negative group for one slice."""

    err_pos: float
    err_neg: float
    n_pos: int
    n_neg: int


def slice_error(counts: np.ndarray, slice_: ErrorSlice) -> float | None:
    """Error rate of one group; None when the group lacks a needed class."""
    pristine = counts[0] + counts[1]
    fake = counts[2] + counts[3]
    if slice_ is ErrorSlice.FAKE:
        return counts[3] / fake if fake else None
    if slice_ is ErrorSlice.PRISTINE:
        return counts[1] / pristine if pristine else None
    if not (fake and pristine):
        return None
    return (counts[3] / fake + counts[1] / pristine) / 2.0


def slice_size(counts: np.ndarray, slice_: ErrorSlice) -> int:
    if slice_ is ErrorSlice.FAKE:
        return int(counts[2] + counts[3])
    if slice_ is ErrorSlice.PRISTINE:
        return int(counts[0] + counts[1])
    return int(counts.sum())


def _missing_class(counts: np.ndarray, slice_: ErrorSlice) -> str:
    has_fake = counts[2] + counts[3] > 0
    has_pristine = counts[0] + counts[1] > 0
    if slice_ is ErrorSlice.FAKE or (slice_ is ErrorSlice.BALANCED and not has_fake):
        return "no fake samples"
    if not has_pristine:
        return "no pristine samples"
    return "empty"


def error_pair(pos_counts: np.ndarray, neg_counts: np.ndarray, slice_: ErrorSlice) -> ErrorPair | str:
    """ErrorPair for one slice, or a reason string when a group is degenerate."""
    ep = slice_error(pos_counts, slice_)
    en = slice_error(neg_counts, slice_)
    if ep is None:
        return f"positive group: {_missing_class(pos_counts, slice_)}"
    if en is None:
        return f"negative group: {_missing_class(neg_counts, slice_)}"
    return ErrorPair(float(ep), float(en), slice_size(pos_counts, slice_), slice_size(neg_counts, slice_))


def _attribute_counts(dataset: AuditDataset, attribute: str) -> tuple[np.ndarray, np.ndarray]:
    col = dataset.labels[:, dataset.registry.index(attribute)]
    codes = dataset.outcome_codes()
    pos = np.bincount(codes[col == 1], minlength=4)
    neg = np.bincount(codes[col == -1], minlength=4)
    return pos, neg


def group_error_rates(dataset: AuditDataset, attribute: str, slice_: ErrorSlice | str) -> ErrorPair:
    """Errors of the +1 and -1 groups (undefined samples excluded).

    Fake error is the share of fakes predicted pristine, pristine error the
    share of pristine samples predicted fake, balanced error their mean.
    """
    slice_ = ErrorSlice(slice_)
    pos, neg = _attribute_counts(dataset, attribute)
    pair = error_pair(pos, neg, slice_)
    if isinstance(pair, str):
        raise DegenerateGroup(attribute, pair)
    return pair


# ------------------------------------------------------------------ RP values


class RPKind(enum.Enum):
    FINITE = "finite"
    NEG_GROUP_PERFECT = "neg_group_perfect"  # err- = 0 < err+
    BOTH_PERFECT = "both_perfect"  # err+ = err- = 0
    DEGENERATE = "degenerate"  # a group lacks the samples the slice needs


@dataclass(frozen=True)
class RPValue:
    kind: RPKind
    value: float | None = None
    side: str | None = None  # for CRP sentinels: "data", "control" or "both"

    @classmethod
    def finite(cls, value: float) -> "RPValue":
        return cls(RPKind.FINITE, float(value))

    @property
    def is_finite(self) -> bool:
        return self.kind is RPKind.FINITE

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "value": self.value}
        if self.side is not None:
            d["side"] = self.side
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RPValue":
        v = d.get("value")
        return cls(RPKind(d["kind"]), None if v is None else float(v), d.get("side"))


DEGENERATE = RPValue(RPKind.DEGENERATE)


def relative_performance(pair: ErrorPair | None) -> RPValue:
    """``1 - err+/err-``; positive means the attribute-positive group errs less."""
    if pair is None:
        return DEGENERATE
    if pair.err_neg > 0:
        return RPValue.finite(1.0 - pair.err_pos / pair.err_neg)
    if pair.err_pos > 0:
        return RPValue(RPKind.NEG_GROUP_PERFECT)
    return RPValue(RPKind.BOTH_PERFECT)


def corrected_relative_performance(data: ErrorPair | None, control: ErrorPair | None) -> RPValue:
    """``err+_ctl/err-_ctl - err+_dat/err-_dat``, i.e. ``RP_data - RP_control``."""
    rp_d = relative_performance(data)
    rp_c = relative_performance(control)
    if rp_d.is_finite and rp_c.is_finite:
        assert data is not None and control is not None
        return RPValue.finite(control.err_pos / control.err_neg - data.err_pos / data.err_neg)
    if not rp_d.is_finite and not rp_c.is_finite:
        return RPValue(rp_d.kind, None, "both")
    if not rp_d.is_finite:
        return RPValue(rp_d.kind, None, "data")
    return RPValue(rp_c.kind, None, "control")


# ------------------------------------------------------------- control groups


@dataclass(frozen=True)
class ControlGroupSpec:
    seed: int = 0
    reps: int = 1
    replacement: bool = False

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def control_rng(seed: int, attribute_index: int, rep: int) -> np.random.Generator:
    """PCG64 stream keyed by ``(seed, attribute index, rep)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(attribute_index, rep))))


def _draw(rng: np.random.Generator, population: int, size: int, replacement: bool) -> np.ndarray:
    if replacement:
        return rng.integers(0, population, size=size, dtype=np.int64)
    if size > population:
        raise InsufficientData(f"cannot draw {size} of {population} samples without replacement")
    return rng.choice(population, size=size, replace=False).astype(np.int64)


def _draw_controls(
    population: int, n_pos: int, n_neg: int, attribute_index: int, spec: ControlGroupSpec
) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for rep in range(spec.reps):
        rng = control_rng(spec.seed, attribute_index, rep)
        pos = _draw(rng, population, n_pos, spec.replacement)
        neg = _draw(rng, population, n_neg, spec.replacement)
        out.append((pos, neg))
    return out


def sample_control_groups(
    dataset: AuditDataset, attribute: str, spec: ControlGroupSpec = ControlGroupSpec()
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per rep, row indices of the positive and negative control groups.

    Each control group matches its data counterpart's size and is drawn
    uniformly from the whole joined set, not from the labelled subsets. An
    empty data group yields an empty control group.
    """
    idx = dataset.registry.index(attribute)
    col = dataset.labels[:, idx]
    n_pos = int(np.count_nonzero(col == 1))
    n_neg = int(np.count_nonzero(col == -1))
    if n_pos == 0 and n_neg == 0:
        raise DegenerateGroup(attribute, "no sample has a defined label")
    return _draw_controls(len(dataset), n_pos, n_neg, idx, spec)


# ---------------------------------------------------------------- audit rows


@dataclass(frozen=True)
class BiasRow:
    attribute: str
    category: str
    n_pos: int
    n_neg: int
    data: dict[ErrorSlice, ErrorPair | None]
    control: dict[ErrorSlice, ErrorPair | None]
    rp_data: RPValue
    rp_control: RPValue
    crp: RPValue
    pdrp: RPValue
    ddrp: RPValue
    control_std: dict[ErrorSlice, tuple[float, float]] | None = None
    degenerate: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_pairs(
        cls,
        attribute: str,
        data: Mapping[ErrorSlice, ErrorPair | None],
        control: Mapping[ErrorSlice, ErrorPair | None],
        category: str = "",
        n_pos: int | None = None,
        n_neg: int | None = None,
        control_std: dict[ErrorSlice, tuple[float, float]] | None = None,
        degenerate: Mapping[str, str] | None = None,
    ) -> "BiasRow":
        """Row with RP / CRP / PDRP / DDRP derived from per-slice error pairs."""
        b, f, p = SLICES
        data, control = dict(data), dict(control)
        if n_pos is None or n_neg is None:
            bal = data.get(b)
            n_pos = bal.n_pos if bal else 0
            n_neg = bal.n_neg if bal else 0
        return cls(
            attribute=attribute,
            category=category,
            n_pos=n_pos,
            n_neg=n_neg,
            data=data,
            control=control,
            rp_data=relative_performance(data[b]),
            rp_control=relative_performance(control[b]),
            crp=corrected_relative_performance(data[b], control[b]),
            pdrp=corrected_relative_performance(data[p], control[p]),
            ddrp=corrected_relative_performance(data[f], control[f]),
            control_std=control_std,
            degenerate=dict(degenerate or {}),
        )

    def pair(self, source: str, slice_: ErrorSlice) -> ErrorPair | None:
        return (self.data if source == "data" else self.control)[slice_]

    def rp(self, source: str, slice_: ErrorSlice) -> RPValue:
        return relative_performance(self.pair(source, slice_))

    def to_dict(self) -> dict[str, Any]:
        errors: dict[str, Any] = {}
        for source in SOURCES:
            per = {}
            for s in SLICES:
                p = self.pair(source, s)
                if p is None:
                    per[s.value] = {"pos": None, "neg": None, "n_pos": None, "n_neg": None,
                                    "degenerate": self.degenerate.get(f"{source}.{s.value}", "")}
                else:
                    per[s.value] = {"pos": p.err_pos, "neg": p.err_neg, "n_pos": p.n_pos, "n_neg": p.n_neg}
            errors[source] = per
        std = None
        if self.control_std is not None:
            std = {s.value: {"pos": v[0], "neg": v[1]} for s, v in self.control_std.items()}
        return {
            "attribute": self.attribute,
            "category": self.category,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "errors": errors,
            "control_std": std,
            "rp_data": self.rp_data.to_dict(),
            "rp_control": self.rp_control.to_dict(),
            "crp": self.crp.to_dict(),
            "pdrp": self.pdrp.to_dict(),
            "ddrp": self.ddrp.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BiasRow":
        pairs: dict[str, dict[ErrorSlice, ErrorPair | None]] = {}
        degenerate: dict[str, str] = {}
        for source in SOURCES:
            pairs[source] = {}
            for s in SLICES:
                e = d["errors"][source][s.value]
                if e["pos"] is None or e["neg"] is None:
                    pairs[source][s] = None
                    degenerate[f"{source}.{s.value}"] = e.get("degenerate", "")
                else:
                    pairs[source][s] = ErrorPair(float(e["pos"]), float(e["neg"]), int(e["n_pos"]), int(e["n_neg"]))
        std = d.get("control_std")
        return cls(
            attribute=d["attribute"],
            category=d.get("category", ""),
            n_pos=int(d["n_pos"]),
            n_neg=int(d["n_neg"]),
            data=pairs["data"],
            control=pairs["control"],
            rp_data=RPValue.from_dict(d["rp_data"]),
            rp_control=RPValue.from_dict(d["rp_control"]),
            crp=RPValue.from_dict(d["crp"]),
            pdrp=RPValue.from_dict(d["pdrp"]),
            ddrp=RPValue.from_dict(d["ddrp"]),
            control_std=None if std is None else {ErrorSlice(k): (v["pos"], v["neg"]) for k, v in std.items()},
            degenerate=degenerate,
        )


@dataclass(frozen=True)
class BiasReport:
    rows: list[BiasRow]
    provenance: dict[str, Any]

    def row(self, attribute: str) -> BiasRow:
        for r in self.rows:
            if r.attribute == attribute:
                return r
        raise KeyError(attribute)

    def to_dict(self) -> dict[str, Any]:
        return {"rows": [r.to_dict() for r in self.rows], "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BiasReport":
        return cls([BiasRow.from_dict(r) for r in d["rows"]], dict(d.get("provenance", {})))

    @classmethod
    def from_json(cls, text: str) -> "BiasReport":
        return cls.from_dict(json.loads(text))


def _control_pairs(
    codes: np.ndarray, draws: list[tuple[np.ndarray, np.ndarray]]
) -> tuple[dict[ErrorSlice, ErrorPair | None], dict[ErrorSlice, tuple[float, float]] | None, dict[str, str]]:
    per_rep = [(_kernels.subset_counts(codes, p), _kernels.subset_counts(codes, n)) for p, n in draws]
    pairs: dict[ErrorSlice, ErrorPair | None] = {}
    std: dict[ErrorSlice, tuple[float, float]] = {}
    reasons: dict[str, str] = {}
    for s in SLICES:
        reps = [error_pair(pc, nc, s) for pc, nc in per_rep]
        bad = next((r for r in reps if isinstance(r, str)), None)
        if bad is not None:
            pairs[s] = None
            reasons[f"control.{s.value}"] = bad
            continue
        ep = np.array([r.err_pos for r in reps])
        en = np.array([r.err_neg for r in reps])
        pairs[s] = ErrorPair(
            float(ep.mean()), float(en.mean()),
            int(round(np.mean([r.n_pos for r in reps]))), int(round(np.mean([r.n_neg for r in reps]))),
        )
        if len(reps) > 1:
            std[s] = (float(ep.std(ddof=1)), float(en.std(ddof=1)))
    return pairs, (std if len(draws) > 1 else None), reasons


def _audit_row(
    dataset: AuditDataset,
    attribute: str,
    counts: np.ndarray,
    codes: np.ndarray,
    spec: ControlGroupSpec,
) -> BiasRow:
    reg = dataset.registry
    idx = reg.index(attribute)
    pos_c, neg_c = counts[idx, 2], counts[idx, 0]
    n_pos, n_neg = int(pos_c.sum()), int(neg_c.sum())
    data: dict[ErrorSlice, ErrorPair | None] = {}
    reasons: dict[str, str] = {}
    for s in SLICES:
        p = error_pair(pos_c, neg_c, s)
        if isinstance(p, str):
            data[s] = None
            reasons[f"data.{s.value}"] = p
        else:
            data[s] = p
    if n_pos and n_neg:
        draws = _draw_controls(len(dataset), n_pos, n_neg, idx, spec)
        control, std, ctl_reasons = _control_pairs(codes, draws)
        reasons.update(ctl_reasons)
    else:
        control = {s: None for s in SLICES}
        std = None
        for s in SLICES:
            reasons[f"control.{s.value}"] = "no control groups: a data group is empty"
    return BiasRow.from_pairs(
        attribute, data, control, reg[attribute].category.value, n_pos, n_neg, std, reasons
    )


def pdrp_ddrp(
    dataset: AuditDataset, attribute: str, spec: ControlGroupSpec = ControlGroupSpec()
) -> tuple[RPValue, RPValue]:
    """CRP on pristine-only and on fake-only errors, from the audit's control draw."""
    counts = _kernels.group_counts(dataset.labels, dataset.outcome_codes())
    row = _audit_row(dataset, attribute, counts, dataset.outcome_codes(), spec)
    return row.pdrp, row.ddrp


def _kept_names(registry: AttributeRegistry, kept: SupportFilterResult | Iterable[str] | None) -> list[str]:
    if kept is None:
        return registry.names
    names = set(kept.kept_names()) if isinstance(kept, SupportFilterResult) else set(kept)
    for n in names:
        registry.index(n)
    return [a.name for a in registry if a.name in names]


def audit(
    dataset: AuditDataset,
    registry: AttributeRegistry | None = None,
    kept: SupportFilterResult | Iterable[str] | None = None,
    spec: ControlGroupSpec = ControlGroupSpec(),
    provenance: Mapping[str, Any] | None = None,
) -> BiasReport:
    """One :class:`BiasRow` per kept attribute, in registry order.

    Output is a pure function of the dataset, attribute set and ``spec``.
    Degenerate groups become row-level sentinels rather than errors.
    """
    registry = registry or dataset.registry
    if registry.names != dataset.registry.names:
        raise ValueError("registry does not match the dataset's registry")
    names = _kept_names(registry, kept)
    codes = dataset.outcome_codes()
    counts = _kernels.group_counts(dataset.labels, codes) if names else np.zeros((0, 3, 4), dtype=np.int64)
    rows = [_audit_row(dataset, n, counts, codes, spec) for n in names]
    prov: dict[str, Any] = {
        "tool": f"dfaudit {__version__}",
        "seed": spec.seed,
        "reps": spec.reps,
        "replacement": spec.replacement,
        "n_samples": len(dataset),
        "attributes": names,
        "dataset_sha256": dataset.digest(),
    }
    if isinstance(kept, SupportFilterResult):
        prov["min_count"] = kept.min_count
    if provenance:
        prov.update(provenance)
    return BiasReport(rows, prov)


def rp_percent(value: RPValue) -> float:
    """Finite value in percent (NaN for sentinels)."""
    return 100.0 * value.value if value.is_finite and value.value is not None else math.nan
