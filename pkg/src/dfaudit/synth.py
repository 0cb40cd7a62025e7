"""Synthetic populations with known prevalences, planted correlations and error rates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bias import ErrorSlice
from .errors import InvalidConfig, UndefinedExpectation
from .ingest import write_annotations, write_manifest, write_predictions
from .model import DEFAULT_REGISTRY, AnnotationTable, AttributeRegistry, DatasetManifest, PredictionSet


@dataclass(frozen=True)
class AttributeSpec:
    prevalence: float = 0.5  # share of +1 among defined labels
    undefined_rate: float = 0.0


@dataclass(frozen=True)
class BiasSpec:
    """Misclassification probabilities conditioned on the attribute's sign and the true class.

    Samples where the attribute is undefined use the base error rates.
    """

    attribute: str
    p_err_pos_fake: float
    p_err_neg_fake: float
    p_err_pos_pristine: float
    p_err_neg_pristine: float


@dataclass(frozen=True)
class PlantedPair:
    """``b`` copies ``a``'s latent sign with probability ``co_occurrence``."""

    a: str
    b: str
    co_occurrence: float


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int
    seed: int = 0
    fake_fraction: float = 0.5
    attributes: tuple[str, ...] | None = None  # None: the default 47
    default: AttributeSpec = AttributeSpec()
    per_attribute: Mapping[str, AttributeSpec] = field(default_factory=dict)
    base_error_fake: float = 0.1
    base_error_pristine: float = 0.1
    bias: BiasSpec | None = None
    planted_pairs: tuple[PlantedPair, ...] = ()
    samples_per_identity: int = 30

    def __post_init__(self) -> None:
        self.validate()

    @property
    def registry(self) -> AttributeRegistry:
        if self.attributes is None:
            return DEFAULT_REGISTRY
        if all(n in DEFAULT_REGISTRY for n in self.attributes):
            return DEFAULT_REGISTRY.subset(self.attributes)  # keeps default order and categories
        return AttributeRegistry.from_names(self.attributes)

    def spec_of(self, name: str) -> AttributeSpec:
        return self.per_attribute.get(name, self.default)

    def validate(self) -> None:
        def prob(x: float, what: str) -> None:
            if not 0.0 <= x <= 1.0:
                raise InvalidConfig(f"{what} = {x} is not a probability")

        if self.n_samples < 1:
            raise InvalidConfig("n_samples must be positive")
        if not 0.0 < self.fake_fraction < 1.0:
            raise InvalidConfig("fake_fraction must lie strictly between 0 and 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig("seed must be an unsigned 64-bit integer")
        if self.samples_per_identity < 1:
            raise InvalidConfig("samples_per_identity must be positive")
        if self.attributes is not None and len(set(self.attributes)) != len(self.attributes):
            raise InvalidConfig("attribute names must be unique")
        names = set(self.registry.names)
        for name, spec in [("default", self.default), *self.per_attribute.items()]:
            if name != "default" and name not in names:
                raise InvalidConfig(f"unknown attribute {name!r}")
            prob(spec.prevalence, f"{name}.prevalence")
            prob(spec.undefined_rate, f"{name}.undefined_rate")
        prob(self.base_error_fake, "base_error_fake")
        prob(self.base_error_pristine, "base_error_pristine")
        if self.bias is not None:
            if self.bias.attribute not in names:
                raise InvalidConfig(f"unknown bias attribute {self.bias.attribute!r}")
            for k, v in asdict(self.bias).items():
                if k != "attribute":
                    prob(v, f"bias.{k}")
        seen_b = set()
        for p in self.planted_pairs:
            if p.a not in names or p.b not in names or p.a == p.b:
                raise InvalidConfig(f"invalid planted pair ({p.a!r}, {p.b!r})")
            if p.b in seen_b:
                raise InvalidConfig(f"attribute {p.b!r} is the copy side of two planted pairs")
            seen_b.add(p.b)
            prob(p.co_occurrence, f"co_occurrence({p.a}, {p.b})")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "fake_fraction": self.fake_fraction,
            "attributes": None if self.attributes is None else list(self.attributes),
            "default": asdict(self.default),
            "per_attribute": {k: asdict(v) for k, v in self.per_attribute.items()},
            "base_error_fake": self.base_error_fake,
            "base_error_pristine": self.base_error_pristine,
            "bias": None if self.bias is None else asdict(self.bias),
            "planted_pairs": [asdict(p) for p in self.planted_pairs],
            "samples_per_identity": self.samples_per_identity,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidConfig(f"unknown config keys {sorted(extra)}")
        try:
            kw: dict[str, Any] = dict(d)
            if kw.get("attributes") is not None:
                kw["attributes"] = tuple(kw["attributes"])
            if "default" in kw:
                kw["default"] = AttributeSpec(**kw["default"])
            if "per_attribute" in kw:
                kw["per_attribute"] = {k: AttributeSpec(**v) for k, v in kw["per_attribute"].items()}
            if kw.get("bias") is not None:
                kw["bias"] = BiasSpec(**kw["bias"])
            if "planted_pairs" in kw:
                kw["planted_pairs"] = tuple(PlantedPair(**p) for p in kw["planted_pairs"])
            return cls(**kw)
        except TypeError as e:
            raise InvalidConfig(str(e)) from None

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise InvalidConfig(f"invalid JSON: {e}") from None


def _latent_signs(rng: np.random.Generator, n: int, prevalence: float) -> np.ndarray:
    return np.where(rng.random(n) < prevalence, 1, -1).astype(np.int8)


def generate_population(config: SynthConfig) -> tuple[AnnotationTable, PredictionSet, DatasetManifest]:
    """Draw a population; identical configs give identical outputs.

    Draw order: latent signs per attribute in registry order, planted-pair
    copies, undefined masks, truth, then misclassification coins.
    """
    config.validate()
    reg = config.registry
    n = config.n_samples
    rng = np.random.Generator(np.random.PCG64(config.seed))
    labels = np.empty((n, len(reg)), dtype=np.int8)
    for j, name in enumerate(reg.names):
        labels[:, j] = _latent_signs(rng, n, config.spec_of(name).prevalence)
    for pair in config.planted_pairs:
        a, b = reg.index(pair.a), reg.index(pair.b)
        copy = rng.random(n) < pair.co_occurrence
        labels[copy, b] = labels[copy, a]
    for j, name in enumerate(reg.names):
        rate = config.spec_of(name).undefined_rate
        if rate > 0:
            labels[rng.random(n) < rate, j] = 0

    truth = (rng.random(n) < config.fake_fraction).astype(np.uint8)
    p_err = np.where(truth == 1, config.base_error_fake, config.base_error_pristine)
    if config.bias is not None:
        b = config.bias
        col = labels[:, reg.index(b.attribute)]
        fake = truth == 1
        p_err = np.where((col == 1) & fake, b.p_err_pos_fake, p_err)
        p_err = np.where((col == -1) & fake, b.p_err_neg_fake, p_err)
        p_err = np.where((col == 1) & ~fake, b.p_err_pos_pristine, p_err)
        p_err = np.where((col == -1) & ~fake, b.p_err_neg_pristine, p_err)
    wrong = rng.random(n) < p_err
    predicted = np.where(wrong, 1 - truth, truth).astype(np.uint8)

    width = len(str(n - 1))
    ids = [f"s{i:0{width}d}" for i in range(n)]
    spi = config.samples_per_identity
    id_width = len(str((n - 1) // spi))
    identity_of = {sid: f"id{i // spi:0{id_width}d}" for i, sid in enumerate(ids)}
    return (
        AnnotationTable(reg, ids, labels),
        PredictionSet(ids, truth, predicted),
        DatasetManifest(f"synth-{config.seed}", identity_of),
    )


def _slice_probs(config: SynthConfig, attribute: str, slice_: ErrorSlice) -> tuple[float, float]:
    b = config.bias
    if b is not None and b.attribute == attribute:
        fake = (b.p_err_pos_fake, b.p_err_neg_fake)
        pristine = (b.p_err_pos_pristine, b.p_err_neg_pristine)
    else:
        fake = (config.base_error_fake,) * 2
        pristine = (config.base_error_pristine,) * 2
    if slice_ is ErrorSlice.FAKE:
        return fake
    if slice_ is ErrorSlice.PRISTINE:
        return pristine
    return (fake[0] + pristine[0]) / 2, (fake[1] + pristine[1]) / 2


def expected_rp(config: SynthConfig, attribute: str, slice_: ErrorSlice | str = ErrorSlice.BALANCED) -> float:
    """Analytic ``1 - p+/p-`` for the configured error probabilities."""
    config.registry.index(attribute)
    p_pos, p_neg = _slice_probs(config, attribute, ErrorSlice(slice_))
    if p_neg == 0:
        raise UndefinedExpectation(f"configured negative-group error for {attribute!r} is 0")
    return 1.0 - p_pos / p_neg


def write_population(
    out_dir: str | Path,
    config: SynthConfig,
    population: tuple[AnnotationTable, PredictionSet, DatasetManifest] | None = None,
) -> dict[str, Any]:
    """Write annotations.csv, predictions.csv, manifest.json and summary.json; return the summary."""
    table, preds, manifest = population or generate_population(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "annotations.csv", "wb") as fh:
        write_annotations(table, fh)
    with open(out / "predictions.csv", "wb") as fh:
        write_predictions(preds, fh)
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        write_manifest(manifest, fh)
    summary = {
        "n_samples": len(table),
        "n_fake": int(preds.truth.sum()),
        "label_crc32": table.checksum(),
        "config": config.to_dict(),
    }
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary
