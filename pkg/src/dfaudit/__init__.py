"""Attribute-conditioned bias audits for binary pristine-vs-fake classifiers."""

from __future__ import annotations

__version__ = "0.1.0"

from ._kernels import available_backends, get_backend, set_backend
from .model import (
    DEFAULT_REGISTRY,
    AnnotationTable,
    Attribute,
    AttributeRegistry,
    AuditDataset,
    Category,
    DatasetManifest,
    JoinPolicy,
    PredictionRecord,
    PredictionSet,
    SampleClass,
    TernaryLabel,
    join,
    validate_annotations,
)

__all__ = [
    "__version__",
    "available_backends",
    "get_backend",
    "set_backend",
    "DEFAULT_REGISTRY",
    "AnnotationTable",
    "Attribute",
    "AttributeRegistry",
    "AuditDataset",
    "Category",
    "DatasetManifest",
    "JoinPolicy",
    "PredictionRecord",
    "PredictionSet",
    "SampleClass",
    "TernaryLabel",
    "join",
    "validate_annotations",
]
