"""Exception types raised across dfaudit."""

from __future__ import annotations


class DfauditError(Exception):
    """Base class for data errors (the CLI maps these to exit code 2)."""


class ParseError(DfauditError):
    def __init__(self, line: int, column: int | str, reason: str):
        self.line = line
        self.column = column
        self.reason = reason
        super().__init__(f"line {line}, column {column}: {reason}")


class HeaderMismatch(DfauditError):
    def __init__(self, unknown: list[str], missing: list[str]):
        self.unknown = list(unknown)
        self.missing = list(missing)
        parts = []
        if unknown:
            parts.append(f"unknown columns {unknown}")
        if missing:
            parts.append(f"missing columns {missing}")
        super().__init__("header mismatch: " + "; ".join(parts or ["duplicate columns"]))


class MissingColumn(DfauditError):
    pass


class MismatchedIds(DfauditError):
    def __init__(self, count: int):
        self.count = count
        super().__init__(f"annotation and prediction id sets differ by {count} ids")


class DuplicateSampleId(DfauditError):
    def __init__(self, sample_id: str, line: int | None = None):
        self.sample_id = sample_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate sample id {sample_id!r}{where}")


class EmptyManifest(DfauditError):
    pass


class MissingIdentity(DfauditError):
    pass


class DuplicatePair(DfauditError):
    def __init__(self, sample_id: str, attribute: str):
        self.sample_id = sample_id
        self.attribute = attribute
        super().__init__(f"duplicate confidence record for ({sample_id!r}, {attribute!r})")


class UnknownAttribute(DfauditError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown attribute {name!r}")


class NoOverlap(DfauditError):
    def __init__(self, attribute: str):
        self.attribute = attribute
        super().__init__(f"no jointly defined cells for attribute {attribute!r}")


class EmptyTable(DfauditError):
    pass


class DegenerateGroup(DfauditError):
    def __init__(self, attribute: str, which: str):
        self.attribute = attribute
        self.which = which
        super().__init__(f"{attribute}: {which}")


class InsufficientData(DfauditError):
    pass


class InvalidConfig(DfauditError):
    pass


class UndefinedExpectation(DfauditError):
    pass
