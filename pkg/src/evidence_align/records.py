"""Domain records shared by every pipeline stage, plus line-delimited JSON I/O.

Each record type is a frozen dataclass. Fields that are not part of the
declared schema are kept in ``extra`` so that a load/save cycle never drops
data written by other tools.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable, Iterator, TypeVar

PASSAGE_DELIMITER = "\n"


class RecordError(ValueError):
    """Malformed or invalid record data."""


class ConfigError(ValueError):
    """Invalid configuration value or selection."""


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


class _Record:
    """Mixin providing dict conversion with unknown-field preservation."""

    _required: tuple[str, ...] = ()

    def __post_init__(self):
        for f in fields(self):
            if f.name == "extra":
                continue
            object.__setattr__(self, f.name, _freeze(getattr(self, f.name)))
        object.__setattr__(self, "extra", dict(self.extra))
        self.validate()

    def validate(self) -> None:
        pass

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            if f.name == "extra":
                continue
            value = getattr(self, f.name)
            if value is None and f.name not in self._required:
                continue
            out[f.name] = list(value) if isinstance(value, tuple) else value
        for key, value in self.extra.items():
            out.setdefault(key, value)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]):
        if not isinstance(data, dict):
            raise RecordError(f"expected a JSON object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)} - {"extra"}
        missing = [name for name in cls._required if name not in data]
        if missing:
            raise RecordError(f"missing field(s): {', '.join(missing)}")
        kwargs = {k: v for k, v in data.items() if k in known}
        extra = {k: v for k, v in data.items() if k not in known}
        try:
            return cls(**kwargs, extra=extra)
        except TypeError as exc:
            raise RecordError(str(exc)) from exc


@dataclass(frozen=True)
class QueryRecord(_Record):
    id: str
    query: str
    gold_answers: tuple[str, ...]
    relevant_passages: tuple[str, ...]
    full_answer: str | None = None
    distractor_passages: tuple[str, ...] | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=True)

    _required = ("id", "query", "gold_answers", "relevant_passages")

    def validate(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise RecordError("id must be a non-empty string")
        if not self.gold_answers:
            raise RecordError(f"record {self.id!r}: gold_answers is empty")
        if not self.relevant_passages:
            raise RecordError(f"record {self.id!r}: relevant_passages is empty")
        for p in self.relevant_passages + (self.distractor_passages or ()):
            if not isinstance(p, str) or not p.strip():
                raise RecordError(f"record {self.id!r}: empty passage")

    @property
    def passage_text(self) -> str:
        """All relevant passages joined in order (the premise P)."""
        return PASSAGE_DELIMITER.join(self.relevant_passages)

    @property
    def context(self) -> str:
        """Extractor input x: the query, a newline, then the passages."""
        return self.query + "\n" + self.passage_text


@dataclass(frozen=True)
class CandidateSet(_Record):
    query_id: str
    candidates: tuple[str, ...]
    deduped: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    _required = ("query_id", "candidates")


@dataclass(frozen=True)
class QuadQARE(_Record):
    query_id: str
    candidate_index: int
    query: str
    gold_answers: tuple[str, ...]
    passages: tuple[str, ...]
    evidence: str
    full_answer: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    _required = ("query_id", "candidate_index", "query", "gold_answers", "passages", "evidence")

    def validate(self) -> None:
        if self.candidate_index < 0:
            raise RecordError("candidate_index must be non-negative")
        if not self.gold_answers:
            raise RecordError(f"quad {self.query_id!r}: gold_answers is empty")

    @property
    def passage_text(self) -> str:
        return PASSAGE_DELIMITER.join(self.passages)


@dataclass(frozen=True)
class GeneratorResponse(_Record):
    query_id: str
    output: str
    token_count: int
    counter_name: str = "whitespace"
    extra: dict[str, Any] = field(default_factory=dict)

    _required = ("query_id", "output", "token_count")

    def validate(self) -> None:
        if not isinstance(self.token_count, int) or self.token_count < 0:
            raise RecordError(f"response {self.query_id!r}: token_count must be a non-negative integer")


R = TypeVar("R", bound=_Record)


def read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` for every non-blank line."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc


def dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, allow_nan=False)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def load(path: str | Path, cls: type[R]) -> list[R]:
    out = []
    for lineno, obj in read_jsonl(path):
        try:
            out.append(cls.from_dict(obj))
        except RecordError as exc:
            raise RecordError(f"{path}: line {lineno}: {exc}") from exc
    return out


def save(records: Iterable[_Record], path: str | Path) -> None:
    write_jsonl(path, (r.to_dict() for r in records))


def load_records(path: str | Path) -> list[QueryRecord]:
    records = load(path, QueryRecord)
    seen: set[str] = set()
    for r in records:
        if r.id in seen:
            raise RecordError(f"{path}: duplicate record id {r.id!r}")
        seen.add(r.id)
    return records


def save_records(records: Iterable[QueryRecord], path: str | Path) -> None:
    save(records, path)
