"""Structured event log: one JSON object per line, bit-stable for a fixed seed."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Union

FIELDS = ("time", "kind", "sender", "recipient", "round", "digest", "note")


@dataclass(slots=True)
class TraceRecord:
    time: int
    kind: str
    sender: Optional[int] = None
    recipient: Optional[int] = None
    round: Optional[int] = None
    digest: Optional[str] = None
    note: Any = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "TraceRecord":
        return cls(**{k: d.get(k) for k in FIELDS})


class Trace:
    def __init__(self, records: Optional[Iterable[TraceRecord]] = None):
        self.records: list[TraceRecord] = list(records or [])

    def emit(self, time: int, kind: str, *, sender=None, recipient=None, round=None,
             digest: Union[bytes, str, None] = None, note=None) -> TraceRecord:
        if isinstance(digest, bytes):
            digest = digest.hex()
        rec = TraceRecord(time, kind, sender, recipient, round, digest, note)
        self.records.append(rec)
        return rec

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def of_kind(self, *kinds: str) -> list[TraceRecord]:
        return [r for r in self.records if r.kind in kinds]

    def lines(self) -> Iterator[str]:
        for r in self.records:
            yield r.to_json()

    def dump(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            for line in self.lines():
                fh.write(line)
                fh.write("\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Trace":
        with open(path) as fh:
            return cls(TraceRecord.from_dict(json.loads(line)) for line in fh if line.strip())

    def header(self) -> dict:
        for r in self.records:
            if r.kind == "scenario":
                return r.note
        raise ValueError("trace has no scenario header")
