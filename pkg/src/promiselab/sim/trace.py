"""Trace records and their line-delimited serialization.

One JSON object per line, keys always in the order of ``FIELDS``, UTF-8,
LF endings. Two traces are equal iff their serializations are byte-equal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

FIELDS = (
    "global_step",
    "observer",
    "observer_proper_time",
    "kind",
    "message_id",
    "body_label",
    "payload",
)


@dataclass(frozen=True)
class Event:
    """One observation. ``message_id`` is empty for interior steps."""

    global_step: int
    observer: str
    observer_proper_time: int
    kind: str
    message_id: str = ""
    body_label: str = ""
    payload: Any = None

    def to_line(self) -> str:
        row = {k: getattr(self, k) for k in FIELDS}
        return json.dumps(row, ensure_ascii=False, separators=(",", ":"), default=str)

    @classmethod
    def from_line(cls, line: str) -> "Event":
        row = json.loads(line)
        missing = [k for k in FIELDS if k not in row]
        if missing:
            raise ValueError(f"trace record missing fields {missing}")
        return cls(**{k: row[k] for k in FIELDS})


@dataclass
class Trace:
    events: list[Event] = field(default_factory=list)
    stats: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return self.dumps() == other.dumps()

    def append(self, event: Event) -> None:
        self.events.append(event)

    def dumps(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def to_bytes(self) -> bytes:
        return self.dumps().encode("utf-8")

    def write(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls([Event.from_line(line) for line in text.split("\n") if line.strip()])

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        with open(path, "rb") as fh:
            return cls.loads(fh.read().decode("utf-8"))

    def for_observer(self, agent: str) -> list[Event]:
        return [e for e in self.events if e.observer == agent]

    def select(self, observer: str | None = None, kind: str | None = None, label: str | None = None) -> list[Event]:
        return [
            e
            for e in self.events
            if (observer is None or e.observer == observer)
            and (kind is None or e.kind == kind)
            and (label is None or e.body_label == label)
        ]

    def proper_time(self, agent: str) -> int:
        times = [e.observer_proper_time for e in self.events if e.observer == agent]
        return max(times, default=0)

    def states(self, agent: str, variable: str) -> list:
        """Values taken by an interior variable, in proper-time order."""
        return [e.payload for e in self.select(agent, "state", variable)]


def iter_lines(events: Iterable[Event]) -> Iterator[str]:
    for e in events:
        yield e.to_line()
