"""Event records, case traces and directly-follows statistics."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping, TextIO

REQUIRED_COLUMNS = ("Case", "Activity", "Timestamp")
STANDARD_COLUMNS = ("Case", "type", "Activity", "Resource", "Timestamp", "lifecycle:transition")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S.%f"


class LogParseError(ValueError):
    """Raised for malformed event-log input."""


class EmptyLogError(LogParseError):
    pass


@dataclass(frozen=True)
class Event:
    activity: str
    case_id: str
    t_start: datetime
    t_end: datetime
    resource: str | None = None
    lifecycle: str | None = None
    extras: Mapping[str, str] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.activity:
            raise ValueError("event activity must be nonempty")
        if not self.case_id:
            raise ValueError("event case_id must be nonempty")
        if self.t_start > self.t_end:
            raise ValueError(f"event {self.activity!r} in case {self.case_id!r} ends before it starts")

    def sort_key(self):
        # trailing fields only separate otherwise identical rows, so input order never matters
        return (self.t_start, self.t_end, self.activity, self.resource or "", self.lifecycle or "",
                tuple(sorted(self.extras.items())))


@dataclass(frozen=True)
class Trace:
    case_id: str
    events: tuple[Event, ...]

    def __post_init__(self):
        if any(e.case_id != self.case_id for e in self.events):
            raise ValueError(f"trace {self.case_id!r} holds events from another case")

    @classmethod
    def from_events(cls, case_id: str, events: Iterable[Event]) -> "Trace":
        return cls(case_id, tuple(sorted(events, key=Event.sort_key)))

    @property
    def activities(self) -> tuple[str, ...]:
        return tuple(e.activity for e in self.events)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]

    @property
    def activity_universe(self) -> frozenset[str]:
        return frozenset(e.activity for t in self.traces for e in t.events)

    @classmethod
    def from_events(cls, events: Iterable[Event]) -> "EventLog":
        by_case: dict[str, list[Event]] = {}
        for e in events:
            by_case.setdefault(e.case_id, []).append(e)
        return cls(tuple(Trace.from_events(c, by_case[c]) for c in sorted(by_case)))

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    try:
        return datetime.strptime(text, TIMESTAMP_FORMAT)
    except ValueError:
        # plain ISO-8601 without milliseconds is tolerated
        return datetime.fromisoformat(text)


def format_timestamp(ts: datetime) -> str:
    return ts.strftime(TIMESTAMP_FORMAT)[:-3]


def parse_log(source: TextIO | str) -> EventLog:
    """Parse a CSV event log into an :class:`EventLog`.

    ``source`` is a text stream or a string holding the CSV. Each row is one
    event; rows with a ``t_end`` column use it as completion time, otherwise
    the event is instantaneous. Columns beyond the standard layout are kept
    in ``Event.extras``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.DictReader(source)
    if reader.fieldnames is None:
        raise EmptyLogError("empty log")
    missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise LogParseError(f"header lacks required column(s): {', '.join(missing)}")

    events = []
    errors = []
    for row_no, row in enumerate(reader, start=2):
        blank = [c for c in REQUIRED_COLUMNS if not (row.get(c) or "").strip()]
        if blank:
            errors.append(f"row {row_no}: missing {', '.join(blank)}")
            continue
        try:
            t_start = parse_timestamp(row["Timestamp"])
            t_end = parse_timestamp(row["t_end"]) if (row.get("t_end") or "").strip() else t_start
        except ValueError as exc:
            raise LogParseError(f"row {row_no}: malformed timestamp ({exc})") from None
        extras = {
            k: v for k, v in row.items()
            if k not in STANDARD_COLUMNS and k != "t_end" and k is not None and v
        }
        try:
            events.append(Event(
                activity=row["Activity"].strip(),
                case_id=row["Case"].strip(),
                t_start=t_start,
                t_end=t_end,
                resource=row.get("Resource") or None,
                lifecycle=row.get("lifecycle:transition") or None,
                extras=extras,
            ))
        except ValueError as exc:
            errors.append(f"row {row_no}: {exc}")
    if errors:
        raise LogParseError("; ".join(errors))
    if not events:
        raise EmptyLogError("empty log")
    return EventLog.from_events(events)


def write_log(log: EventLog, stream: TextIO) -> None:
    """Serialize ``log`` in the layout :func:`parse_log` reads."""
    extra_cols = sorted({k for t in log for e in t.events for k in e.extras})
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(list(STANDARD_COLUMNS) + ["t_end"] + extra_cols)
    for trace in log:
        for e in trace.events:
            writer.writerow(
                [e.case_id, "task", e.activity, e.resource or "", format_timestamp(e.t_start),
                 e.lifecycle or "", format_timestamp(e.t_end)]
                + [e.extras.get(k, "") for k in extra_cols]
            )


def directly_follows_counts(log: EventLog) -> Counter:
    """Count how often activity B immediately follows activity A, over all traces."""
    counts: Counter = Counter()
    for trace in log:
        acts = trace.activities
        counts.update(zip(acts, acts[1:]))
    return counts
