"""Synthetic turnaround logs with a known causal structure behind the delay."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Sequence

import numpy as np

from .eventlog import Event, EventLog, format_timestamp

Step = str | tuple[str, ...]
BASE_TIME = datetime(2024, 1, 1)


def log_from_sequences(sequences: Iterable[Sequence[str]], step: float = 60.0) -> EventLog:
    """Event log with one case per activity sequence, events ``step`` seconds apart."""
    events = []
    for i, seq in enumerate(sequences):
        case = f"c{i:05d}"
        t0 = BASE_TIME + timedelta(days=i)
        for k, a in enumerate(seq):
            t = t0 + timedelta(seconds=k * step)
            events.append(Event(a, case, t, t))
    return EventLog.from_events(events)


@dataclass(frozen=True)
class FlightSpec:
    """Ground-truth turnaround process.

    ``chain`` lists the steps in order; a tuple step is a parallel block.
    Gaps between steps are uniform on ``gap_range`` seconds, except the
    ``planted`` gaps which are uniform on ``planted_range``. A latent factor
    lengthens the execution of ``latent_activity`` (and therefore the delay)
    and the post-takeoff gap ``latent_gap``, which also grows with the gaps
    ``latent_gap_parents`` (drawn on ``latent_gap_parent_range``). ``self_loops`` gives per-activity repeat
    probabilities; ``exceptions`` lists adjacent activity pairs that swap
    order with probability ``exception_prob``.
    """

    chain: tuple[Step, ...] = ("ARRIVE", "UNLOAD", "CLEAN", ("CATER", "FUEL"), "BOARD",
                               "PUSHBACK", "REALTAKEOFF", "CLIMB", "CRUISE", "DESCEND")
    takeoff: str = "REALTAKEOFF"
    gap_range: tuple[float, float] = (60.0, 90.0)
    exec_range: tuple[float, float] = (120.0, 150.0)
    planted: tuple[str, ...] = ("UNLOAD_CLEAN", "BOARD_PUSHBACK")
    planted_range: tuple[float, float] = (0.0, 1200.0)
    latent_activity: str | None = "PUSHBACK"
    latent_gap: str | None = "CRUISE_DESCEND"
    latent_gap_parents: tuple[str, ...] = ("REALTAKEOFF_CLIMB", "CLIMB_CRUISE")
    latent_range: tuple[float, float] = (0.0, 1200.0)
    latent_gap_parent_range: tuple[float, float] = (0.0, 1200.0)
    self_loops: dict[str, float] = field(default_factory=lambda: {"CLEAN": 0.1})
    exceptions: tuple[tuple[str, str], ...] = (("BOARD", "PUSHBACK"),)
    exception_prob: float = 0.02
    scheduled_attribute: str = "ScheduledTakeoff"
    target: str = "FLIGHTDELAY"

    def __post_init__(self):
        names = self.activities
        if len(names) != len(set(names)):
            raise ValueError("activities must be unique")
        if self.takeoff not in names:
            raise ValueError(f"takeoff activity {self.takeoff!r} is not in the chain")
        gaps = set(self.gap_names)
        for g in (*self.planted, self.latent_gap, *self.latent_gap_parents):
            if g is not None and g not in gaps:
                raise ValueError(f"{g!r} is not a gap of the chain")
        if self.latent_activity is not None and self.latent_activity not in names:
            raise ValueError(f"unknown latent activity {self.latent_activity!r}")
        for a, b in self.exceptions:
            if not self._adjacent_singles(a, b):
                raise ValueError(f"exception pair {a}/{b} must be consecutive single steps")
        for a, p in self.self_loops.items():
            if a not in names or not 0 <= p < 1:
                raise ValueError(f"bad self-loop setting for {a!r}")
        if not 0 <= self.exception_prob <= 1:
            raise ValueError("exception_prob must lie in [0, 1]")

    @property
    def activities(self) -> list[str]:
        out = []
        for s in self.chain:
            out.extend(s if isinstance(s, tuple) else (s,))
        return out

    @property
    def gap_names(self) -> list[str]:
        """Indicator names of the gaps; a parallel block spans split to join."""
        out = []
        i = 0
        while i + 1 < len(self.chain):
            a, b = self.chain[i], self.chain[i + 1]
            if isinstance(b, tuple):
                out.append(f"{a}_{self.chain[i + 2]}")
                i += 2
            else:
                out.append(f"{a}_{b}")
                i += 1
        return out

    def _adjacent_singles(self, a: str, b: str) -> bool:
        for x, y in zip(self.chain, self.chain[1:]):
            if x == a and y == b:
                return True
        return False

    @property
    def pre_takeoff_gaps(self) -> list[str]:
        names = self.gap_names
        cut = next(i for i, g in enumerate(names) if g.endswith("_" + self.takeoff))
        return names[: cut + 1]

    @property
    def direct_causes(self) -> set[str]:
        """Indicators planted as strong direct causes of the delay."""
        return set(self.planted)

    @property
    def confounded(self) -> set[tuple[str, str]]:
        """Pairs sharing the latent factor without a directed path between them."""
        if self.latent_activity is None or self.latent_gap is None:
            return set()
        return {tuple(sorted((self.latent_gap, self.target)))}


def _uniform(rng, lo_hi):
    return float(rng.uniform(*lo_hi))


def generate_flight_log(spec: FlightSpec, n_cases: int, seed: int | None = None) -> EventLog:
    if n_cases < 1:
        raise ValueError("n_cases must be at least 1")
    rng = np.random.default_rng(seed)
    events: list[Event] = []
    planted = set(spec.planted)
    for i in range(n_cases):
        case = f"F{i:05d}"
        latent = _uniform(rng, spec.latent_range)
        gap = {g: _uniform(rng, spec.planted_range if g in planted else spec.gap_range) for g in spec.gap_names}
        for g in spec.latent_gap_parents:
            gap[g] = _uniform(rng, spec.latent_gap_parent_range)
        if spec.latent_gap is not None:
            gap[spec.latent_gap] += latent + sum(gap[g] for g in spec.latent_gap_parents)
        steps = list(spec.chain)
        for a, b in spec.exceptions:
            if rng.random() < spec.exception_prob:
                k = steps.index(a)
                steps[k], steps[k + 1] = steps[k + 1], steps[k]
        gaps_in_order = [gap[g] for g in spec.gap_names]

        t = BASE_TIME + timedelta(days=i)
        start_of_case = t
        case_events: list[tuple[str, datetime, datetime]] = []
        k = 0
        for pos, s in enumerate(steps):
            if isinstance(s, tuple):
                # branches start together; the gap of the block is absorbed by branch spreads
                block = gaps_in_order[k] if k < len(gaps_in_order) else 0.0
                ends = []
                for b in s:
                    b_start = t + timedelta(seconds=_uniform(rng, spec.gap_range))
                    b_end = b_start + timedelta(seconds=max(0.0, block - _uniform(rng, spec.gap_range)) + _uniform(rng, spec.exec_range))
                    case_events.append((b, b_start, b_end))
                    ends.append(b_end)
                t = max(ends) + timedelta(seconds=_uniform(rng, spec.gap_range))
                k += 1
                continue
            if pos > 0 and not isinstance(steps[pos - 1], tuple):
                t += timedelta(seconds=gaps_in_order[k])
                k += 1
            dur = _uniform(rng, spec.exec_range)
            if s == spec.latent_activity:
                dur += latent
            case_events.append((s, t, t + timedelta(seconds=dur)))
            t += timedelta(seconds=dur)
            p = spec.self_loops.get(s, 0.0)
            while rng.random() < p:
                t += timedelta(seconds=_uniform(rng, spec.gap_range) / 4)
                dur = _uniform(rng, spec.exec_range) / 4
                case_events.append((s, t, t + timedelta(seconds=dur)))
                t += timedelta(seconds=dur)
        scheduled = start_of_case + timedelta(seconds=_planned_offset(spec))
        for a, s0, s1 in case_events:
            extras = {spec.scheduled_attribute: format_timestamp(scheduled)} if a == spec.takeoff else {}
            events.append(Event(a, case, _ms(s0), _ms(s1), extras=extras))
    return EventLog.from_events(events)


def _ms(t: datetime) -> datetime:
    return t.replace(microsecond=(t.microsecond // 1000) * 1000)


def _planned_offset(spec: FlightSpec) -> float:
    """Nominal seconds from case start to takeoff when every gap and execution is at its midpoint."""
    mid_gap = sum(spec.gap_range) / 2
    mid_exec = sum(spec.exec_range) / 2
    total = 0.0
    for g in spec.pre_takeoff_gaps:
        total += sum(spec.planted_range) / 2 if g in spec.planted else mid_gap
    n_exec = spec.activities.index(spec.takeoff)
    return total + n_exec * mid_exec
