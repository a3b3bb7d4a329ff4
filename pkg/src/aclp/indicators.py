"""Per-case link-duration indicators and their equal-frequency discretization."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .bayesnet import DataSet
from .eventlog import EventLog, Trace, parse_timestamp
from .fuzzymine import ProcessModel

log = logging.getLogger(__name__)

TARGET = "FLIGHTDELAY"


@dataclass(frozen=True)
class TargetSpec:
    """How the target delay of a case is measured.

    The delay is ``t_start(actual)`` minus the timestamp held in the
    ``scheduled_attribute`` extra of that event. When the attribute is absent
    (or not configured) ``t_end(reference)`` is used instead, if a reference
    activity is given. Delays may be negative.
    """

    name: str = TARGET
    actual: str = "REALTAKEOFF"
    scheduled_attribute: str | None = "ScheduledTakeoff"
    reference: str | None = None


@dataclass
class IndicatorTable:
    variables: tuple[str, ...]
    case_ids: tuple[str, ...]
    rows: list[dict[str, float | None]]
    # (case, variable) cells where a negative duration was clamped to zero
    flagged: list[tuple[str, str]] = field(default_factory=list)

    def column(self, name: str) -> list[float | None]:
        return [r.get(name) for r in self.rows]

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["Case", *self.variables])
        for c, r in zip(self.case_ids, self.rows):
            w.writerow([c, *("" if r.get(v) is None else repr(float(r[v])) for v in self.variables)])


@dataclass
class DiscreteTable:
    variables: tuple[str, ...]
    cards: tuple[int, ...]
    values: np.ndarray
    boundaries: dict[str, list[float]]
    case_ids: tuple[str, ...]
    dropped: int = 0

    def to_dataset(self) -> DataSet:
        return DataSet(self.variables, self.cards, self.values)

    def to_csv(self, stream: TextIO) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["Case", *(f"{v}:{c}" for v, c in zip(self.variables, self.cards))])
        for c, row in zip(self.case_ids, self.values.tolist()):
            w.writerow([c, *row])

    def boundaries_json(self) -> str:
        return json.dumps({"boundaries": self.boundaries, "dropped_rows": self.dropped}, indent=2, sort_keys=True)


def indicator_name(a: str, b: str) -> str:
    return f"{a}_{b}"


def parallel_blocks(model: ProcessModel) -> list[tuple[str, tuple[str, ...], str]]:
    """Split/join blocks ``(split, branches, join)`` of the model.

    A block is a node with two or more successors that share one join. Each
    branch may only be entered from the split or a sibling and may only lead
    to the join or a sibling; siblings are either non-adjacent or linked in
    both directions (a kept two-way loop, which is how interleaved parallel
    work shows up in a directly-follows model).
    """
    succ: dict[str, set[str]] = {n: set() for n in model.nodes}
    pred: dict[str, set[str]] = {n: set() for n in model.nodes}
    for a, b in model.edges:
        if a != b and a not in model.virtual_nodes and b not in model.virtual_nodes:
            succ[a].add(b)
            pred[b].add(a)
    blocks = []
    for s in sorted(model.nodes):
        cands = sorted(b for b in succ[s] if b != s)
        by_join: dict[str, list[str]] = {}
        for b in cands:
            sibs = set(cands) - {b}
            exits = succ[b] - sibs
            if len(exits) == 1 and pred[b] - sibs == {s}:
                by_join.setdefault(next(iter(exits)), []).append(b)
        for j, branches in sorted(by_join.items()):
            if len(branches) < 2 or j == s:
                continue
            bs = set(branches)
            if any((y in succ[x]) != (x in succ[y]) for x in bs for y in bs if x < y):
                continue
            if any(not (succ[x] - bs - {j}) <= set() for x in bs):
                continue
            blocks.append((s, tuple(branches), j))
    return blocks


def _edge_duration(trace: Trace, a: str, b: str) -> float | None:
    last_a = None
    for e in trace.events:
        if e.activity == b and last_a is not None:
            return (e.t_start - last_a.t_end).total_seconds()
        if e.activity == a:
            last_a = e
    return None


def _block_duration(trace: Trace, split: str, branches: tuple[str, ...]) -> float | None:
    # each branch runs from the end of the split to the end of the branch activity;
    # the block lasts as long as its slowest branch
    s_end = None
    done: dict[str, float] = {}
    for e in trace.events:
        if e.activity == split and not done:
            s_end = e.t_end
        elif e.activity in branches and s_end is not None and e.activity not in done:
            done[e.activity] = (e.t_end - s_end).total_seconds()
    if s_end is None or len(done) < len(branches):
        return None
    return max(done.values())


def _target_value(trace: Trace, spec: TargetSpec) -> float | None:
    actual = next((e for e in trace.events if e.activity == spec.actual), None)
    if actual is None:
        return None
    if spec.scheduled_attribute and spec.scheduled_attribute in actual.extras:
        scheduled = parse_timestamp(actual.extras[spec.scheduled_attribute])
        return (actual.t_start - scheduled).total_seconds()
    if spec.reference:
        ref = [e for e in trace.events if e.activity == spec.reference and e.t_end <= actual.t_start]
        if ref:
            return (actual.t_start - ref[-1].t_end).total_seconds()
    return None


def compute_indicators(event_log: EventLog, model: ProcessModel, target: TargetSpec | None = None,
                       detect_parallel: bool = True) -> IndicatorTable:
    """One row per case: a duration per retained model edge plus the target delay.

    Edge ``A -> B`` yields ``A_B`` = start of the first ``B`` that follows an
    ``A`` minus the end of the last ``A`` before it. A parallel block is
    reported as one variable ``split_join`` holding the longest branch.
    Cases lacking an activity get a missing cell.
    """
    target = target or TargetSpec()
    edges = sorted((a, b) for a, b in model.edges
                   if a != b and a not in model.virtual_nodes and b not in model.virtual_nodes)
    blocks = parallel_blocks(model) if detect_parallel else []
    covered = set()
    for s, branches, j in blocks:
        covered |= {(s, b) for b in branches} | {(b, j) for b in branches}
        covered |= {(x, y) for x in branches for y in branches}
    plain = [e for e in edges if e not in covered]
    variables = [indicator_name(a, b) for a, b in plain]
    variables += [indicator_name(s, j) for s, _, j in blocks]
    if target.name in variables:
        raise ValueError(f"target name {target.name!r} collides with an edge indicator")
    variables.append(target.name)

    rows, flagged = [], []
    for trace in event_log.traces:
        row: dict[str, float | None] = {}
        for a, b in plain:
            row[indicator_name(a, b)] = _edge_duration(trace, a, b)
        for s, branches, j in blocks:
            row[indicator_name(s, j)] = _block_duration(trace, s, branches)
        for v, x in row.items():
            if x is not None and x < 0:
                row[v] = 0.0
                flagged.append((trace.case_id, v))
        row[target.name] = _target_value(trace, target)
        rows.append(row)
    return IndicatorTable(tuple(variables), tuple(t.case_id for t in event_log.traces), rows, flagged)


def bin_boundaries(values: np.ndarray, bins: int) -> list[float]:
    """Equal-frequency cut points.

    The k-th cut sits after the ``ceil(k*n/bins)``-th smallest value, at the
    midpoint to the next larger distinct value; cuts that would split equal
    values are dropped.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    cuts: list[float] = []
    for k in range(1, bins):
        lo = v[math.ceil(k * n / bins) - 1]
        above = v[v > lo]
        if above.size == 0:
            continue
        cut = (lo + above[0]) / 2.0
        if not cuts or cut > cuts[-1]:
            cuts.append(float(cut))
    return cuts


def discretize(table: IndicatorTable, bins: int = 3) -> DiscreteTable:
    if bins < 2:
        raise ValueError("need at least 2 bins")
    keep = [i for i, r in enumerate(table.rows) if all(r.get(v) is not None for v in table.variables)]
    dropped = len(table.rows) - len(keep)
    if dropped:
        log.info("dropped %d of %d rows with missing cells", dropped, len(table.rows))
    cards, cols, bounds = [], [], {}
    for v in table.variables:
        x = np.array([table.rows[i][v] for i in keep], dtype=float)
        cuts = bin_boundaries(x, bins) if x.size else []
        if len(cuts) + 1 < bins:
            log.warning("%s: only %d categories instead of %d", v, len(cuts) + 1, bins)
        bounds[v] = cuts
        cards.append(len(cuts) + 1)
        cols.append(np.searchsorted(np.array(cuts), x, side="right"))
    values = np.column_stack(cols).astype(np.int64) if cols else np.zeros((len(keep), 0), dtype=np.int64)
    return DiscreteTable(table.variables, tuple(cards), values.reshape(len(keep), len(table.variables)),
                         bounds, tuple(table.case_ids[i] for i in keep), dropped)
