"""Directly-follows process model with conflict resolution and edge filtering.

The pipeline is ``build_initial_model`` -> ``resolve_binary`` -> ``resolve_nary``
-> ``resolve_unary`` -> ``filter_edges``; :func:`mine` runs all of it.
Models are treated as immutable values: every stage returns a new model.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field, asdict
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .eventlog import EventLog, EmptyLogError, directly_follows_counts

Edge = tuple[str, str]


class ProcessCycleError(ValueError):
    """Raised when a model that should be acyclic still has a cycle."""

    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("residual cycle: " + " -> ".join(self.cycle + self.cycle[:1]))


@dataclass(frozen=True)
class ProcessModel:
    nodes: frozenset[str]
    edges: Mapping[Edge, float]
    virtual_nodes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for (a, b), s in self.edges.items():
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge {a}->{b} has an endpoint outside the node set")
            if s < 0:
                raise ValueError(f"edge {a}->{b} has negative significance")

    def sig(self, a: str, b: str) -> float:
        return self.edges.get((a, b), 0.0)

    def out_total(self, a: str) -> float:
        return sum(s for (x, _), s in self.edges.items() if x == a)

    def in_total(self, b: str) -> float:
        return sum(s for (_, y), s in self.edges.items() if y == b)

    def without(self, removed: Iterable[Edge]) -> "ProcessModel":
        removed = set(removed)
        return ProcessModel(
            self.nodes, {e: s for e, s in self.edges.items() if e not in removed}, dict(self.virtual_nodes)
        )

    @property
    def activities(self) -> frozenset[str]:
        return self.nodes - set(self.virtual_nodes)

    def to_json(self) -> dict:
        return {
            "nodes": sorted(self.nodes),
            "edges": [[a, b, s] for (a, b), s in sorted(self.edges.items())],
            "virtual_nodes": dict(sorted(self.virtual_nodes.items())),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ProcessModel":
        return cls(
            frozenset(obj["nodes"]),
            {(a, b): float(s) for a, b, s in obj["edges"]},
            dict(obj.get("virtual_nodes", {})),
        )


@dataclass(frozen=True)
class MiningConfig:
    preserve_threshold: float = 0.27
    ratio_threshold: float = 0.35
    edge_cutoff: float = 0.2
    nary_similarity_eps: float = 0.05
    max_cycle_len: int = 8

    def __post_init__(self):
        for name in ("preserve_threshold", "ratio_threshold", "edge_cutoff"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.nary_similarity_eps <= 0:
            raise ValueError("nary_similarity_eps must be positive")
        if self.max_cycle_len < 3:
            raise ValueError("max_cycle_len must be at least 3")


@dataclass
class ConflictReport:
    binary_kept_loops: list[Edge] = field(default_factory=list)
    binary_exceptions_removed: list[Edge] = field(default_factory=list)
    binary_concurrency_removed: list[Edge] = field(default_factory=list)
    nary_cycles: list[dict] = field(default_factory=list)
    nary_unresolved: list[list[str]] = field(default_factory=list)
    unary_resolved: list[str] = field(default_factory=list)

    def merge(self, other: "ConflictReport") -> "ConflictReport":
        for k, v in asdict(other).items():
            getattr(self, k).extend(v)
        return self

    def removed_edges(self) -> set[Edge]:
        removed = set(self.binary_exceptions_removed) | set(self.binary_concurrency_removed)
        for rec in self.nary_cycles:
            removed.update(tuple(e) for e in rec["removed"])
        return removed

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def build_initial_model(log: EventLog) -> ProcessModel:
    if len(log) == 0:
        raise EmptyLogError("cannot mine an empty log")
    counts = directly_follows_counts(log)
    return ProcessModel(log.activity_universe, {e: float(c) for e, c in counts.items() if c > 0})


def relative_importance(model: ProcessModel, a: str, b: str) -> float:
    """Importance of edge a->b relative to a's outgoing and b's incoming edges."""
    s = model.sig(a, b)
    if s <= 0:
        raise ValueError(f"{a}->{b} is not an edge of the model")
    return 0.5 * s / model.out_total(a) + 0.5 * s / model.in_total(b)


def resolve_binary(model: ProcessModel, config: MiningConfig) -> tuple[ProcessModel, ConflictReport]:
    report = ConflictReport()
    removed: set[Edge] = set()
    pairs = sorted({tuple(sorted(e)) for e in model.edges if e[0] != e[1] and (e[1], e[0]) in model.edges})
    # every rel is taken on the unresolved model so the outcome is independent of pair order
    for a, b in pairs:
        rel_ab = relative_importance(model, a, b)
        rel_ba = relative_importance(model, b, a)
        if rel_ab >= config.preserve_threshold and rel_ba >= config.preserve_threshold:
            report.binary_kept_loops.append((a, b))
        elif abs(rel_ab - rel_ba) > config.ratio_threshold:
            weaker = (b, a) if rel_ab > rel_ba else (a, b)
            removed.add(weaker)
            report.binary_exceptions_removed.append(weaker)
        else:
            removed.update({(a, b), (b, a)})
            report.binary_concurrency_removed.extend([(a, b), (b, a)])
    return model.without(removed), report


def _rotate(cycle: Sequence[str], i: int) -> list[str]:
    return list(cycle[i:]) + list(cycle[:i])


def chain_edges(cycle: Sequence[str], i: int) -> list[Edge]:
    """The N-1 edges of the chain that starts at ``cycle[i]`` and stops before closing."""
    rot = _rotate(cycle, i)
    return list(zip(rot, rot[1:]))


def nary_relative_importance(model: ProcessModel, cycle: Sequence[str], i: int) -> float:
    """Relative importance of the chain through ``cycle`` starting at index ``i`` (0-based).

    Each of the chain's N-1 edges contributes both of its single-edge
    importance ratios with weight 1/(2(N-1)), so the value is the mean
    single-edge importance along the chain.
    """
    n = len(cycle)
    if n < 3:
        raise ValueError("an N-ary chain needs at least three activities")
    edges = chain_edges(cycle, i)
    for a, b in list(zip(cycle, list(cycle[1:]) + [cycle[0]])):
        if model.sig(a, b) <= 0:
            raise ValueError(f"cycle edge {a}->{b} is missing from the model")
    return sum(relative_importance(model, a, b) for a, b in edges) / (n - 1)


def _simple_cycles(model: ProcessModel, max_len: int) -> list[list[str]]:
    g = nx.DiGraph()
    g.add_nodes_from(model.nodes)
    g.add_edges_from(e for e in model.edges if e[0] != e[1])
    cycles = []
    for c in nx.simple_cycles(g, length_bound=max_len):
        if len(c) < 3:
            continue
        k = c.index(min(c))
        cycles.append(c[k:] + c[:k])
    return sorted(cycles, key=lambda c: (len(c), c))


def resolve_cycle(model: ProcessModel, cycle: Sequence[str], config: MiningConfig) -> tuple[str, list[Edge], list[float]]:
    """Decide one N-ary conflict. Returns (action, edges to delete, chain importances)."""
    n = len(cycle)
    rels = [nary_relative_importance(model, cycle, i) for i in range(n)]
    top = max(rels)
    offsets = [abs(top - r) for r in rels]
    if max(offsets) > config.nary_similarity_eps:
        weakest = max(range(n), key=lambda m: (offsets[m], -m))
        victim = min(chain_edges(cycle, weakest), key=lambda e: (relative_importance(model, *e), e))
        return "exception", [victim], rels
    # concurrency: the two strongest chains are the recorded orderings; each leaves
    # out one cycle edge, and those two differing edges are the conflicting ones
    order = sorted(range(n), key=lambda m: (-rels[m], m))
    closing = []
    for m in order[:2]:
        prev = cycle[m - 1]
        closing.append((prev, cycle[m]))
    return "concurrency", sorted(set(closing)), rels


def resolve_nary(model: ProcessModel, config: MiningConfig) -> tuple[ProcessModel, ConflictReport]:
    report = ConflictReport()
    current = model
    while True:
        cycles = _simple_cycles(current, config.max_cycle_len)
        if not cycles:
            break
        cycle = cycles[0]
        action, removed, rels = resolve_cycle(current, cycle, config)
        report.nary_cycles.append({"cycle": list(cycle), "action": action,
                                   "removed": [list(e) for e in removed], "chain_rel": rels})
        current = current.without(removed)
    g = nx.DiGraph(e for e in current.edges if e[0] != e[1])
    for c in nx.simple_cycles(g):
        if len(c) > config.max_cycle_len:
            report.nary_unresolved.append(c)
    return current, report


def _virtual_name(base: str, taken: set[str]) -> str:
    k = 1
    while f"{base}{k}" in taken:
        k += 1
    return f"{base}{k}"


def resolve_unary(model: ProcessModel) -> tuple[ProcessModel, ConflictReport]:
    report = ConflictReport()
    nodes = set(model.nodes)
    edges = {}
    virtual = dict(model.virtual_nodes)
    for (a, b), s in sorted(model.edges.items()):
        if a != b:
            edges[(a, b)] = s
            continue
        v = _virtual_name(a, nodes)
        nodes.add(v)
        virtual[v] = a
        edges[(a, v)] = s
        report.unary_resolved.append(a)
    return ProcessModel(frozenset(nodes), edges, virtual), report


def filter_edges(model: ProcessModel, config: MiningConfig) -> ProcessModel:
    """Drop edges whose significance is small relative to both endpoints' strongest edge."""
    cutoff = config.edge_cutoff
    best_out: dict[str, float] = {}
    best_in: dict[str, float] = {}
    for (a, b), s in model.edges.items():
        best_out[a] = max(best_out.get(a, 0.0), s)
        best_in[b] = max(best_in.get(b, 0.0), s)
    kept = {}
    for (a, b), s in model.edges.items():
        out_util = s / best_out[a] if best_out[a] > 0 else 1.0
        in_util = s / best_in[b] if best_in[b] > 0 else 1.0
        if out_util >= cutoff or in_util >= cutoff:
            kept[(a, b)] = s
    return ProcessModel(model.nodes, kept, dict(model.virtual_nodes))


def mine(log: EventLog, config: MiningConfig | None = None) -> tuple[ProcessModel, ConflictReport]:
    config = config or MiningConfig()
    model = build_initial_model(log)
    model, report = resolve_binary(model, config)
    model, r = resolve_nary(model, config)
    report.merge(r)
    model, r = resolve_unary(model)
    report.merge(r)
    return filter_edges(model, config), report


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fmt(s: float) -> str:
    return str(int(s)) if float(s).is_integer() else f"{s:.4g}"


def export_dot(model: ProcessModel) -> str:
    lines = ["digraph process {", "  rankdir=LR;"]
    for n in sorted(model.activities):
        lines.append(f"  {_dot_id(n)} [shape=box];")
    for (a, b), s in sorted(model.edges.items()):
        if b in model.virtual_nodes:
            owner = model.virtual_nodes[b]
            lines.append(f"  {_dot_id(owner)} -> {_dot_id(owner)} [label={_dot_id(_fmt(s))}, style=dashed];")
        else:
            lines.append(f"  {_dot_id(a)} -> {_dot_id(b)} [label={_dot_id(_fmt(s))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def topological_order(model: ProcessModel) -> list[str]:
    """Order activities consistently with the model's edges.

    Virtual nodes are skipped. A kept two-node loop is read in its more
    important direction. Ties go to the lexicographically smaller activity.
    """
    acts = model.activities
    succ: dict[str, set[str]] = {a: set() for a in acts}
    for (a, b) in model.edges:
        if a == b or a not in acts or b not in acts:
            continue
        if (b, a) in model.edges:
            r_ab, r_ba = relative_importance(model, a, b), relative_importance(model, b, a)
            if r_ab < r_ba or (r_ab == r_ba and a > b):
                continue
        succ[a].add(b)
    indeg = {a: 0 for a in acts}
    for a in acts:
        for b in succ[a]:
            indeg[b] += 1
    heap = [a for a in acts if indeg[a] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        a = heapq.heappop(heap)
        order.append(a)
        for b in succ[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                heapq.heappush(heap, b)
    if len(order) < len(acts):
        g = nx.DiGraph((a, b) for a in acts for b in succ[a])
        raise ProcessCycleError([u for u, _ in nx.find_cycle(g)])
    return order
