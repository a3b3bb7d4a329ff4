"""Maximal ancestral graphs: latent projection, m-separation, true blankets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Iterable, Mapping

from .bayesnet import BayesNet, _ancestors, d_separated
from .blanket import ARROW, BIDIRECTED, DIRECTED, TAIL, MarkovBlanket

BRUTE_FORCE_LIMIT = 12


class CapabilityError(RuntimeError):
    """An operation was asked to go beyond its documented size limit."""


@dataclass
class Mag:
    """Mixed graph over ``nodes``.

    ``marks[(a, b)]`` (with ``a < b``) is the pair (mark at a, mark at b),
    each ``"arrow"`` or ``"tail"``. ``a -> b`` is (tail, arrow), ``a <-> b``
    is (arrow, arrow).
    """

    nodes: tuple[str, ...]
    marks: dict[tuple[str, str], tuple[str, str]] = field(default_factory=dict)

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a < b else (b, a)

    def add_directed(self, a: str, b: str) -> None:
        self.marks[self._key(a, b)] = (TAIL, ARROW) if a < b else (ARROW, TAIL)

    def add_bidirected(self, a: str, b: str) -> None:
        self.marks[self._key(a, b)] = (ARROW, ARROW)

    def mark_at(self, node: str, other: str) -> str | None:
        """The mark at ``node`` on the edge between ``node`` and ``other``."""
        m = self.marks.get(self._key(node, other))
        if m is None:
            return None
        return m[0] if node < other else m[1]

    def adjacent(self, a: str, b: str) -> bool:
        return self._key(a, b) in self.marks

    def neighbors(self, x: str) -> set[str]:
        return {b if a == x else a for a, b in self.marks if x in (a, b)}

    def is_directed(self, a: str, b: str) -> bool:
        return self.mark_at(a, b) == TAIL and self.mark_at(b, a) == ARROW

    def is_bidirected(self, a: str, b: str) -> bool:
        return self.mark_at(a, b) == ARROW and self.mark_at(b, a) == ARROW

    def parents(self, x: str) -> set[str]:
        return {v for v in self.neighbors(x) if self.is_directed(v, x)}

    def children(self, x: str) -> set[str]:
        return {v for v in self.neighbors(x) if self.is_directed(x, v)}

    def spouses(self, x: str) -> set[str]:
        """Nodes joined to ``x`` by a bidirected edge."""
        return {v for v in self.neighbors(x) if self.is_bidirected(x, v)}

    def parent_map(self) -> dict[str, set[str]]:
        return {x: self.parents(x) for x in self.nodes}

    def ancestors(self, xs: Iterable[str]) -> set[str]:
        return _ancestors(self.parent_map(), xs)

    def edge_list(self) -> list[tuple[str, str, str]]:
        out = []
        for (a, b) in sorted(self.marks):
            if self.is_directed(a, b):
                out.append((a, b, DIRECTED))
            elif self.is_directed(b, a):
                out.append((b, a, DIRECTED))
            else:
                out.append((a, b, BIDIRECTED))
        return out

    def check_ancestral(self) -> None:
        """Raise ``ValueError`` on a directed or almost-directed cycle."""
        pm = self.parent_map()
        for x in self.nodes:
            anc = _ancestors(pm, pm[x])
            if x in anc:
                raise ValueError(f"directed cycle through {x}")
            for s in self.spouses(x):
                if s in anc:
                    raise ValueError(f"almost directed cycle: {s} <-> {x} with {s} an ancestor of {x}")

    def is_maximal(self) -> bool:
        """Every non-adjacent pair is m-separated by some set (brute force)."""
        if len(self.nodes) > BRUTE_FORCE_LIMIT:
            raise CapabilityError(f"maximality check limited to {BRUTE_FORCE_LIMIT} nodes")
        for a, b in combinations(self.nodes, 2):
            if self.adjacent(a, b):
                continue
            rest = [v for v in self.nodes if v not in (a, b)]
            if not any(m_separated(self, a, b, z) for z in _subsets(rest)):
                return False
        return True

    def to_json(self) -> str:
        return json.dumps({"nodes": list(self.nodes),
                           "edges": [[a, b, self.mark_at(a, b), self.mark_at(b, a)] for a, b in sorted(self.marks)]},
                          indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Mag":
        obj = json.loads(text)
        g = cls(tuple(obj["nodes"]))
        for a, b, ma, mb in obj["edges"]:
            g.marks[cls._key(a, b)] = (ma, mb) if a < b else (mb, ma)
        return g


def _subsets(items):
    items = list(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def _parent_map(net: BayesNet | Mapping[str, Iterable[str]]) -> dict[str, set[str]]:
    parents = net.parents if isinstance(net, BayesNet) else net
    return {x: set(ps) for x, ps in parents.items()}


def separable_brute_force(parents: Mapping[str, Iterable[str]], a: str, b: str, observed: Iterable[str]) -> bool:
    """Whether some subset of ``observed`` minus {a, b} d-separates a and b."""
    rest = sorted(set(observed) - {a, b})
    if len(rest) > BRUTE_FORCE_LIMIT:
        raise CapabilityError(f"brute-force separation limited to {BRUTE_FORCE_LIMIT} candidate nodes")
    return any(d_separated(parents, a, b, z) for z in _subsets(rest))


def latent_project(net: BayesNet | Mapping[str, Iterable[str]], latents: Iterable[str],
                   method: str = "ancestral") -> Mag:
    """Project a DAG with hidden ``latents`` onto a MAG over the observed nodes.

    With ``method="ancestral"`` two observed nodes are adjacent iff they are
    d-connected given their observed ancestors; ``method="brute"`` tries every
    observed conditioning set instead and is limited to small graphs.
    """
    parents = _parent_map(net)
    latents = set(latents)
    if not latents <= set(parents):
        raise ValueError(f"unknown latent(s): {', '.join(sorted(latents - set(parents)))}")
    observed = tuple(x for x in parents if x not in latents)
    if not observed:
        raise ValueError("latents must be a strict subset of the nodes")
    if method == "brute" and len(observed) - 2 > BRUTE_FORCE_LIMIT:
        raise CapabilityError(f"brute-force projection limited to {BRUTE_FORCE_LIMIT + 2} observed nodes")
    anc = {x: _ancestors(parents, [x]) for x in parents}
    obs_set = set(observed)
    mag = Mag(observed)
    for a, b in combinations(observed, 2):
        if method == "brute":
            adjacent = not separable_brute_force(parents, a, b, observed)
        elif method == "ancestral":
            z = ((anc[a] | anc[b]) & obs_set) - {a, b}
            adjacent = not d_separated(parents, a, b, z)
        else:
            raise ValueError(f"unknown projection method {method!r}")
        if not adjacent:
            continue
        if a in anc[b]:
            mag.add_directed(a, b)
        elif b in anc[a]:
            mag.add_directed(b, a)
        else:
            mag.add_bidirected(a, b)
    mag.check_ancestral()
    return mag


def m_separated(mag: Mag, x: str, y: str, z: Iterable[str]) -> bool:
    """Whether ``x`` and ``y`` are m-separated by ``z``.

    A path is open when every non-collider lies outside ``z`` and every
    collider is an ancestor of some member of ``z``. Reachability is run over
    (node, arrived-with-arrowhead) states.
    """
    z = set(z)
    if x == y or x in z or y in z:
        raise ValueError("x and y must differ and lie outside the conditioning set")
    anc_z = mag.ancestors(z)
    nbrs = {v: mag.neighbors(v) for v in mag.nodes}
    stack = [(w, mag.mark_at(w, x) == ARROW) for w in nbrs[x]]
    visited = set()
    while stack:
        v, into = stack.pop()
        if (v, into) in visited:
            continue
        visited.add((v, into))
        if v == y:
            return False
        for w in nbrs[v]:
            collider = into and mag.mark_at(v, w) == ARROW
            if collider and v not in anc_z:
                continue
            if not collider and v in z:
                continue
            stack.append((w, mag.mark_at(w, v) == ARROW))
    return True


def district(mag: Mag, x: str) -> set[str]:
    """Nodes reachable from ``x`` through bidirected edges only (``x`` excluded)."""
    seen = {x}
    stack = [x]
    while stack:
        v = stack.pop()
        for s in mag.spouses(v):
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen - {x}


def true_mag_mb(mag: Mag, t: str) -> MarkovBlanket:
    """Markov blanket of ``t`` read off the graph structure."""
    if t not in mag.nodes:
        raise ValueError(f"{t} is not a node of the graph")
    mb = MarkovBlanket(t)
    mb.pa = mag.parents(t)
    mb.ch = mag.children(t)
    for c in mb.ch:
        mb.sp |= mag.parents(c) - {t}
    mb.dis = district(mag, t)
    for v in mb.dis:
        mb.pa_dis |= mag.parents(v)
    for c in mb.ch:
        mb.dis_ch |= district(mag, c)
    for v in mb.dis_ch:
        mb.pa_dis_ch |= mag.parents(v)
    for p in mb.pa:
        mb.edges.append((p, t, DIRECTED))
    for c in mb.ch:
        mb.edges.append((t, c, DIRECTED))
    for v in mb.dis:
        mb.edges.extend((min(v, s), max(v, s), BIDIRECTED) for s in mag.spouses(v) if s in mb.dis | {t})
    for c in mb.ch:
        for v in district(mag, c):
            mb.edges.extend((min(v, s), max(v, s), BIDIRECTED) for s in mag.spouses(v) if s in mb.dis_ch | {c})
    return mb.canonicalize()
