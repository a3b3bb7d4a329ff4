"""BIC scoring, local greedy equivalence search and score-based neighbour/spouse search."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from itertools import chain, combinations
from typing import Iterable, Sequence

import numpy as np

from .bayesnet import DataSet
from .mag import CapabilityError

log = logging.getLogger(__name__)

TIE_TOL = 1e-9
DEFAULT_CAP = 12
# How the working set around a target changes after each local search:
#   grow      - add the candidate when it ends up adjacent to the target
#   neighbors - reset to the target plus its learned neighbours
#   blanket   - reset to the target plus its learned neighbours and co-parents
UPDATE_RULES = ("grow", "neighbors", "blanket")
EXACT_CAP = 10


class ScoringContext:
    """Data plus memo tables shared by every search on that data.

    Local scores are cached by (variable, parent set); neighbour, spouse and
    district results are cached by target. Cache insertion is guarded by a
    lock so one context may serve several threads.
    """

    def __init__(self, data: DataSet, cap: int = DEFAULT_CAP, max_passes: int = 3, update: str = "blanket"):
        if update not in UPDATE_RULES:
            raise ValueError(f"unknown working-set update rule {update!r}")
        self.data = data
        self.update = update
        self.m = data.m
        self.cards = dict(zip(data.names, data.cards))
        self.cap = cap
        self.max_passes = max_passes
        self._cols = {n: np.ascontiguousarray(data.values[:, i]) for i, n in enumerate(data.names)}
        self.cache: dict[tuple[str, frozenset], float] = {}
        self.memo: dict[tuple, object] = {}
        self._lock = threading.Lock()
        self._log2m = math.log2(self.m) if self.m > 0 else 0.0

    @property
    def variables(self) -> tuple[str, ...]:
        return self.data.names

    def local_bic(self, x: str, parents: Iterable[str]) -> float:
        key = (x, frozenset(parents))
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        if x in key[1]:
            raise ValueError(f"{x} cannot be its own parent")
        value = self._compute_bic(x, sorted(key[1]))
        with self._lock:
            self.cache[key] = value
        return value

    def _compute_bic(self, x: str, parents: Sequence[str]) -> float:
        r = self.cards[x]
        q = 1
        cfg = np.zeros(self.m, dtype=np.int64)
        for p in parents:
            cfg = cfg * self.cards[p] + self._cols[p]
            q *= self.cards[p]
        counts = np.bincount(cfg * r + self._cols[x], minlength=q * r).reshape(q, r)
        row = counts.sum(axis=1, keepdims=True)
        nz = counts > 0
        ll = float(np.sum(counts[nz] * np.log2((counts / np.where(row == 0, 1, row))[nz])))
        return ll - q * (r - 1) / 2.0 * self._log2m

    def score_dag(self, parents: dict[str, Iterable[str]]) -> float:
        return sum(self.local_bic(x, ps) for x, ps in parents.items())


def local_bic(ctx: ScoringContext, x: str, parents: Iterable[str]) -> float:
    return ctx.local_bic(x, parents)


class Pdag:
    """Partially directed graph: directed edges plus undirected ones."""

    def __init__(self, nodes: Iterable[str]):
        self.nodes = tuple(sorted(nodes))
        self.pa: dict[str, set[str]] = {v: set() for v in self.nodes}
        self.ch: dict[str, set[str]] = {v: set() for v in self.nodes}
        self.ne: dict[str, set[str]] = {v: set() for v in self.nodes}

    def copy(self) -> "Pdag":
        g = Pdag(self.nodes)
        for v in self.nodes:
            g.pa[v] = set(self.pa[v])
            g.ch[v] = set(self.ch[v])
            g.ne[v] = set(self.ne[v])
        return g

    def adj(self, v: str) -> set[str]:
        return self.pa[v] | self.ch[v] | self.ne[v]

    def adjacent(self, a: str, b: str) -> bool:
        return b in self.adj(a)

    def is_directed(self, a: str, b: str) -> bool:
        return b in self.ch[a]

    def is_undirected(self, a: str, b: str) -> bool:
        return b in self.ne[a]

    def add_directed(self, a, b):
        self.ch[a].add(b)
        self.pa[b].add(a)

    def add_undirected(self, a, b):
        self.ne[a].add(b)
        self.ne[b].add(a)

    def remove(self, a, b):
        for x, y in ((a, b), (b, a)):
            self.ch[x].discard(y)
            self.pa[x].discard(y)
            self.ne[x].discard(y)

    def orient(self, a, b):
        self.remove(a, b)
        self.add_directed(a, b)

    def edges(self) -> list[tuple[str, str, str]]:
        out = []
        for a in self.nodes:
            for b in sorted(self.ch[a]):
                out.append((a, b, "directed"))
            for b in sorted(self.ne[a]):
                if a < b:
                    out.append((a, b, "undirected"))
        return out

    def __eq__(self, other):
        return isinstance(other, Pdag) and self.nodes == other.nodes and self.edges() == other.edges()

    def __repr__(self):
        return f"Pdag({self.edges()})"


def _is_clique(g: Pdag, nodes: Iterable[str]) -> bool:
    nodes = list(nodes)
    return all(g.adjacent(a, b) for a, b in combinations(nodes, 2))


def _semi_directed_blocked(g: Pdag, start: str, goal: str, blockers: set[str]) -> bool:
    """True when every semi-directed path start ~> goal meets ``blockers``."""
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in g.ch[v] | g.ne[v]:
            if w == goal:
                return False
            if w in seen or w in blockers:
                continue
            seen.add(w)
            stack.append(w)
    return True


def consistent_extension(g: Pdag) -> dict[str, set[str]] | None:
    """A DAG (as parent sets) extending ``g``, or None when none exists."""
    work = g.copy()
    parents = {v: set(g.pa[v]) for v in g.nodes}
    remaining = set(g.nodes)
    while remaining:
        for x in sorted(remaining):
            if work.ch[x]:
                continue
            adj_x = work.adj(x)
            if all(adj_x - {y} <= work.adj(y) for y in work.ne[x]):
                for y in list(work.ne[x]):
                    parents[x].add(y)
                for y in list(work.adj(x)):
                    work.remove(x, y)
                remaining.discard(x)
                break
        else:
            return None
    return parents


def dag_to_cpdag(nodes: Iterable[str], parents: dict[str, set[str]]) -> Pdag:
    g = Pdag(nodes)
    for b, ps in parents.items():
        for a in ps:
            g.add_undirected(a, b)
    for b in g.nodes:
        ps = sorted(parents[b])
        for a, c in combinations(ps, 2):
            if not g.adjacent(a, c):
                g.orient(a, b)
                g.orient(c, b)
    apply_meek(g)
    return g


def apply_meek(g: Pdag) -> None:
    """Orient undirected edges with Meek's rules 1-3 until nothing changes."""
    changed = True
    while changed:
        changed = False
        for a in g.nodes:
            for b in sorted(g.ne[a]):
                if b not in g.ne[a]:
                    continue
                # R1: c -> a - b, c not adjacent b
                if any(not g.adjacent(c, b) for c in g.pa[a]):
                    g.orient(a, b)
                    changed = True
                    continue
                # R2: a -> c -> b
                if g.ch[a] & g.pa[b]:
                    g.orient(a, b)
                    changed = True
                    continue
                # R3: a - c -> b, a - d -> b, c and d non-adjacent
                cs = sorted(g.ne[a] & g.pa[b])
                if any(not g.adjacent(c, d) for c, d in combinations(cs, 2)):
                    g.orient(a, b)
                    changed = True


def _powerset(items):
    items = sorted(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def _best(ops):
    """Pick the op with the largest delta; near-ties go to the smallest key."""
    best = None
    for delta, key, payload in ops:
        if best is None or delta > best[0] + TIE_TOL or (abs(delta - best[0]) <= TIE_TOL and key < best[1]):
            best = (delta, key, payload)
    return best


def _forward_ops(ctx: ScoringContext, g: Pdag):
    for x in g.nodes:
        for y in g.nodes:
            if x == y or g.adjacent(x, y):
                continue
            na = g.ne[y] & g.adj(x)
            t0 = g.ne[y] - g.adj(x) - {x}
            for t in _powerset(t0):
                nat = na | set(t)
                if not _is_clique(g, nat):
                    continue
                if not _semi_directed_blocked(g, y, x, nat):
                    continue
                base = nat | g.pa[y]
                delta = ctx.local_bic(y, base | {x}) - ctx.local_bic(y, base)
                yield delta, (x, y, t), (x, y, set(t))


def _backward_ops(ctx: ScoringContext, g: Pdag):
    for x in g.nodes:
        for y in g.nodes:
            if not (g.is_directed(x, y) or (g.is_undirected(x, y))):
                continue
            na = g.ne[y] & g.adj(x)
            for h in _powerset(na):
                rest = na - set(h)
                if not _is_clique(g, rest):
                    continue
                base = (rest | g.pa[y]) - {x}
                delta = ctx.local_bic(y, base) - ctx.local_bic(y, base | {x})
                yield delta, (x, y, h), (x, y, set(h))


def _apply_insert(g: Pdag, x, y, t) -> Pdag:
    h = g.copy()
    h.add_directed(x, y)
    for v in t:
        h.orient(v, y)
    return _recomplete(h)


def _apply_delete(g: Pdag, x, y, hs) -> Pdag:
    h = g.copy()
    h.remove(x, y)
    for v in hs:
        h.orient(y, v)
        if h.is_undirected(x, v):
            h.orient(x, v)
    return _recomplete(h)


def _recomplete(h: Pdag) -> Pdag:
    dag = consistent_extension(h)
    if dag is None:
        raise RuntimeError("operator produced a graph without a consistent extension")
    return dag_to_cpdag(h.nodes, dag)


def ges(ctx: ScoringContext, variables: Iterable[str]) -> Pdag:
    """Two-phase greedy equivalence search maximizing the decomposable BIC."""
    g = Pdag(variables)
    while True:
        best = _best(_forward_ops(ctx, g))
        if best is None or best[0] <= TIE_TOL:
            break
        x, y, t = best[2]
        g = _apply_insert(g, x, y, t)
    while True:
        best = _best(_backward_ops(ctx, g))
        if best is None or best[0] <= TIE_TOL:
            break
        x, y, hs = best[2]
        g = _apply_delete(g, x, y, hs)
    return g


def exact_dag(ctx: ScoringContext, variables: Iterable[str]) -> dict[str, set[str]]:
    """Highest-scoring DAG by dynamic programming over variable subsets.

    Exponential in the number of variables; intended as a reference for
    small sets.
    """
    vs = tuple(sorted(variables))
    n = len(vs)
    if n > EXACT_CAP:
        raise CapabilityError(f"exact search limited to {EXACT_CAP} variables")
    full = (1 << n) - 1
    # best parent set of v drawn from candidate mask
    best_ps: list[dict[int, tuple[float, int]]] = []
    for i, v in enumerate(vs):
        others = [j for j in range(n) if j != i]
        table: dict[int, tuple[float, int]] = {}
        for k in range(len(others) + 1):
            for combo in combinations(others, k):
                mask = sum(1 << j for j in combo)
                s = ctx.local_bic(v, [vs[j] for j in combo])
                cand = (s, mask)
                for j in combo:
                    sub = table[mask & ~(1 << j)]
                    if sub[0] > cand[0] + TIE_TOL:
                        cand = sub
                table[mask] = cand
        best_ps.append(table)
    sink_score = {0: (0.0, -1)}
    for mask in range(1, full + 1):
        best = None
        for i in range(n):
            if mask & (1 << i):
                rest = mask & ~(1 << i)
                s = sink_score[rest][0] + best_ps[i][rest][0]
                if best is None or s > best[0] + TIE_TOL:
                    best = (s, i)
        sink_score[mask] = best
    parents: dict[str, set[str]] = {}
    mask = full
    while mask:
        i = sink_score[mask][1]
        rest = mask & ~(1 << i)
        pm = best_ps[i][rest][1]
        parents[vs[i]] = {vs[j] for j in range(n) if pm & (1 << j)}
        mask = rest
    return parents


def learn_local_dag(ctx: ScoringContext, variables: Iterable[str], method: str = "ges") -> Pdag:
    """Equivalence class of the best-scoring structure over ``variables``."""
    variables = frozenset(variables)
    if len(variables) > ctx.cap:
        raise CapabilityError(f"local search over {len(variables)} variables exceeds the cap of {ctx.cap}")
    key = ("local", method, variables)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    if method == "ges":
        g = ges(ctx, variables)
    elif method == "exact":
        g = dag_to_cpdag(variables, exact_dag(ctx, variables))
    else:
        raise ValueError(f"unknown local search method {method!r}")
    ctx.memo[key] = g
    return g


@dataclass
class LocalStructure:
    target: str
    H_star: set[str] = field(default_factory=set)
    ch: set[str] = field(default_factory=set)
    pa: set[str] = field(default_factory=set)
    S_star: dict[str, str] = field(default_factory=dict)


def potential_neighbors(ctx: ScoringContext, t: str) -> frozenset[str]:
    """Candidate neighbours of ``t`` from repeated local searches on a working set."""
    key = ("potential", t)
    hit = ctx.memo.get(key)
    if hit is not None:
        return hit
    z = {t}
    for _ in range(ctx.max_passes):
        changed = False
        for v in sorted(ctx.variables):
            if v in z:
                continue
            if len(z) + 1 > ctx.cap:
                log.warning("neighbour set of %s hit the local search cap; %s skipped", t, v)
                continue
            g = learn_local_dag(ctx, z | {v})
            if ctx.update == "grow":
                new_z = z | {v} if g.adjacent(t, v) else z
            elif ctx.update == "neighbors":
                new_z = {t} | g.adj(t)
            else:
                new_z = {t} | g.adj(t)
                for c in g.ch[t] | g.ne[t]:
                    new_z |= g.pa[c] | g.ne[c]
            if new_z != z:
                z = new_z
                changed = True
        if not changed:
            break
    g = learn_local_dag(ctx, z)
    result = frozenset(g.adj(t))
    ctx.memo[key] = result
    return result


def find_neighbors(ctx: ScoringContext, t: str) -> tuple[set[str], set[str], set[str]]:
    """Neighbours of ``t`` after symmetry correction, with the oriented subsets.

    Returns ``(H_star, ch, pa)``.
    """
    key = ("neighbors", t)
    hit = ctx.memo.get(key)
    if hit is not None:
        h, c, p = hit
        return set(h), set(c), set(p)
    cand = potential_neighbors(ctx, t)
    h_star = {v for v in cand if t in potential_neighbors(ctx, v)}
    g = learn_local_dag(ctx, cand | {t})
    ch = {v for v in h_star if g.is_directed(t, v)}
    pa = {v for v in h_star if g.is_directed(v, t)}
    ctx.memo[key] = (frozenset(h_star), frozenset(ch), frozenset(pa))
    return set(h_star), ch, pa


def _collider_witness(ctx: ScoringContext, q: str, c: str, v: str, h_q: Iterable[str]) -> bool:
    g = learn_local_dag(ctx, set(h_q) | {q, c, v})
    return g.is_directed(q, c) and g.is_directed(v, c) and not g.adjacent(q, v)


def find_spouses(ctx: ScoringContext, q: str, h_q: Iterable[str] | None = None) -> dict[str, str]:
    """Spouses of ``q`` mapped to a witness common child.

    ``v`` qualifies when a local search over q, a neighbour c, v and q's
    neighbours orients q -> c <- v; it is kept only if q qualifies as v's
    spouse by the same test run from v's side.
    """
    key = ("spouses", q)
    hit = ctx.memo.get(key)
    if hit is not None:
        return dict(hit)
    if h_q is None:
        h_q = find_neighbors(ctx, q)[0]
    h_q = set(h_q)
    spouses: dict[str, str] = {}
    for v in sorted(set(ctx.variables) - h_q - {q}):
        h_v = find_neighbors(ctx, v)[0]
        common = sorted(h_q & h_v)
        witness = next((c for c in common if _collider_witness(ctx, q, c, v, h_q)), None)
        if witness is None:
            continue
        if any(_collider_witness(ctx, v, c, q, h_v) for c in common):
            spouses[v] = witness
    ctx.memo[key] = dict(spouses)
    return spouses


def local_structure(ctx: ScoringContext, t: str) -> LocalStructure:
    h, ch, pa = find_neighbors(ctx, t)
    return LocalStructure(t, h, ch, pa, find_spouses(ctx, t, h))
