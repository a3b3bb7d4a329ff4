"""District-set discovery and Markov blanket assembly under latent confounding."""

from __future__ import annotations

import logging
from typing import Callable, Mapping, Sequence

from .blanket import BIDIRECTED, DIRECTED, UNDIRECTED, MarkovBlanket
from .structlearn import ScoringContext, find_neighbors, find_spouses

log = logging.getLogger(__name__)


def find_dis(ctx: ScoringContext, t: str) -> set[str]:
    """Neighbours of ``t`` that share a bidirected edge with it.

    A neighbour n qualifies when n is a collider between t and one of t's
    spouses, and t in turn is a collider between n and one of t's other
    neighbours (n's spouse).
    """
    key = ("dis", t)
    hit = ctx.memo.get(key)
    if hit is not None:
        return set(hit)
    h_t, _, _ = find_neighbors(ctx, t)
    s_t = find_spouses(ctx, t, h_t)
    dis: set[str] = set()
    if len(h_t) >= 2:
        for n in sorted(h_t):
            h_n, _, _ = find_neighbors(ctx, n)
            if not any(m in s_t for m in h_n - {t}):
                continue
            s_n = find_spouses(ctx, n, h_n)
            if any(m1 in h_t - {n} for m1 in s_n):
                dis.add(n)
    ctx.memo[key] = frozenset(dis)
    return dis


def _district_closure(ctx: ScoringContext, q: str, edges: list) -> set[str]:
    """Grow ``find_dis(q)`` by the districts of its members until the set stops changing."""
    found = find_dis(ctx, q)
    for n in found:
        edges.append((min(q, n), max(q, n), BIDIRECTED))
    frontier = sorted(found)
    while frontier:
        n = frontier.pop(0)
        for k in sorted(find_dis(ctx, n)):
            edges.append((min(n, k), max(n, k), BIDIRECTED))
            if k != q and k not in found:
                found.add(k)
                frontier.append(k)
    found.discard(q)
    return found


def smmb(ctx: ScoringContext, t: str) -> MarkovBlanket:
    """Markov blanket of ``t`` including its district and the districts of its children."""
    if t not in ctx.variables:
        raise ValueError(f"{t} is not a variable of the data")
    mb = MarkovBlanket(t)
    if len(ctx.variables) < 2:
        return mb
    h_t, ch_t, pa_t = find_neighbors(ctx, t)
    mb.pa, mb.ch = set(pa_t), set(ch_t)
    mb.nb = h_t - pa_t - ch_t
    mb.edges += [(p, t, DIRECTED) for p in pa_t]
    mb.edges += [(t, c, DIRECTED) for c in ch_t]
    mb.edges += [(min(t, v), max(t, v), UNDIRECTED) for v in mb.nb]

    for q in sorted(ch_t) + [t]:
        s_q = find_spouses(ctx, q)
        if q == t:
            mb.sp |= set(s_q)
            mb.edges += [(v, c, DIRECTED) for v, c in s_q.items()]
        dis = _district_closure(ctx, q, mb.edges)
        dis.discard(t)
        pa_dis: set[str] = set()
        for m in sorted(dis):
            _, _, pa_m = find_neighbors(ctx, m)
            pa_dis |= pa_m
            mb.edges += [(p, m, DIRECTED) for p in pa_m if p != t]
        pa_dis -= {t}
        if q == t:
            mb.dis |= dis
            mb.pa_dis |= pa_dis
        else:
            mb.dis_ch |= dis
            mb.pa_dis_ch |= pa_dis
    # a bidirected finding overrides the orientation read from the local search
    bidir = {frozenset((a, b)) for a, b, k in mb.edges if k == BIDIRECTED}
    mb.edges = [e for e in mb.edges if e[2] == BIDIRECTED or frozenset(e[:2]) not in bidir]
    return mb.canonicalize()


def activity_source(variable: str, order: Sequence[str]) -> str | None:
    """Map an edge-pair indicator name ``A_B`` to its source activity ``A``.

    Activity names may themselves contain underscores, so the longest known
    activity prefix wins.
    """
    known = set(order)
    if variable in known:
        return variable
    best = None
    for i, ch in enumerate(variable):
        if ch == "_" and variable[:i] in known:
            best = variable[:i]
    return best


def orient_with_process_order(mb: MarkovBlanket, order: Sequence[str],
                              source: Callable[[str, Sequence[str]], str | None] = activity_source,
                              target_position: Mapping[str, int] | None = None) -> MarkovBlanket:
    """Direct unoriented blanket edges from the earlier process step to the later one.

    Directed edges that run against the process order are flagged, never
    flipped; bidirected edges are left alone. ``target_position`` may place
    variables that are not indicators (the delay target) in the order; by
    default they are unmappable and their edges are left untouched.
    """
    pos = {a: i for i, a in enumerate(order)}
    extra = dict(target_position or {})

    def rank(v):
        if v in extra:
            return extra[v]
        a = source(v, order)
        return pos.get(a) if a is not None else None

    out = MarkovBlanket.from_dict(mb.to_dict())
    edges = []
    flagged = list(out.flagged)
    for a, b, kind in out.edges:
        ra, rb = rank(a), rank(b)
        if ra is None or rb is None:
            if kind == UNDIRECTED:
                log.warning("cannot place %s or %s in the process order", a, b)
            edges.append((a, b, kind))
            continue
        if kind == UNDIRECTED and ra != rb:
            src, dst = (a, b) if ra < rb else (b, a)
            edges.append((src, dst, DIRECTED))
            _move_oriented(out, src, dst)
        else:
            if kind == DIRECTED and ra > rb and (a, b) not in flagged:
                flagged.append((a, b))
            edges.append((a, b, kind))
    out.edges = edges
    out.flagged = flagged
    return out.canonicalize()


def _move_oriented(mb: MarkovBlanket, src: str, dst: str) -> None:
    if dst == mb.target and src in mb.nb:
        mb.nb.discard(src)
        mb.pa.add(src)
    elif src == mb.target and dst in mb.nb:
        mb.nb.discard(dst)
        mb.ch.add(dst)
