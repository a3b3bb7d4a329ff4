"""Slow, independent reference implementations used only by the tests.

Nothing here imports the package's own algorithms; each function works
from first principles (explicit path enumeration, counting loops).
"""

from __future__ import annotations

import math
from collections import Counter
from itertools import chain, combinations, permutations, product


def subsets(items):
    items = list(items)
    return chain.from_iterable(combinations(items, k) for k in range(len(items) + 1))


def _skeleton(parents):
    nb = {v: set() for v in parents}
    for v, ps in parents.items():
        for p in ps:
            nb[v].add(p)
            nb[p].add(v)
    return nb


def _simple_paths(nb, x, y):
    stack = [[x]]
    while stack:
        path = stack.pop()
        for w in nb[path[-1]]:
            if w in path:
                continue
            if w == y:
                yield path + [w]
            else:
                stack.append(path + [w])


def _descendants(parents, v):
    children = {u: set() for u in parents}
    for u, ps in parents.items():
        for p in ps:
            children[p].add(u)
    out, stack = set(), [v]
    while stack:
        u = stack.pop()
        for c in children[u]:
            if c not in out:
                out.add(c)
                stack.append(c)
    return out


def d_separated_paths(parents, x, y, z):
    """d-separation by enumerating every simple path of the skeleton."""
    parents = {v: set(ps) for v, ps in parents.items()}
    z = set(z)
    for path in _simple_paths(_skeleton(parents), x, y):
        open_ = True
        for a, v, b in zip(path, path[1:], path[2:]):
            collider = a in parents[v] and b in parents[v]
            if collider:
                if v not in z and not (_descendants(parents, v) & z):
                    open_ = False
                    break
            elif v in z:
                open_ = False
                break
        if open_:
            return False
    return True


def m_separated_paths(marks, nodes, x, y, z):
    """m-separation over a mixed graph given as {(a, b): (mark at a, mark at b)}."""
    def mark(at, other):
        if (at, other) in marks:
            return marks[(at, other)][0]
        if (other, at) in marks:
            return marks[(other, at)][1]
        return None

    nb = {v: set() for v in nodes}
    for a, b in marks:
        nb[a].add(b)
        nb[b].add(a)
    parents = {v: {u for u in nb[v] if mark(u, v) == "tail" and mark(v, u) == "arrow"} for v in nodes}
    z = set(z)
    anc_z = set(z)
    stack = list(z)
    while stack:
        u = stack.pop()
        for p in parents[u]:
            if p not in anc_z:
                anc_z.add(p)
                stack.append(p)
    for path in _simple_paths(nb, x, y):
        open_ = True
        for a, v, b in zip(path, path[1:], path[2:]):
            collider = mark(v, a) == "arrow" and mark(v, b) == "arrow"
            if collider and v not in anc_z:
                open_ = False
                break
            if not collider and v in z:
                open_ = False
                break
        if open_:
            return False
    return True


def ancestors_of(parents, v):
    out, stack = set(), [v]
    while stack:
        u = stack.pop()
        for p in parents[u]:
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def project_brute(parents, latents):
    """MAG marks over observed nodes: subset-separation adjacency, ancestral orientation."""
    observed = [v for v in parents if v not in set(latents)]
    marks = {}
    for a, b in combinations(observed, 2):
        rest = [v for v in observed if v not in (a, b)]
        if any(d_separated_paths(parents, a, b, s) for s in subsets(rest)):
            continue
        if a in ancestors_of(parents, b):
            marks[(a, b)] = ("tail", "arrow")
        elif b in ancestors_of(parents, a):
            marks[(a, b)] = ("arrow", "tail")
        else:
            marks[(a, b)] = ("arrow", "arrow")
    return observed, marks


def bic_loops(rows, x, parents, cards):
    """Local BIC with explicit counting; rows are dicts name -> category."""
    m = len(rows)
    joint = Counter((tuple(r[p] for p in parents), r[x]) for r in rows)
    marg = Counter(tuple(r[p] for p in parents) for r in rows)
    ll = 0.0
    for (cfg, _), n in joint.items():
        ll += n * math.log2(n / marg[cfg])
    q = 1
    for p in parents:
        q *= cards[p]
    return ll - q * (cards[x] - 1) / 2 * math.log2(m)


def all_dags(nodes):
    """Every DAG over ``nodes`` as a parent mapping (fine up to four nodes)."""
    nodes = list(nodes)
    pairs = list(combinations(nodes, 2))
    for choice in product((None, 0, 1), repeat=len(pairs)):
        parents = {v: set() for v in nodes}
        for (a, b), c in zip(pairs, choice):
            if c == 0:
                parents[b].add(a)
            elif c == 1:
                parents[a].add(b)
        if any(all(ancestors_of(parents, v) <= set(order[:i]) for i, v in enumerate(order))
               for order in permutations(nodes)):
            yield parents


def rel(sig, a, b):
    """Relative importance straight from an edge dictionary."""
    out_a = sum(s for (u, _), s in sig.items() if u == a)
    in_b = sum(s for (_, w), s in sig.items() if w == b)
    return 0.5 * sig[(a, b)] / out_a + 0.5 * sig[(a, b)] / in_b
