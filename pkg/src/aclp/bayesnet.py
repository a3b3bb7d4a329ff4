"""Discrete Bayesian networks: BIF-subset parsing, sampling, d-separation.

Supported BIF subset::

    network NAME { }
    variable X { type discrete [ k ] { s1, s2, ... }; }
    probability ( X ) { table p1, p2, ...; }
    probability ( X | P1, P2 ) { (a, b) p1, p2, ...; ... }

Comments (``//`` to end of line) are ignored. Every parent configuration
must be listed exactly once in the conditional form.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

ROW_TOLERANCE = 1e-6

# Short names used for ALARM variables in the literature.
ALARM_ALIASES = {
    "VTUB": "VENTTUBE",
    "INT": "INTUBATION",
    "PMB": "PULMEMBOLUS",
    "SHNT": "SHUNT",
    "VLNG": "VENTLUNG",
    "PRSS": "PRESS",
    "PAP": "PAP",
    "KINK": "KINKEDTUBE",
    "DISC": "DISCONNECT",
    "VMCH": "VENTMACH",
    "MVS": "MINVOLSET",
    "VALV": "VENTALV",
    "ACO2": "ARTCO2",
    "MINV": "MINVOL",
    "ECO2": "EXPCO2",
}


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class BayesNet:
    """A discrete DAG with conditional probability tables.

    ``cpts[x]`` has shape ``(*parent cardinalities, card[x])``; parents are
    indexed in the order given by ``parents[x]``.
    """

    names: tuple[str, ...]
    states: Mapping[str, tuple[str, ...]]
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, np.ndarray]

    def __post_init__(self):
        for x in self.names:
            for p in self.parents[x]:
                if p not in self.states:
                    raise NetworkError(f"{x} has unknown parent {p}")
            shape = tuple(self.card(p) for p in self.parents[x]) + (self.card(x),)
            if self.cpts[x].shape != shape:
                raise NetworkError(f"CPT of {x} has shape {self.cpts[x].shape}, expected {shape}")
            if not np.allclose(self.cpts[x].sum(axis=-1), 1.0, atol=1e-9, rtol=0):
                raise NetworkError(f"CPT of {x} has a row not summing to 1")
        self.topological_order()

    def card(self, x: str) -> int:
        return len(self.states[x])

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(p, x) for x in self.names for p in self.parents[x]]

    def children(self, x: str) -> set[str]:
        return {c for c in self.names if x in self.parents[c]}

    def prob(self, x: str, config: Sequence[int]) -> np.ndarray:
        return self.cpts[x][tuple(config)]

    def topological_order(self) -> list[str]:
        order, done, visiting = [], set(), set()

        def visit(x):
            if x in done:
                return
            if x in visiting:
                raise NetworkError(f"directed cycle through {x}")
            visiting.add(x)
            for p in self.parents[x]:
                visit(p)
            visiting.discard(x)
            done.add(x)
            order.append(x)

        for x in self.names:
            visit(x)
        return order

    def ancestors(self, xs: Iterable[str]) -> set[str]:
        """Ancestors of ``xs``, including ``xs`` themselves."""
        return _ancestors(self.parents, xs)


def _ancestors(parents: Mapping[str, Iterable[str]], xs: Iterable[str]) -> set[str]:
    out = set()
    stack = list(xs)
    while stack:
        x = stack.pop()
        if x in out:
            continue
        out.add(x)
        stack.extend(parents[x])
    return out


_VAR_RE = re.compile(
    r"variable\s+([^\s{]+)\s*\{\s*type\s+discrete\s*\[\s*(\d+)\s*\]\s*\{([^}]*)\}\s*;\s*\}", re.S
)
_PROB_RE = re.compile(r"probability\s*\(\s*([^)|]+?)\s*(?:\|\s*([^)]*))?\)\s*\{([^}]*)\}", re.S)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _row(values: str, x: str, card: int, where: str) -> np.ndarray:
    try:
        row = np.array([float(v) for v in _split(values)])
    except ValueError:
        raise NetworkError(f"non-numeric probability in CPT of {x} ({where})") from None
    if len(row) != card:
        raise NetworkError(f"CPT of {x} ({where}) has {len(row)} entries, expected {card}")
    if np.any(row < 0) or abs(row.sum() - 1.0) > ROW_TOLERANCE:
        raise NetworkError(f"CPT row of {x} ({where}) sums to {row.sum():.6g}, not 1")
    return row / row.sum()


def parse_network(source: TextIO | str) -> BayesNet:
    text = source if isinstance(source, str) else source.read()
    text = re.sub(r"//[^\n]*", "", text)
    states: dict[str, tuple[str, ...]] = {}
    names = []
    for m in _VAR_RE.finditer(text):
        name, k, labels = m.group(1), int(m.group(2)), tuple(_split(m.group(3)))
        if len(labels) != k:
            raise NetworkError(f"variable {name} declares {k} states but lists {len(labels)}")
        if name in states:
            raise NetworkError(f"variable {name} declared twice")
        states[name] = labels
        names.append(name)
    if not names:
        raise NetworkError("no variables found")

    parents: dict[str, tuple[str, ...]] = {}
    cpts: dict[str, np.ndarray] = {}
    for m in _PROB_RE.finditer(text):
        x = m.group(1).strip()
        pa = tuple(_split(m.group(2) or ""))
        if x not in states:
            raise NetworkError(f"probability block for undeclared variable {x}")
        for p in pa:
            if p not in states:
                raise NetworkError(f"{x} has unknown parent {p}")
        body = m.group(3)
        card = len(states[x])
        shape = tuple(len(states[p]) for p in pa) + (card,)
        table = np.full(shape, np.nan)
        if not pa:
            tm = re.search(r"table\s+([^;]*);", body)
            if tm is None:
                raise NetworkError(f"root variable {x} needs a 'table' entry")
            table[:] = _row(tm.group(1), x, card, "table")
        else:
            for rm in re.finditer(r"\(([^)]*)\)\s*([^;]*);", body):
                labels = _split(rm.group(1))
                if len(labels) != len(pa):
                    raise NetworkError(f"CPT row of {x} names {len(labels)} parent states, expected {len(pa)}")
                try:
                    idx = tuple(states[p].index(lab) for p, lab in zip(pa, labels))
                except ValueError:
                    raise NetworkError(f"CPT row of {x} uses an unknown state in {labels}") from None
                table[idx] = _row(rm.group(2), x, card, ",".join(labels))
            if np.isnan(table).any():
                raise NetworkError(f"CPT of {x} does not cover every parent configuration")
        parents[x] = pa
        cpts[x] = table
    missing = [x for x in names if x not in cpts]
    if missing:
        raise NetworkError(f"no probability block for {', '.join(missing)}")
    return BayesNet(tuple(names), states, parents, cpts)


def load_alarm() -> BayesNet:
    """The bundled 37-node ALARM network."""
    text = resources.files("aclp").joinpath("data/alarm.bif").read_text(encoding="utf-8")
    return parse_network(text)


def resolve_alias(name: str) -> str:
    return ALARM_ALIASES.get(name, name)


@dataclass(frozen=True)
class DataSet:
    names: tuple[str, ...]
    cards: tuple[int, ...]
    values: np.ndarray  # (m, p) integer category indices

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.names):
            raise ValueError("data matrix does not match the variable list")
        if self.values.size and (self.values.min() < 0 or np.any(self.values.max(axis=0) >= np.array(self.cards))):
            raise ValueError("data value outside its variable's cardinality")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence[str]) -> "DataSet":
        idx = [self.index(n) for n in names]
        return DataSet(tuple(names), tuple(self.cards[i] for i in idx), self.values[:, idx])

    def to_csv(self, stream: TextIO) -> None:
        """Write a header of ``name:cardinality`` cells followed by integer rows."""
        w = csv.writer(stream, lineterminator="\n")
        w.writerow([f"{n}:{c}" for n, c in zip(self.names, self.cards)])
        w.writerows(self.values.tolist())

    @classmethod
    def from_csv(cls, source: TextIO | str) -> "DataSet":
        """Read integer category data; header cells without ``:card`` get max value + 1."""
        if isinstance(source, str):
            source = io.StringIO(source)
        rows = [r for r in csv.reader(source) if r]
        if not rows:
            raise ValueError("empty data set")
        names, declared = [], []
        for cell in rows[0]:
            name, _, card = cell.partition(":")
            names.append(name)
            declared.append(int(card) if card else None)
        values = np.array(rows[1:], dtype=np.int64).reshape(len(rows) - 1, len(names))
        observed = values.max(axis=0) + 1 if len(values) else np.ones(len(names), dtype=np.int64)
        cards = tuple(d if d is not None else int(o) for d, o in zip(declared, observed))
        return cls(tuple(names), cards, values)


def forward_sample(net: BayesNet, n: int, seed: int | np.random.Generator | None = None) -> DataSet:
    if n < 1:
        raise ValueError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    order = net.topological_order()
    col = {x: i for i, x in enumerate(net.names)}
    values = np.zeros((n, len(net.names)), dtype=np.int64)
    for x in order:
        pa = net.parents[x]
        probs = net.cpts[x][tuple(values[:, col[p]] for p in pa)] if pa else np.broadcast_to(net.cpts[x], (n, net.card(x)))
        cum = np.cumsum(probs, axis=1)
        u = rng.random(n)[:, None]
        values[:, col[x]] = np.minimum((u >= cum).sum(axis=1), net.card(x) - 1)
    return DataSet(net.names, tuple(net.card(x) for x in net.names), values)


def hide_latents(data: DataSet, latents: Iterable[str]) -> DataSet:
    latents = set(latents)
    unknown = latents - set(data.names)
    if unknown:
        raise ValueError(f"unknown variable(s): {', '.join(sorted(unknown))}")
    return data.select([x for x in data.names if x not in latents])


def d_separated(parents: Mapping[str, Iterable[str]] | BayesNet, x: str, y: str, z: Iterable[str]) -> bool:
    """Whether ``x`` and ``y`` are d-separated by ``z`` in a DAG.

    ``parents`` maps every node to its parents (a :class:`BayesNet` works too).
    Uses reachability over (node, direction) states.
    """
    if isinstance(parents, BayesNet):
        parents = parents.parents
    z = set(z)
    if x == y or x in z or y in z:
        raise ValueError("x and y must differ and lie outside the conditioning set")
    children: dict[str, set[str]] = {v: set() for v in parents}
    for v, ps in parents.items():
        for p in ps:
            children[p].add(v)
    anc_z = _ancestors(parents, z)
    # "up": arrived from a child (or start); "down": arrived from a parent
    visited = set()
    stack = [(x, "up")]
    while stack:
        v, d = stack.pop()
        if (v, d) in visited:
            continue
        visited.add((v, d))
        if v == y:
            return False
        if d == "up" and v not in z:
            stack.extend((p, "up") for p in parents[v])
            stack.extend((c, "down") for c in children[v])
        elif d == "down":
            if v not in z:
                stack.extend((c, "down") for c in children[v])
            if v in anc_z:
                stack.extend((p, "up") for p in parents[v])
    return True


def random_dag(n_nodes: int, n_edges: int, rng: np.random.Generator, prefix: str = "V") -> dict[str, tuple[str, ...]]:
    """Random DAG as a parent mapping; nodes are named in a random causal order."""
    names = [f"{prefix}{i}" for i in range(n_nodes)]
    pairs = [(i, j) for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    n_edges = min(n_edges, len(pairs))
    chosen = rng.choice(len(pairs), size=n_edges, replace=False) if n_edges else []
    perm = rng.permutation(n_nodes)
    parents: dict[str, list[str]] = {x: [] for x in names}
    for k in sorted(chosen):
        i, j = pairs[k]
        parents[names[perm[j]]].append(names[perm[i]])
    return {x: tuple(sorted(ps)) for x, ps in parents.items()}


def random_net(parents: Mapping[str, Sequence[str]], rng: np.random.Generator, card: int = 2,
               concentration: float = 0.5) -> BayesNet:
    """Attach Dirichlet-random CPTs to a DAG structure."""
    names = tuple(parents)
    states = {x: tuple(f"s{k}" for k in range(card)) for x in names}
    cpts = {}
    for x in names:
        shape = (card,) * len(parents[x])
        cpts[x] = rng.dirichlet([concentration] * card, size=shape).reshape(shape + (card,))
    return BayesNet(names, states, {x: tuple(p) for x, p in parents.items()}, cpts)
