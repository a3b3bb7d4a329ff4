"""Partitioned Markov blanket of a target in a mixed graph."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

# Precedence used when a variable lands in more than one set.
PARTS = ("dis", "pa", "ch", "nb", "sp", "pa_dis", "dis_ch", "pa_dis_ch")

ARROW = "arrow"
TAIL = "tail"
DIRECTED = "directed"
BIDIRECTED = "bidirected"
UNDIRECTED = "undirected"


@dataclass
class MarkovBlanket:
    """Blanket sets of ``target``.

    ``nb`` holds neighbours whose edge to the target stayed unoriented.
    ``edges`` is a list of ``(a, b, kind)`` with kind one of ``directed``
    (a -> b), ``bidirected`` or ``undirected``.
    """

    target: str
    pa: set[str] = field(default_factory=set)
    ch: set[str] = field(default_factory=set)
    nb: set[str] = field(default_factory=set)
    sp: set[str] = field(default_factory=set)
    dis: set[str] = field(default_factory=set)
    pa_dis: set[str] = field(default_factory=set)
    dis_ch: set[str] = field(default_factory=set)
    pa_dis_ch: set[str] = field(default_factory=set)
    edges: list[tuple[str, str, str]] = field(default_factory=list)
    flagged: list[tuple[str, str]] = field(default_factory=list)

    def canonicalize(self) -> "MarkovBlanket":
        seen = {self.target}
        for part in PARTS:
            s = getattr(self, part)
            s -= seen
            seen |= s
        uniq = []
        for e in self.edges:
            if e not in uniq:
                uniq.append(e)
        self.edges = sorted(uniq)
        return self

    @property
    def members(self) -> set[str]:
        out: set[str] = set()
        for part in PARTS:
            out |= getattr(self, part)
        return out - {self.target}

    def bidirected_edges(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, k in self.edges if k == BIDIRECTED]

    def to_dict(self) -> dict:
        d = {"target": self.target}
        for part in PARTS:
            d[part] = sorted(getattr(self, part))
        d["edges"] = [list(e) for e in self.edges]
        d["flagged"] = [list(e) for e in self.flagged]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MarkovBlanket":
        mb = cls(d["target"], **{p: set(d.get(p, [])) for p in PARTS})
        mb.edges = [tuple(e) for e in d.get("edges", [])]
        mb.flagged = [tuple(e) for e in d.get("flagged", [])]
        return mb

    def to_dot(self) -> str:
        lines = ["digraph blanket {", f'  "{self.target}" [shape=doublecircle];']
        for n in sorted(self.members):
            lines.append(f'  "{n}";')
        for a, b, kind in self.edges:
            if kind == DIRECTED:
                lines.append(f'  "{a}" -> "{b}";')
            elif kind == BIDIRECTED:
                lines.append(f'  "{a}" -> "{b}" [dir=both];')
            else:
                lines.append(f'  "{a}" -> "{b}" [dir=none];')
        lines.append("}")
        return "\n".join(lines) + "\n"
