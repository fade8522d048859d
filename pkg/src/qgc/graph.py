"""Metric graphs with Dirichlet, Neumann and Neumann-Kirchhoff vertices."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from ._expr import parse_real

LD = np.longdouble


class GraphError(ValueError):
    """Raised for an inconsistent graph description."""


class BoundaryCondition(enum.Enum):
    """Vertex condition kind."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    NEUMANN_KIRCHHOFF = "neumann_kirchhoff"

    @classmethod
    def parse(cls, text: "str | BoundaryCondition") -> "BoundaryCondition":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {"d": cls.DIRICHLET, "n": cls.NEUMANN, "nk": cls.NEUMANN_KIRCHHOFF,
                   "kirchhoff": cls.NEUMANN_KIRCHHOFF}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise GraphError(f"unknown boundary condition {text!r}") from None


@dataclass(frozen=True)
class Edge:
    """Edge parametrized by ``x`` in ``[0, length]``.

    ``start`` is the vertex at ``x = 0``; ``end`` is the vertex at
    ``x = length`` and is ``None`` for a half-line.
    """

    id: str
    length: np.longdouble
    start: str
    end: str | None

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.length))

    @property
    def is_loop(self) -> bool:
        return self.end == self.start


@dataclass(frozen=True)
class MetricGraph:
    """Validated metric graph.

    Use :func:`build_graph` rather than the constructor; it checks the
    invariants (positive lengths, endpoint references, vertex conditions).
    """

    edges: tuple[Edge, ...]
    vertices: tuple[str, ...]
    boundary: Mapping[str, BoundaryCondition]

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.edges)

    def incident(self, vertex: str) -> list[tuple[str, int]]:
        """Edge ends at ``vertex`` as ``(edge_id, side)``; side 0 is ``x = 0``."""
        out = []
        for e in self.edges:
            if e.start == vertex:
                out.append((e.id, 0))
            if e.end == vertex:
                out.append((e.id, 1))
        return out

    def degree(self, vertex: str) -> int:
        return len(self.incident(vertex))

    @property
    def external_vertices(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.degree(v) == 1)

    @property
    def internal_vertices(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if self.degree(v) > 1)

    def describe(self) -> dict:
        """Plain-data description with lengths echoed at full precision."""
        return {
            "edges": [
                {"id": e.id, "length": _fmt_ld(e.length), "from": e.start, "to": e.end}
                for e in self.edges
            ],
            "boundary": {v: self.boundary[v].value for v in self.vertices},
        }


def _fmt_ld(value: np.longdouble) -> str:
    if not np.isfinite(value):
        return "inf"
    return np.format_float_positional(value, precision=20, unique=False, trim="-")


def build_graph(spec: Mapping) -> MetricGraph:
    """Build and validate a :class:`MetricGraph` from a plain mapping.

    Parameters
    ----------
    spec : mapping
        ``spec["edges"]`` maps edge ids to ``{"length": ..., "from": v,
        "to": w}`` (omit ``"to"`` for a half-line); lengths may be exact
        expressions such as ``"cbrt(2)"``. ``spec["vertices"]`` optionally
        lists vertex ids (``{"ids": [...]}`` or a list) and
        ``spec["boundary"]`` maps vertex ids to ``"dirichlet"``,
        ``"neumann"`` or ``"neumann_kirchhoff"``. Internal vertices default
        to Neumann-Kirchhoff.

    Returns
    -------
    MetricGraph
    """
    raw_edges = spec.get("edges")
    if not raw_edges:
        raise GraphError("graph has no edges")
    vertices: list[str] = []
    listed = spec.get("vertices")
    if isinstance(listed, Mapping):
        listed = listed.get("ids", list(listed))
    for v in listed or ():
        if v not in vertices:
            vertices.append(str(v))
    declared = set(vertices)

    edges = []
    for eid, e in raw_edges.items():
        if not isinstance(e, Mapping) or "length" not in e or "from" not in e:
            raise GraphError(f"edge {eid!r} needs 'length' and 'from'")
        length = parse_real(e["length"])
        if not length > 0:
            raise GraphError(f"edge {eid!r} has nonpositive length")
        start, end = str(e["from"]), e.get("to")
        end = None if end is None else str(end)
        if np.isfinite(length) and end is None:
            raise GraphError(f"finite edge {eid!r} needs a 'to' vertex")
        if not np.isfinite(length) and end is not None:
            raise GraphError(f"half-line {eid!r} cannot have a 'to' vertex")
        for v in (start, end):
            if v is None:
                continue
            if declared and v not in declared:
                raise GraphError(f"edge {eid!r} references unknown vertex {v!r}")
            if v not in vertices:
                vertices.append(v)
        edges.append(Edge(str(eid), length, start, end))

    bc_raw = dict(spec.get("boundary", {}))
    for v in bc_raw:
        if v not in vertices:
            raise GraphError(f"boundary condition for unknown vertex {v!r}")
    graph = MetricGraph(tuple(edges), tuple(vertices), MappingProxyType({}))
    boundary = {}
    for v in vertices:
        deg = graph.degree(v)
        if deg == 0:
            raise GraphError(f"vertex {v!r} is isolated")
        if v in bc_raw:
            bc = BoundaryCondition.parse(bc_raw[v])
        elif deg > 1:
            bc = BoundaryCondition.NEUMANN_KIRCHHOFF
        else:
            raise GraphError(f"external vertex {v!r} needs a Dirichlet or Neumann condition")
        if deg == 1 and bc is BoundaryCondition.NEUMANN_KIRCHHOFF:
            raise GraphError(f"Neumann-Kirchhoff condition on external vertex {v!r}")
        if deg > 1 and bc is not BoundaryCondition.NEUMANN_KIRCHHOFF:
            raise GraphError(f"internal vertex {v!r} must carry Neumann-Kirchhoff")
        boundary[v] = bc
    return MetricGraph(tuple(edges), tuple(vertices), MappingProxyType(boundary))


def tadpole_graph() -> MetricGraph:
    """Loop ``e1`` of length 1 at ``v`` with a half-line ``e2`` attached."""
    return build_graph({
        "edges": {"e1": {"length": 1, "from": "v", "to": "v"},
                  "e2": {"length": "inf", "from": "v"}},
        "boundary": {"v": "neumann_kirchhoff"},
    })


def star_graph(lengths) -> MetricGraph:
    """Star with two edges per entry of ``lengths``.

    Edge ``e{2l-1}`` and ``e{2l}`` have length ``lengths[l-1]``; each runs
    from a Dirichlet vertex ``o{j}`` at ``x = 0`` to the centre ``c``.
    """
    edges, boundary = {}, {"c": "neumann_kirchhoff"}
    j = 0
    for length in lengths:
        for _ in range(2):
            j += 1
            edges[f"e{j}"] = {"length": length, "from": f"o{j}", "to": "c"}
            boundary[f"o{j}"] = "dirichlet"
    return build_graph({"edges": edges, "boundary": boundary})


def chain_graph(n_edges: int, length, kind: str) -> MetricGraph:
    """Uniform chain of ``n_edges`` edges of equal ``length``.

    ``kind`` is ``"neumann"`` or ``"dirichlet"`` for an open chain with those
    end conditions, or ``"loop"`` for a closed chain.
    """
    if n_edges < 1:
        raise GraphError("a chain needs at least one edge")
    edges = {}
    for i in range(n_edges):
        end = f"v{i + 2}"
        if kind == "loop" and i == n_edges - 1:
            end = "v1"
        edges[f"e{i + 1}"] = {"length": length, "from": f"v{i + 1}", "to": end}
    boundary = {}
    if kind != "loop":
        boundary = {"v1": kind, f"v{n_edges + 1}": kind}
    return build_graph({"edges": edges, "boundary": boundary})
