"""Explicit eigenbases of the Laplacian on the in-scope graphs, and states.

Each eigenfunction is stored symbolically: a wavenumber and, per supporting
edge, a coefficient pair ``(a, b)`` with ``phi(x) = a cos(w x) + b sin(w x)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterator, Mapping, Sequence

import numpy as np

from ._expr import parse_real
from .graph import (BoundaryCondition, GraphError, MetricGraph, chain_graph,
                    star_graph, tadpole_graph)
from .quadrature import PI, compensated_gram, gauss_legendre, order_for

LD = np.longdouble
MERGE_RTOL = 1e-9
BOUNDARY_TOL = 1e-10


class ResonantLengthsError(ValueError):
    """Two eigenvalues from different families coincide within tolerance."""


@dataclass(frozen=True)
class EigenMode:
    """One eigenfunction of the graph Laplacian.

    Attributes
    ----------
    index : int
        Global 1-based index after sorting.
    wavenumber : longdouble
        ``sqrt(mu_k)``.
    coefficients : mapping
        Edge id to ``(a, b)``; edges not present carry zero.
    mode_number, length_class : int or None
        Provenance labels ``m(k)`` and ``l(k)`` where they apply.
    """

    index: int
    wavenumber: np.longdouble
    coefficients: Mapping[str, tuple[np.longdouble, np.longdouble]]
    mode_number: int | None = None
    length_class: int | None = None

    @property
    def eigenvalue(self) -> float:
        return float(self.wavenumber * self.wavenumber)

    @property
    def eigenvalue_ld(self) -> np.longdouble:
        return self.wavenumber * self.wavenumber

    @property
    def support(self) -> frozenset[str]:
        return frozenset(self.coefficients)

    def evaluate(self, edge_id: str, x) -> np.ndarray:
        """Values on edge ``edge_id`` at coordinates ``x`` (long double)."""
        x = np.asarray(x, dtype=LD)
        if edge_id not in self.coefficients:
            return np.zeros_like(x)
        a, b = self.coefficients[edge_id]
        wx = self.wavenumber * x
        return a * np.cos(wx) + b * np.sin(wx)

    def derivative(self, edge_id: str, x) -> np.ndarray:
        """First derivative in ``x`` on edge ``edge_id``."""
        x = np.asarray(x, dtype=LD)
        if edge_id not in self.coefficients:
            return np.zeros_like(x)
        a, b = self.coefficients[edge_id]
        w = self.wavenumber
        return w * (b * np.cos(w * x) - a * np.sin(w * x))

    def with_index(self, k: int) -> "EigenMode":
        return EigenMode(k, self.wavenumber, self.coefficients, self.mode_number, self.length_class)

    @property
    def effective_mode_number(self) -> int:
        """``m(k)`` when recorded, else the index."""
        return self.mode_number if self.mode_number is not None else self.index


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal modes sorted by eigenvalue, tied to a graph."""

    graph: MetricGraph
    modes: tuple[EigenMode, ...]
    family: str = "custom"
    params: Mapping = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        w = [m.wavenumber for m in self.modes]
        if any(b <= a for a, b in zip(w, w[1:])):
            raise ValueError("modes must have strictly increasing eigenvalues")
        for eid in self.support_edges:
            if not self.graph.edge(eid).finite:
                raise GraphError(f"mode supported on infinite edge {eid!r}")

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self) -> Iterator[EigenMode]:
        return iter(self.modes)

    def mode(self, k: int) -> EigenMode:
        """Mode with 1-based index ``k``."""
        if not 1 <= k <= len(self.modes):
            raise IndexError(f"mode index {k} outside 1..{len(self.modes)}")
        return self.modes[k - 1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m.eigenvalue for m in self.modes])

    @property
    def eigenvalues_ld(self) -> np.ndarray:
        return np.array([m.eigenvalue_ld for m in self.modes], dtype=LD)

    @property
    def support_edges(self) -> tuple[str, ...]:
        """Edges of the support union, in graph order."""
        used = set().union(*(m.support for m in self.modes)) if self.modes else set()
        return tuple(e for e in self.graph.edge_ids if e in used)

    @property
    def support_vertices(self) -> tuple[str, ...]:
        edges = [self.graph.edge(e) for e in self.support_edges]
        verts = {e.start for e in edges} | {e.end for e in edges}
        return tuple(v for v in self.graph.vertices if v in verts)

    def truncate(self, n: int) -> "SpectralBasis":
        if not 1 <= n <= len(self.modes):
            raise ValueError(f"truncation {n} outside 1..{len(self.modes)}")
        return SpectralBasis(self.graph, self.modes[:n], self.family, self.params)

    def gram_matrix(self) -> np.ndarray:
        """Quadrature Gram matrix ``<phi_j, phi_k>``."""
        n = len(self.modes)
        gram = np.zeros((n, n), dtype=LD)
        for eid in self.support_edges:
            length = self.graph.edge(eid).length
            mmax = max(m.effective_mode_number for m in self.modes)
            phase = float(2 * max(m.wavenumber for m in self.modes) * length)
            x, w = gauss_legendre(order_for(mmax, phase), 0, length)
            vals = np.array([m.evaluate(eid, x) for m in self.modes])
            gram += compensated_gram(vals, w, vals)
        return gram.astype(float)

    def boundary_residuals(self) -> list[dict]:
        """Pointwise vertex-condition residuals for every mode.

        Returns one record per (mode, support vertex) with the vertex kind and
        the residual: ``|value|`` for Dirichlet, ``|derivative|`` for Neumann,
        and the larger of the value spread and ``|sum of outgoing
        derivatives|`` for Neumann-Kirchhoff. Derivative residuals are divided
        by the wavenumber so both parts are on the scale of the mode values.
        """
        out = []
        vertices = self.support_vertices
        for mode in self.modes:
            for v in vertices:
                vals, flux = [], LD(0)
                for eid, side in self.graph.incident(v):
                    edge = self.graph.edge(eid)
                    x = LD(0) if side == 0 else edge.length
                    if not np.isfinite(x):
                        continue
                    vals.append(mode.evaluate(eid, x))
                    d = mode.derivative(eid, x)
                    flux += d if side == 0 else -d
                flux = abs(flux) / mode.wavenumber
                kind = self.graph.boundary[v]
                if kind is BoundaryCondition.DIRICHLET:
                    res = abs(vals[0])
                elif kind is BoundaryCondition.NEUMANN:
                    res = flux
                else:
                    res = max(max(vals) - min(vals), flux)
                out.append({"k": mode.index, "vertex": v, "kind": kind.value, "residual": float(res)})
        return out

    def check(self, tol: float = BOUNDARY_TOL) -> None:
        """Raise :class:`GraphError` if a vertex condition fails beyond ``tol``."""
        for rec in self.boundary_residuals():
            if rec["residual"] > tol:
                raise GraphError(
                    f"mode {rec['k']} violates the {rec['kind']} condition at vertex "
                    f"{rec['vertex']!r} (residual {rec['residual']:.3e})")

    def to_csv(self, path) -> None:
        """Write rows ``(k, mu_k, edge_id, a, b)``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "mu_k", "edge_id", "a", "b"])
            for m in self.modes:
                for eid in self.graph.edge_ids:
                    if eid in m.coefficients:
                        a, b = m.coefficients[eid]
                        writer.writerow([m.index, repr(m.eigenvalue), eid,
                                         repr(float(a)), repr(float(b))])


def merge_modes(graph: MetricGraph, modes: Sequence[EigenMode], family: str,
                params: Mapping | None = None) -> SpectralBasis:
    """Sort modes by eigenvalue, re-index them and reject collisions."""
    ordered = sorted(modes, key=lambda m: m.wavenumber)
    for a, b in zip(ordered, ordered[1:]):
        mu_a, mu_b = a.eigenvalue_ld, b.eigenvalue_ld
        if mu_b - mu_a <= MERGE_RTOL * mu_b:
            raise ResonantLengthsError(
                f"eigenvalues {float(mu_a)!r} and {float(mu_b)!r} coincide within "
                f"relative {MERGE_RTOL}; tie-breaking is not defined")
    reindexed = tuple(m.with_index(i + 1) for i, m in enumerate(ordered))
    return SpectralBasis(graph, reindexed, family, MappingProxyType(dict(params or {})))


def _require_edges(graph: MetricGraph, ids: Sequence[str]) -> None:
    for eid in ids:
        try:
            graph.edge(eid)
        except KeyError:
            raise GraphError(f"graph has no edge {eid!r}") from None


def tadpole_basis(n_modes: int, graph: MetricGraph | None = None, loop: str = "e1") -> SpectralBasis:
    """Tadpole modes ``sqrt(2) sin(2 k pi x)`` on the head, zero on the tail.

    Parameters
    ----------
    n_modes : int
        Number of modes, at least 1.
    graph : MetricGraph, optional
        Graph containing the head loop; defaults to :func:`tadpole_graph`.
    loop : str
        Id of the unit-length self-loop edge.

    Returns
    -------
    SpectralBasis
        ``mu_k = 4 k^2 pi^2`` for ``k = 1..n_modes``.
    """
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    graph = graph or tadpole_graph()
    _require_edges(graph, [loop])
    edge = graph.edge(loop)
    if not edge.is_loop or abs(edge.length - 1) > 1e-15:
        raise GraphError(f"edge {loop!r} must be a self-loop of length 1")
    root2 = np.sqrt(LD(2))
    modes = [EigenMode(k, 2 * k * PI, MappingProxyType({loop: (LD(0), root2)}), k, None)
             for k in range(1, n_modes + 1)]
    basis = SpectralBasis(graph, tuple(modes), "tadpole", MappingProxyType({"loop": loop}))
    basis.check()
    return basis


def star_pair_basis(lengths: Sequence, modes_per_length: int, graph: MetricGraph | None = None,
                    pairs: Sequence[tuple[str, str]] | None = None) -> SpectralBasis:
    """Antisymmetric two-edge modes of a star with paired edge lengths.

    For length class ``l`` and mode number ``m`` the mode is
    ``L**-0.5 * sin(m pi x / L)`` on the first edge of the pair and its
    negative on the second, with ``x = 0`` at the external vertex.

    Parameters
    ----------
    lengths : sequence
        One length per pair; exact expressions such as ``"cbrt(2)"`` allowed.
    modes_per_length : int
        Mode numbers ``1..modes_per_length`` are generated for each class.
    graph : MetricGraph, optional
        Defaults to :func:`star_graph` over ``lengths``.
    pairs : sequence of (str, str), optional
        Edge ids per class; defaults to ``("e1", "e2"), ("e3", "e4"), ...``.

    Raises
    ------
    ResonantLengthsError
        Eigenvalues of different classes coincide within relative 1e-9.
    """
    if modes_per_length < 1:
        raise ValueError("modes_per_length must be at least 1")
    lens = [parse_real(L) for L in lengths]
    if any(not np.isfinite(L) or L <= 0 for L in lens):
        raise GraphError("star lengths must be finite and positive")
    graph = graph or star_graph(lens)
    pairs = pairs or [(f"e{2 * l + 1}", f"e{2 * l + 2}") for l in range(len(lens))]
    if len(pairs) != len(lens):
        raise GraphError("one edge pair per length is required")
    modes = []
    for l, (L, (e_plus, e_minus)) in enumerate(zip(lens, pairs), start=1):
        _require_edges(graph, [e_plus, e_minus])
        for eid in (e_plus, e_minus):
            if abs(graph.edge(eid).length - L) > 1e-15 * L:
                raise GraphError(f"edge {eid!r} does not have length {float(L)!r}")
        amp = 1 / np.sqrt(L)
        for m in range(1, modes_per_length + 1):
            coeffs = MappingProxyType({e_plus: (LD(0), amp), e_minus: (LD(0), -amp)})
            modes.append(EigenMode(0, m * PI / L, coeffs, m, l))
    basis = merge_modes(graph, modes, "star_pair",
                        {"lengths": tuple(lens), "pairs": tuple(map(tuple, pairs))})
    basis.check()
    return basis


CHAIN_CLASSES = ("I1", "I2", "I3")


def uniform_chain_basis(length, chain_class: str, n_modes: int, n_edges: int | None = None,
                        graph: MetricGraph | None = None,
                        edges: Sequence[str] | None = None) -> SpectralBasis:
    """Modes localized on a uniform chain of equal-length edges.

    Classes follow the three families of controllable chains:

    * ``"I1"``: two edges with Neumann ends, ``mu = (2k-1)^2 pi^2 / (4 L^2)``;
    * ``"I2"``: open chain with Dirichlet ends, ``mu = k^2 pi^2 / L^2``;
    * ``"I3"``: closed chain (loop), ``mu = (2k-1)^2 pi^2 / L^2``.

    Every mode vanishes at the chain's internal vertices, so the chain may sit
    inside a larger graph. Signs across consecutive edges are chosen so the
    Neumann-Kirchhoff derivative sums cancel.

    Parameters
    ----------
    length : real or str
        Common edge length ``L``.
    chain_class : {"I1", "I2", "I3"}
    n_modes : int
    n_edges : int, optional
        Number of chain edges. ``I1`` requires 2; ``I2`` defaults to 1;
        ``I3`` defaults to 2 and must be even (an odd loop admits no mode of
        this family).
    graph, edges : optional
        Existing graph and the ordered edge ids of the chain. Each edge must
        run from the previous edge's end vertex.
    """
    cls = str(chain_class).upper().replace("_", "")
    if cls not in CHAIN_CLASSES:
        raise ValueError(f"unsupported chain class {chain_class!r}; expected one of {CHAIN_CLASSES}")
    if n_modes < 1:
        raise ValueError("n_modes must be at least 1")
    L = parse_real(length)
    if cls == "I1":
        n_edges = 2 if n_edges is None else n_edges
        if n_edges != 2:
            raise ValueError("class I1 chains have exactly two edges")
        kind = "neumann"
    elif cls == "I2":
        n_edges = 1 if n_edges is None else n_edges
        kind = "dirichlet"
    else:
        n_edges = 2 if n_edges is None else n_edges
        if n_edges % 2:
            raise ValueError("class I3 loops need an even number of edges")
        kind = "loop"
    if graph is None:
        graph = chain_graph(n_edges, L, kind)
        edges = list(graph.edge_ids)
    if edges is None or len(edges) != n_edges:
        raise GraphError(f"chain needs {n_edges} edge ids")
    _require_edges(graph, edges)

    modes = []
    for k in range(1, n_modes + 1):
        if cls == "I1":
            w = (2 * k - 1) * PI / (2 * L)
            amp = 1 / np.sqrt(L)
            sign2 = LD(-1) ** k
            coeffs = {edges[0]: (amp, LD(0)), edges[1]: (LD(0), sign2 * amp)}
        else:
            q = k if cls == "I2" else 2 * k - 1
            w = q * PI / L
            amp = np.sqrt(LD(2) / (L * n_edges))
            flip = -1 if q % 2 else 1
            coeffs = {eid: (LD(0), amp * flip ** i) for i, eid in enumerate(edges)}
        modes.append(EigenMode(k, w, MappingProxyType(coeffs), k, None))
    basis = SpectralBasis(graph, tuple(modes), f"uniform_chain_{cls}",
                          MappingProxyType({"class": cls, "edges": tuple(edges), "length": L}))
    basis.check()
    return basis


@dataclass(frozen=True)
class QuantumState:
    """Coefficient vector ``c_k = <phi_k, psi>`` in a truncated basis."""

    coefficients: np.ndarray
    basis: SpectralBasis | None = None

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def basis_state(cls, k: int, n: int, basis: SpectralBasis | None = None) -> "QuantumState":
        """Eigenstate ``phi_k`` (1-based) in an ``n``-mode truncation."""
        if not 1 <= k <= n:
            raise IndexError(f"mode index {k} outside 1..{n}")
        c = np.zeros(n, dtype=complex)
        c[k - 1] = 1
        return cls(c, basis)

    def __len__(self) -> int:
        return self.coefficients.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def hs_norm(self, s: float) -> float:
        return hs_norm(self, s)

    def normalized(self) -> "QuantumState":
        return QuantumState(self.coefficients / self.norm(), self.basis)


def hs_norm(state, s: float) -> float:
    """Weighted norm ``(sum_k |k^s c_k|^2)^(1/2)`` with 1-based ``k``.

    Parameters
    ----------
    state : QuantumState or array_like
    s : float
        Nonnegative regularity index; ``s = 0`` gives the l2 norm.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    c = state.coefficients if isinstance(state, QuantumState) else np.asarray(state)
    k = np.arange(1, c.shape[-1] + 1, dtype=float)
    return float(np.linalg.norm(k ** s * c))
