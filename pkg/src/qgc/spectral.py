"""Checks on spectra and couplings: gaps, resonances, assumptions, perturbation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .basis import BOUNDARY_TOL, SpectralBasis
from .graph import BoundaryCondition
from .operator import ControlOperator

RESONANCE_RTOL = 1e-9


def _as_mu(mu) -> np.ndarray:
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.size >= 2 and np.any(np.diff(mu) <= 0):
        raise ValueError("eigenvalues must be strictly increasing")
    return mu


def _as_matrix(Bmat) -> np.ndarray:
    return np.asarray(getattr(Bmat, "matrix", Bmat))


# Gaps -------------------------------------------------------------------------

@dataclass(frozen=True)
class GapReport:
    """Outcome of a gap check.

    ``margins[k-1] = mu_{k+M} - mu_k - delta*M`` for the reported ``M``;
    ``attaining_k`` is the 1-based index where the margin is smallest.
    """

    M: int
    delta: float
    margins: np.ndarray
    passed: bool
    inf_gap: float
    attaining_k: int

    def as_row(self) -> dict:
        return {"check": "gap_uniform", "M": self.M, "delta": self.delta,
                "margin": float(self.margins.min()), "attaining_k": self.attaining_k,
                "inf_gap": self.inf_gap, "pass": self.passed}


def spectral_gaps(mu) -> np.ndarray:
    """Consecutive gaps ``mu_{k+1} - mu_k``."""
    return np.diff(_as_mu(mu))


def check_gap_polynomial(mu, d_tilde: float) -> tuple[float, bool, int]:
    """Polynomial gap constant ``C_best = min_k (mu_{k+1} - mu_k) k^(d+1)``.

    Returns
    -------
    C_best : float
    passed : bool
        ``C_best > 0``, always true for a strictly increasing finite sequence.
    k : int
        1-based index attaining the minimum.
    """
    mu = _as_mu(mu)
    if mu.size < 2:
        raise ValueError("need at least two eigenvalues")
    if d_tilde < 1:
        raise ValueError("the exponent d_tilde must be at least 1")
    k = np.arange(1, mu.size, dtype=float)
    scaled = np.diff(mu) * k ** (d_tilde + 1)
    i = int(np.argmin(scaled))
    return float(scaled[i]), bool(scaled[i] > 0), i + 1


def check_gap_uniform(mu, delta: float) -> GapReport:
    """Smallest ``M`` with ``min_k (mu_{k+M} - mu_k) > delta * M``.

    Raises
    ------
    ValueError
        If no ``M < len(mu)`` satisfies the condition.
    """
    mu = _as_mu(mu)
    if delta <= 0:
        raise ValueError("delta must be positive")
    inf_gap = float(np.diff(mu).min()) if mu.size > 1 else np.inf
    for M in range(1, mu.size):
        margins = mu[M:] - mu[:-M] - delta * M
        if margins.min() > 0:
            i = int(np.argmin(margins))
            return GapReport(M, float(delta), margins, True, inf_gap, i + 1)
    raise ValueError(f"no block size M <= {mu.size - 1} satisfies the uniform gap for delta={delta}")


@dataclass(frozen=True)
class ClassPartition:
    """Partition of ``1..N`` into chained classes ``E_m`` (1-based indices)."""

    classes: tuple[tuple[int, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.classes)

    def class_of(self, k: int) -> int:
        for i, c in enumerate(self.classes):
            if k in c:
                return i
        raise KeyError(k)


def partition_classes(mu, delta: float, M: int) -> ClassPartition:
    """Group consecutive indices while the gap stays below ``delta``.

    Raises
    ------
    ValueError
        A class has more than ``M - 1`` members for ``M > 1``, or more than
        one member for ``M = 1``.
    """
    mu = _as_mu(mu)
    classes, current = [], [1]
    for k in range(1, mu.size):
        if mu[k] - mu[k - 1] < delta:
            current.append(k + 1)
        else:
            classes.append(tuple(current))
            current = [k + 1]
    classes.append(tuple(current))
    limit = M - 1 if M > 1 else 1
    for c in classes:
        if len(c) > limit:
            raise ValueError(f"class {c} exceeds the size bound {limit} for M={M}")
    return ClassPartition(tuple(classes))


# Resonances -------------------------------------------------------------------

@dataclass(frozen=True)
class Resonance:
    """Quadruple ``((j, k), (l, m))`` with ``mu_j - mu_k ~ mu_l - mu_m`` (1-based)."""

    first: tuple[int, int]
    second: tuple[int, int]
    mismatch: float
    exact: bool
    diagonal: float | None = None


@dataclass(frozen=True)
class ResonanceTable:
    entries: tuple[Resonance, ...]
    tol: float
    N: int

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def exact(self) -> tuple[Resonance, ...]:
        return tuple(r for r in self.entries if r.exact)

    @property
    def near_misses(self) -> tuple[Resonance, ...]:
        return tuple(r for r in self.entries if not r.exact)

    def keys(self) -> set[frozenset]:
        """Entries as unordered pairs of ordered pairs, for set comparison."""
        return {frozenset((r.first, r.second)) for r in self.entries}

    def mixed(self, labels: Sequence) -> tuple[Resonance, ...]:
        """Entries whose four levels do not share one label (e.g. a length class)."""
        out = []
        for r in self.entries:
            levels = (*r.first, *r.second)
            if len({labels[i - 1] for i in levels}) > 1:
                out.append(r)
        return tuple(out)

    def with_diagonal(self, Bmat) -> "ResonanceTable":
        d = np.real(np.diag(_as_matrix(Bmat)))
        out = []
        for r in self.entries:
            (j, k), (l, m) = r.first, r.second
            combo = d[j - 1] - d[k - 1] - d[l - 1] + d[m - 1]
            out.append(Resonance(r.first, r.second, r.mismatch, r.exact, float(combo)))
        return ResonanceTable(tuple(out), self.tol, self.N)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k", "l", "m", "mismatch", "exact", "diagonal"])
            for r in self.entries:
                w.writerow([*r.first, *r.second, repr(r.mismatch), int(r.exact),
                            "" if r.diagonal is None else repr(r.diagonal)])


def _ordered_pairs(N: int) -> tuple[np.ndarray, np.ndarray]:
    j, k = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    mask = j != k
    return j[mask], k[mask]


def find_resonances(mu, N: int | None = None, tol: float | None = None,
                    integer_levels: Sequence[int] | None = None) -> ResonanceTable:
    """All quadruples with ``|(mu_j - mu_k) - (mu_l - mu_m)| <= tol``.

    The ``N(N-1)`` ordered differences are sorted and every window of entries
    within ``tol`` is scanned, which costs ``O(N^2 log N)`` plus the output.

    Parameters
    ----------
    mu : array_like
        Eigenvalues, strictly increasing.
    N : int, optional
        Truncation; defaults to ``len(mu)``.
    tol : float, optional
        Absolute tolerance; defaults to ``1e-9 * max|mu|``.
    integer_levels : sequence of int, optional
        Exact integer surrogates ``q_k`` with ``mu_k`` proportional to
        ``q_k`` (``k^2`` on the tadpole). Equality of ``q`` differences decides
        exactness without rounding.
    """
    mu = _as_mu(mu)
    N = mu.size if N is None else int(N)
    mu = mu[:N]
    tol = RESONANCE_RTOL * float(np.max(np.abs(mu))) if tol is None else float(tol)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if N < 2:
        return ResonanceTable((), tol, N)
    j, k = _ordered_pairs(N)
    diff = mu[j] - mu[k]
    order = np.argsort(diff, kind="stable")
    ds = diff[order]
    upper = np.searchsorted(ds, ds + tol, side="right")
    exact_tol = 64 * np.finfo(float).eps * float(np.max(np.abs(mu)))
    q = None if integer_levels is None else np.asarray(integer_levels, dtype=object)[:N]
    entries = []
    for a in range(ds.size):
        for b in range(a + 1, upper[a]):
            p1, p2 = order[a], order[b]
            first, second = (int(j[p1]) + 1, int(k[p1]) + 1), (int(j[p2]) + 1, int(k[p2]) + 1)
            mismatch = float(ds[b] - ds[a])
            if q is not None:
                exact = q[first[0] - 1] - q[first[1] - 1] == q[second[0] - 1] - q[second[1] - 1]
            else:
                exact = mismatch <= exact_tol
            pair = sorted((first, second))
            entries.append(Resonance(pair[0], pair[1], mismatch, bool(exact)))
    entries.sort(key=lambda r: (r.first, r.second))
    return ResonanceTable(tuple(entries), tol, N)


# Assumption checks ------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionIReport:
    """Coupling decay constant and resonance non-degeneracy."""

    eta: float
    C_best: float
    attaining_k: int
    couplings_pass: bool
    resonances: ResonanceTable
    violations: tuple[Resonance, ...]
    min_diagonal: float

    @property
    def passed(self) -> bool:
        return self.couplings_pass and not self.violations

    def rows(self) -> list[dict]:
        return [
            {"check": "assumption_I.1", "pass": self.couplings_pass, "margin": self.C_best,
             "attaining_k": self.attaining_k},
            {"check": "assumption_I.2", "pass": not self.violations, "margin": self.min_diagonal,
             "attaining_k": "", "resonances": len(self.resonances),
             "violations": len(self.violations)},
        ]


def check_assumption_I(Bmat, mu, eta: float, tol: float = 1e-12,
                       resonances: ResonanceTable | None = None,
                       integer_levels: Sequence[int] | None = None) -> AssumptionIReport:
    """Check the coupling decay and the diagonal non-degeneracy condition.

    Parameters
    ----------
    Bmat : CouplingMatrix or ndarray
    mu : array_like
        Eigenvalues of the same basis.
    eta : float
        Decay exponent in ``|B_k1| >= C / k^(2 + eta)``.
    tol : float
        Couplings and diagonal combinations with magnitude ``<= tol`` count
        as zero.
    resonances : ResonanceTable, optional
        Precomputed table; otherwise :func:`find_resonances` is called.
    integer_levels : sequence of int, optional
        Passed to :func:`find_resonances` for exact detection.
    """
    B = _as_matrix(Bmat)
    mu = _as_mu(mu)
    N = B.shape[0]
    col = np.abs(B[:, 0])
    k = np.arange(1, N + 1, dtype=float)
    scaled = col * k ** (2 + eta)
    i = int(np.argmin(scaled))
    couplings_pass = bool(np.all(col > tol))
    table = resonances or find_resonances(mu[:N], N, integer_levels=integer_levels)
    table = table.with_diagonal(B)
    violations = tuple(r for r in table.entries if abs(r.diagonal) <= tol)
    min_diag = min((abs(r.diagonal) for r in table.entries), default=float("inf"))
    return AssumptionIReport(float(eta), float(scaled[i]), i + 1, couplings_pass, table,
                             violations, float(min_diag))


@dataclass(frozen=True)
class AssumptionIIReport:
    """Regularity bookkeeping and pointwise boundary identities for ``B``."""

    boundary_case: str
    a_plus_eta: float
    d_ranges: dict
    identity_residual: float
    identity_failures: tuple
    notes: tuple = field(default_factory=tuple)

    @property
    def admissible(self) -> bool:
        return bool(self.d_ranges)

    @property
    def passed(self) -> bool:
        return self.admissible and not self.identity_failures

    def rows(self) -> list[dict]:
        ranges = "; ".join(f"{k}: [{lo:g}, {hi:g})" for k, (lo, hi) in self.d_ranges.items())
        return [
            {"check": "assumption_II.range", "pass": self.admissible,
             "margin": ranges or "no admissible d", "attaining_k": ""},
            {"check": "assumption_II.boundary", "pass": not self.identity_failures,
             "margin": self.identity_residual, "attaining_k": ""},
        ]


_CASES = {
    "D/N": (1.0, 1.5),
    "N": (2.0, 3.5),
    "D": (1.0, 2.5),
}


def _support_boundary_case(basis: SpectralBasis) -> tuple[str, list[str]]:
    """Boundary type of the support subgraph: ``"D"``, ``"N"``, ``"D/N"`` or ``"none"``."""
    g = basis.graph
    support = set(basis.support_edges)
    kinds, notes = set(), []
    for v in basis.support_vertices:
        deg = sum(1 for eid, _ in g.incident(v) if eid in support)
        if deg != 1:
            continue
        bc = g.boundary[v]
        if bc is BoundaryCondition.NEUMANN_KIRCHHOFF:
            # Internal in the graph but a leaf of the support: classify by the modes.
            vals = max(rec["residual"] for rec in basis.boundary_residuals() if rec["vertex"] == v)
            bc = BoundaryCondition.DIRICHLET
            notes.append(f"vertex {v} is a support leaf with NK; treated as Dirichlet "
                         f"(mode residual {vals:.1e})")
        kinds.add("D" if bc is BoundaryCondition.DIRICHLET else "N")
    if not kinds:
        return "none", notes
    if kinds == {"D"}:
        return "D", notes
    if kinds == {"N"}:
        return "N", notes
    return "D/N", notes


def check_assumption_II(basis: SpectralBasis, B: ControlOperator, eta: float, a: float,
                        tol: float = BOUNDARY_TOL) -> AssumptionIIReport:
    """Range bookkeeping and pointwise boundary identities for ``B phi_k``.

    The support subgraph's external vertices select which cases apply: all
    Dirichlet admits the (D) and (D/N) ranges, all Neumann admits (N) and
    (D/N), a mix admits (D/N) only; a support without external vertices
    admits all three. Each case yields ``d`` in ``[max(a + eta, lo), hi)``
    when ``a + eta < hi``.

    At each support vertex the check evaluates ``B phi_k`` for every mode:
    the value must vanish at Dirichlet vertices, the outgoing derivative sum
    must vanish at Neumann-Kirchhoff vertices, values must agree at
    Neumann-Kirchhoff vertices, and derivatives must vanish at Neumann
    vertices.
    """
    case, notes = _support_boundary_case(basis)
    applicable = {"D": ("D/N", "D"), "N": ("D/N", "N"), "D/N": ("D/N",),
                  "none": ("D/N", "N", "D")}[case]
    s = a + eta
    ranges = {}
    for name in applicable:
        lo, hi = _CASES[name]
        if 0 < s < hi:
            ranges[name] = (max(s, lo), hi)

    g = basis.graph
    worst, failures = 0.0, []
    vertices = basis.support_vertices
    for mode in basis.modes:
        scale = max(1.0, float(mode.wavenumber))
        for v in vertices:
            vals, flux = [], 0.0
            for eid, side in g.incident(v):
                edge = g.edge(eid)
                if not edge.finite:
                    vals.append(0.0)
                    continue
                x = np.longdouble(0) if side == 0 else edge.length
                vals.append(float(B.apply(mode, eid, x)))
                d = float(B.apply_derivative(mode, eid, x))
                flux += d if side == 0 else -d
            kind = g.boundary[v]
            if kind is BoundaryCondition.DIRICHLET:
                res = abs(vals[0])
            elif kind is BoundaryCondition.NEUMANN:
                res = abs(flux) / scale
            else:
                res = max(max(vals) - min(vals), abs(flux) / scale)
            worst = max(worst, res)
            if res > tol:
                failures.append((mode.index, v, kind.value, res))
    return AssumptionIIReport(case, float(s), ranges, worst, tuple(failures), tuple(notes))


# Perturbation -----------------------------------------------------------------

@dataclass(frozen=True)
class PerturbedSpectrum:
    """Eigen-decomposition of ``diag(mu) + u0 * B`` in the truncated basis.

    ``shifts[k] = mu_k^{u0} - mu_k`` computed as a Rayleigh quotient of
    ``diag(mu - mu_k) + u0 B``, which avoids the cancellation of subtracting
    two nearly equal eigenvalues.
    """

    u0: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    shifts: np.ndarray

    def couplings(self, Bmat) -> np.ndarray:
        """``<phi_j^{u0}, B phi_k^{u0}>`` in the perturbed eigenbasis."""
        V = self.eigenvectors
        return V.conj().T @ _as_matrix(Bmat) @ V


def perturbed_spectrum(mu, Bmat, u0: float, N: int | None = None) -> PerturbedSpectrum:
    """Eigenvalues and phase-fixed eigenvectors of ``diag(mu) + u0 B``."""
    B = _as_matrix(Bmat)
    N = B.shape[0] if N is None else int(N)
    if N < 2:
        raise ValueError("N must be at least 2")
    mu = np.asarray(mu, dtype=float)[:N]
    B = B[:N, :N]
    H = np.diag(mu).astype(B.dtype) + u0 * B
    w, V = np.linalg.eigh(H)
    idx = np.argmax(np.abs(V), axis=0)
    lead = V[idx, np.arange(N)]
    V = V * (np.abs(lead) / lead)[None, :].conj()
    shifts = np.empty(N)
    for k in range(N):
        v = V[:, k]
        Hk = np.diag(mu - mu[k]) + u0 * B
        shifts[k] = float(np.real(v.conj() @ Hk @ v) / np.real(v.conj() @ v))
    return PerturbedSpectrum(float(u0), w, V, shifts)


@dataclass(frozen=True)
class NondegeneracyScan:
    """Per-``u0`` minima of quadruple combinations and couplings."""

    u0: np.ndarray
    min_combination: np.ndarray
    min_coupling: np.ndarray
    min_resonant_combination: np.ndarray

    def rows(self) -> list[dict]:
        return [{"u0": float(u), "min_combination": float(c), "min_resonant_combination": float(r),
                 "min_coupling": float(b)}
                for u, c, r, b in zip(self.u0, self.min_combination,
                                      self.min_resonant_combination, self.min_coupling)]


def scan_nondegeneracy(mu, Bmat, u0_grid: Sequence[float], N: int | None = None,
                       resonances: ResonanceTable | None = None) -> NondegeneracyScan:
    """Recompute quadruple combinations and couplings on a grid of ``u0``.

    For each ``u0`` the report gives the smallest
    ``|mu_k^{u0} - mu_j^{u0} - mu_m^{u0} + mu_n^{u0}|`` over all quadruples
    with ``(k, j) != (m, n)`` and ``j != k``, ``n != m``; the smallest value
    over the quadruples resonant at ``u0 = 0``; and the smallest perturbed
    coupling ``|<phi_k^{u0}, B phi_1^{u0}>|``.
    """
    B = _as_matrix(Bmat)
    N = B.shape[0] if N is None else int(N)
    mu = np.asarray(mu, dtype=float)[:N]
    table = resonances or find_resonances(mu, N)
    j, k = _ordered_pairs(N)
    mins, res_mins, cmins = [], [], []
    for u0 in u0_grid:
        ps = perturbed_spectrum(mu, B[:N, :N], u0, N)
        # Split the combination so exact unperturbed cancellations stay exact.
        d0 = mu[j] - mu[k]
        ds = ps.shifts[j] - ps.shifts[k]
        combo = np.abs((d0[:, None] - d0[None, :]) + (ds[:, None] - ds[None, :]))
        np.fill_diagonal(combo, np.inf)
        mins.append(combo.min())
        vals = []
        for r in table.entries:
            (a, b), (c, d) = r.first, r.second
            vals.append(abs((mu[a - 1] - mu[b - 1] - mu[c - 1] + mu[d - 1])
                            + (ps.shifts[a - 1] - ps.shifts[b - 1] - ps.shifts[c - 1]
                               + ps.shifts[d - 1])))
        res_mins.append(min(vals) if vals else np.inf)
        cmins.append(np.abs(ps.couplings(B[:N, :N])[:, 0]).min())
    return NondegeneracyScan(np.asarray(u0_grid, dtype=float), np.array(mins),
                             np.array(cmins), np.array(res_mins))
