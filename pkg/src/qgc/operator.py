"""Bounded control operators built from edge-coupling multiplication terms."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import sympy

from ._expr import X, ExpressionError, parse_real, parse_sympy, sympy_to_ld
from .basis import EigenMode, SpectralBasis
from .graph import GraphError, MetricGraph, star_graph, tadpole_graph
from .quadrature import PI, compensated_gram, compensated_sum, gauss_legendre, order_for

LD = np.longdouble
HERMITICITY_TOL = 1e-10


class HermiticityError(ValueError):
    """The assembled matrix is not Hermitian within tolerance."""


@dataclass(frozen=True)
class Profile:
    """Real profile ``poly(x) * h(x)`` with ``h`` one of 1, cos, sin.

    Attributes
    ----------
    poly : tuple of longdouble
        Polynomial coefficients in ascending order.
    harmonic : {None, "cos", "sin"}
    freq, phase : longdouble
        ``h(x) = cos(freq * x + phase)`` (or ``sin``).
    text : str
        Source expression, echoed in reports.
    """

    poly: tuple
    harmonic: str | None = None
    freq: np.longdouble = LD(0)
    phase: np.longdouble = LD(0)
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "Profile":
        """Parse ``"x*(1-x)"``, ``"cbrt(2)*cos(pi*x/(3*cbrt(2)))"`` and alike."""
        expr = parse_sympy(text, allow_x=True)
        trig = [f for f in sympy.Mul.make_args(expr) if f.func in (sympy.cos, sympy.sin)]
        if len(trig) > 1:
            raise ExpressionError(f"profile {text!r} has more than one harmonic factor")
        harmonic, freq, phase = None, LD(0), LD(0)
        rest = expr
        if trig:
            factor = trig[0]
            rest = sympy.Mul(*[f for f in sympy.Mul.make_args(expr) if f is not factor])
            try:
                arg = sympy.Poly(sympy.expand(factor.args[0]), X)
            except sympy.PolynomialError:
                raise ExpressionError(f"harmonic argument in {text!r} must be linear in x") from None
            if arg.degree() > 1:
                raise ExpressionError(f"harmonic argument in {text!r} must be linear in x")
            harmonic = factor.func.__name__
            freq = sympy_to_ld(arg.coeff_monomial(X))
            phase = sympy_to_ld(arg.coeff_monomial(1))
        try:
            poly = sympy.Poly(sympy.expand(rest), X)
        except sympy.PolynomialError:
            raise ExpressionError(
                f"profile {text!r} must be a polynomial times one cos/sin factor") from None
        coeffs = tuple(sympy_to_ld(c) for c in reversed(poly.all_coeffs()))
        return cls(coeffs, harmonic, freq, phase, str(text))

    @classmethod
    def cosine(cls, amplitude, freq, text: str = "") -> "Profile":
        return cls((LD(amplitude),), "cos", LD(freq), LD(0), text)

    def _poly(self, x, deriv: bool = False):
        c = self.poly
        if deriv:
            c = tuple(i * c[i] for i in range(1, len(c))) or (LD(0),)
        out = np.zeros_like(x) + c[-1]
        for a in reversed(c[:-1]):
            out = out * x + a
        return out

    def _harm(self, x, deriv: bool = False):
        if self.harmonic is None:
            return np.zeros_like(x) if deriv else np.ones_like(x)
        arg = self.freq * x + self.phase
        if self.harmonic == "cos":
            return -self.freq * np.sin(arg) if deriv else np.cos(arg)
        return self.freq * np.cos(arg) if deriv else np.sin(arg)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=LD)
        return self._poly(x) * self._harm(x)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=LD)
        return self._poly(x, True) * self._harm(x) + self._poly(x) * self._harm(x, True)


@dataclass(frozen=True)
class CouplingTerm:
    """Contribution ``sign * profile(x) * psi^{in}(scale * x)`` to ``(B psi)^{out}``."""

    out_edge: str
    in_edge: str
    profile: Profile
    scale: np.longdouble = LD(1)
    sign: int = 1


@dataclass(frozen=True)
class ControlOperator:
    """Finite sum of :class:`CouplingTerm` on a graph."""

    terms: tuple[CouplingTerm, ...]
    graph: MetricGraph

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.sign not in (1, -1):
                raise ValueError("term sign must be +1 or -1")
            try:
                e_out, e_in = self.graph.edge(t.out_edge), self.graph.edge(t.in_edge)
            except KeyError as exc:
                raise GraphError(f"coupling term references unknown edge {exc.args[0]!r}") from None
            if not (e_out.finite and e_in.finite):
                raise GraphError("coupling terms must act between finite edges")
            if not t.scale > 0:
                raise ValueError("coordinate scale must be positive")
            if t.scale * e_out.length > e_in.length * (1 + LD(1e-15)):
                raise GraphError(
                    f"coordinate map of term {t.out_edge}<-{t.in_edge} leaves the source edge")

    def apply(self, mode: EigenMode, edge_id: str, x) -> np.ndarray:
        """``(B phi)`` on ``edge_id`` at coordinates ``x``."""
        x = np.asarray(x, dtype=LD)
        out = np.zeros_like(x)
        for t in self.terms:
            if t.out_edge == edge_id:
                out += t.sign * t.profile.evaluate(x) * mode.evaluate(t.in_edge, t.scale * x)
        return out

    def apply_derivative(self, mode: EigenMode, edge_id: str, x) -> np.ndarray:
        """``d/dx (B phi)`` on ``edge_id``."""
        x = np.asarray(x, dtype=LD)
        out = np.zeros_like(x)
        for t in self.terms:
            if t.out_edge == edge_id:
                sx = t.scale * x
                out += t.sign * (t.profile.derivative(x) * mode.evaluate(t.in_edge, sx)
                                 + t.profile.evaluate(x) * t.scale * mode.derivative(t.in_edge, sx))
        return out


@dataclass(frozen=True)
class CouplingMatrix:
    """Symmetrized matrix ``B_jk = <phi_j, B phi_k>`` with its pre-symmetrization defect."""

    matrix: np.ndarray
    basis: SpectralBasis
    hermiticity_defect: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def to_csv(self, path) -> None:
        """Write rows ``(j, k, re, im)`` with 1-based indices."""
        m = np.asarray(self.matrix, dtype=complex)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "k", "re", "im"])
            for j in range(m.shape[0]):
                for k in range(m.shape[1]):
                    w.writerow([j + 1, k + 1, repr(float(m[j, k].real)), repr(float(m[j, k].imag))])


def _term_nodes(term: CouplingTerm, graph: MetricGraph, mmax: int, wmax_out, wmax_in):
    length = graph.edge(term.out_edge).length
    phase = float((wmax_out + term.scale * wmax_in + abs(term.profile.freq)) * length)
    return gauss_legendre(order_for(mmax, phase), 0, length)


def matrix_element(B: ControlOperator, phi_j: EigenMode, phi_k: EigenMode) -> float:
    """Quadrature value of ``<phi_j, B phi_k>``.

    Sums ``sign * int phi_j^{out}(x) profile(x) phi_k^{in}(scale x) dx`` over
    the terms, in long double with compensated summation.
    """
    mmax = max(phi_j.effective_mode_number, phi_k.effective_mode_number)
    total = LD(0)
    for t in B.terms:
        if t.out_edge not in phi_j.coefficients or t.in_edge not in phi_k.coefficients:
            continue
        x, w = _term_nodes(t, B.graph, mmax, phi_j.wavenumber, phi_k.wavenumber)
        vals = w * phi_j.evaluate(t.out_edge, x) * t.profile.evaluate(x) \
            * phi_k.evaluate(t.in_edge, t.scale * x)
        total += t.sign * compensated_sum(vals)
    return float(total)


def assemble_matrix(B: ControlOperator, basis: SpectralBasis, N: int | None = None,
                    tol: float = HERMITICITY_TOL, raw: bool = False) -> CouplingMatrix:
    """Assemble the ``N x N`` matrix of ``B`` in ``basis``.

    Parameters
    ----------
    B : ControlOperator
    basis : SpectralBasis
    N : int, optional
        Truncation order; defaults to the basis size.
    tol : float
        Largest accepted ``max |M - M^T|`` before symmetrization.
    raw : bool
        Return the unsymmetrized matrix without the hermiticity check.

    Raises
    ------
    HermiticityError
        If the defect exceeds ``tol``.
    """
    N = len(basis) if N is None else N
    if not 1 <= N <= len(basis):
        raise ValueError(f"truncation {N} outside 1..{len(basis)}")
    modes = basis.modes[:N]
    mmax = max(m.effective_mode_number for m in modes)
    wmax = max(m.wavenumber for m in modes)
    M = np.zeros((N, N), dtype=LD)
    for t in B.terms:
        x, w = _term_nodes(t, B.graph, mmax, wmax, wmax)
        left = np.array([m.evaluate(t.out_edge, x) for m in modes])
        right = np.array([m.evaluate(t.in_edge, t.scale * x) for m in modes])
        M += t.sign * compensated_gram(left, w * t.profile.evaluate(x), right)
    M = M.astype(float)
    defect = float(np.max(np.abs(M - M.T))) if N else 0.0
    if raw:
        return CouplingMatrix(M, basis.truncate(N), defect)
    if defect > tol:
        raise HermiticityError(
            f"assembled matrix has hermiticity defect {defect:.3e} > {tol:.1e}; "
            "the term set is not symmetric on this basis")
    return CouplingMatrix((M + M.T) / 2, basis.truncate(N), defect)


# Closed forms -----------------------------------------------------------------

def tadpole_coupling_oracle(k: int) -> float:
    """``<phi_k, B phi_1> = -2k / ((k^2 - 1)^2 pi^2)`` for the tadpole, ``k >= 2``."""
    if k < 2:
        raise ValueError("the closed form holds for k >= 2")
    return float(-2 * k / ((LD(k) ** 2 - 1) ** 2 * PI ** 2))


def tadpole_element(j: int, k: int) -> float:
    """Exact ``<phi_j, x(1-x) phi_k>`` on the tadpole head, any ``j, k >= 1``."""
    if j < 1 or k < 1:
        raise ValueError("mode indices start at 1")
    if j == k:
        return float(LD(1) / 6 + 1 / (8 * PI ** 2 * LD(k) ** 2))
    return float((1 / LD(j + k) ** 2 - 1 / LD(j - k) ** 2) / (2 * PI ** 2))


def _cos_third_overlap(a: int, b: int) -> np.longdouble:
    """``int_0^1 cos(pi y / 3) sin(a pi y) sin(b pi y) dy``."""
    pref = 3 * np.sqrt(LD(3)) / (4 * PI) * (-1) ** (a + b)
    return pref * (1 / (1 - 9 * LD(a - b) ** 2) - 1 / (1 - 9 * LD(a + b) ** 2))


def star_same_class_element(a: int, b: int, length) -> float:
    """Exact same-class element ``<phi_a, B phi_b>`` of the star operator.

    Both modes belong to the class of edge length ``length`` with mode numbers
    ``a`` and ``b``; the value is ``2 L * int_0^1 cos(pi y/3) sin(a pi y)
    sin(b pi y) dy``.
    """
    L = parse_real(length)
    return float(2 * L * _cos_third_overlap(a, b))


def star_diagonal_oracle(m: int, length) -> float:
    """Stated star diagonal ``27 L^2 sqrt(3) m^2 / ((36 m^2 - 1) pi)``.

    Quadrature of :func:`star_operator` gives ``2/L`` times this value; the
    exact element is :func:`star_same_class_element` with ``a = b = m``.
    """
    L = parse_real(length)
    return float(27 * L ** 2 * np.sqrt(LD(3)) * m ** 2 / ((36 * LD(m) ** 2 - 1) * PI))


def star_coupling_oracle(m: int, same_class: bool = True, L=None) -> float:
    """Reference lower-bound expression for ``|<phi_1, B phi_k>|`` on the star.

    Returns ``|3^3 c sqrt(3) m / ((64 - 180 m^2 + 81 m^4) pi)|`` with
    ``c = 2^(5/3)``, or ``c = 2 L^2`` when ``L`` is given. The denominator is
    negative at ``m = 1``; the absolute value is returned.
    """
    if m < 1:
        raise ValueError("mode number starts at 1")
    if not same_class:
        raise ValueError("a closed form is only available within one length class")
    c = LD(2) ** (LD(5) / 3) if L is None else 2 * parse_real(L) ** 2
    m = LD(m)
    return float(abs(27 * c * np.sqrt(LD(3)) * m / ((64 - 180 * m ** 2 + 81 * m ** 4) * PI)))


# Example operators ------------------------------------------------------------

def tadpole_operator(graph: MetricGraph | None = None, loop: str = "e1") -> ControlOperator:
    """Multiplication by ``x(1-x)`` on the tadpole head."""
    graph = graph or tadpole_graph()
    return ControlOperator((CouplingTerm(loop, loop, Profile.parse("x*(1-x)")),), graph)


def star_operator(lengths: Sequence = ("cbrt(2)", "cbrt(5)"), graph: MetricGraph | None = None,
                  pairs: Sequence[tuple[str, str]] | None = None,
                  symmetric: bool = True) -> ControlOperator:
    """Cosine-profile coupling operator on a star with paired edges.

    For class ``l`` (edges ``e{2l-1}``, ``e{2l}``, length ``L_l``)::

        (B psi)^{2l-1} = -(B psi)^{2l}
            = L_l c_l(x) psi^{2l-1}(x) + sum_{n != l} k_{ln} c_l(x) psi^{2n-1}(L_n x / L_l)

    with ``c_l(x) = cos(pi x / (3 L_l))``. With ``symmetric=False`` every
    ``k_{ln} = L_l``, the literal unsymmetrized form; it is not
    symmetric unless all lengths agree. The default keeps ``k_{ln} = L_l`` for
    ``l < n`` and uses ``k_{ln} = L_n^2 / L_l`` for ``l > n``, the adjoint-
    consistent choice, leaving same-class couplings unchanged.
    """
    texts = [str(L) for L in lengths]
    lens = [parse_real(L) for L in lengths]
    graph = graph or star_graph(lens)
    pairs = pairs or [(f"e{2 * l + 1}", f"e{2 * l + 2}") for l in range(len(lens))]
    terms = []
    for l, (L, (e_plus, e_minus)) in enumerate(zip(lens, pairs)):
        freq = PI / (3 * L)
        for n, (Ln, (src, _)) in enumerate(zip(lens, pairs)):
            if n == l or not symmetric or l < n:
                kappa, ktext = L, texts[l]
            else:
                kappa, ktext = Ln ** 2 / L, f"({texts[n]})**2/({texts[l]})"
            prof = Profile.cosine(kappa, freq, f"{ktext}*cos(pi*x/(3*({texts[l]})))")
            scale = Ln / L
            terms.append(CouplingTerm(e_plus, src, prof, scale, 1))
            terms.append(CouplingTerm(e_minus, src, prof, scale, -1))
    return ControlOperator(tuple(terms), graph)


def operator_from_spec(spec: Sequence[dict], graph: MetricGraph) -> ControlOperator:
    """Build an operator from ``[[B.term]]`` tables.

    Each table has ``out_edge``, ``in_edge``, ``profile`` and optional
    ``scale`` (expression, default 1) and ``sign`` (default 1).
    """
    terms = []
    for i, t in enumerate(spec):
        try:
            terms.append(CouplingTerm(str(t["out_edge"]), str(t["in_edge"]),
                                      Profile.parse(str(t["profile"])),
                                      parse_real(t.get("scale", 1)), int(t.get("sign", 1))))
        except KeyError as exc:
            raise ExpressionError(f"B.term {i} is missing {exc.args[0]!r}") from None
    return ControlOperator(tuple(terms), graph)
