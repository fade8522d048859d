"""Control-operator profiles and matrix assembly against 30-digit quadrature."""
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

import oracles
from qgc import (HermiticityError, Profile, ResonantLengthsError, assemble_matrix,
                 matrix_element, star_coupling_oracle, star_operator, star_pair_basis,
                 tadpole_basis, tadpole_coupling_oracle, tadpole_operator)
from qgc._expr import ExpressionError
from qgc.operator import (ControlOperator, CouplingTerm, star_diagonal_oracle,
                          star_same_class_element, tadpole_element)
from qgc.graph import GraphError

ELEMENT_ATOL = 1e-15
ELEMENT_RTOL = 1e-12
STAR_LENGTHS = ("cbrt(2)", "cbrt(5)")
HERMITICITY_TOL = 1e-13
# Measured stated/true ratio of the star diagonal formula, equal to L/2.
STATED_OVER_TRUE = {"cbrt(2)": 0.629960524947437, "cbrt(5)": 0.854987973338348}


@pytest.fixture(scope="module")
def tadpole():
    basis = tadpole_basis(12)
    return basis, assemble_matrix(tadpole_operator(basis.graph), basis).matrix


@pytest.fixture(scope="module")
def star():
    basis = star_pair_basis(STAR_LENGTHS, 8)
    return basis, assemble_matrix(star_operator(STAR_LENGTHS, basis.graph), basis).matrix


def test_closed_form_matches_quadrature_oracle():
    for k in range(2, 12):
        assert oracles.tadpole_closed_form(k) == pytest.approx(
            oracles.tadpole_element(k, 1), rel=1e-14)
        assert tadpole_coupling_oracle(k) == pytest.approx(oracles.tadpole_closed_form(k),
                                                           rel=1e-15)


def test_tadpole_matrix_vs_mpmath(tadpole):
    basis, M = tadpole
    n = len(basis)
    ref = np.array([[oracles.tadpole_element(min(j, k), max(j, k)) for k in range(1, n + 1)]
                    for j in range(1, n + 1)])
    np.testing.assert_allclose(M, ref, rtol=ELEMENT_RTOL, atol=ELEMENT_ATOL)
    exact = np.array([[tadpole_element(j, k) for k in range(1, n + 1)] for j in range(1, n + 1)])
    np.testing.assert_allclose(exact, ref, rtol=ELEMENT_RTOL, atol=ELEMENT_ATOL)
    assert M[1, 0] == pytest.approx(-4 / (9 * np.pi ** 2), rel=1e-14)


def test_single_element_matches_assembly(tadpole):
    basis, M = tadpole
    B = tadpole_operator(basis.graph)
    assert matrix_element(B, basis.mode(3), basis.mode(7)) == pytest.approx(M[2, 6], abs=1e-16)


def test_star_elements_vs_mpmath(star):
    basis, M = star
    lens = basis.params["lengths"]
    for a in basis.modes:
        for b in basis.modes:
            La, Lb = lens[a.length_class - 1], lens[b.length_class - 1]
            if a.length_class == b.length_class:
                ref = oracles.star_same_class(a.mode_number, b.mode_number, La)
                assert star_same_class_element(a.mode_number, b.mode_number, La) == \
                    pytest.approx(ref, rel=ELEMENT_RTOL, abs=ELEMENT_ATOL)
            else:
                kappa = La if a.length_class < b.length_class else Lb ** 2 / La
                ref = oracles.star_cross_class(a.mode_number, La, b.mode_number, Lb, kappa)
            assert M[a.index - 1, b.index - 1] == pytest.approx(
                ref, rel=ELEMENT_RTOL, abs=ELEMENT_ATOL)


def test_star_stated_diagonal_ratio(star):
    basis, M = star
    for mode in basis.modes:
        text = STAR_LENGTHS[mode.length_class - 1]
        ratio = star_diagonal_oracle(mode.mode_number, text) / M[mode.index - 1, mode.index - 1]
        assert ratio == pytest.approx(STATED_OVER_TRUE[text], rel=1e-12)
        L = float(basis.params["lengths"][mode.length_class - 1])
        assert ratio == pytest.approx(L / 2, rel=1e-12)


def test_star_coupling_lower_bound_expression():
    # At L = 2^(1/3) the stated constant 2^(5/3) equals 2 L^2.
    for m in range(1, 6):
        assert star_coupling_oracle(m) == pytest.approx(
            star_coupling_oracle(m, L="cbrt(2)"), rel=1e-15)
    with pytest.raises(ValueError):
        star_coupling_oracle(2, same_class=False)


def test_literal_star_operator_not_hermitian():
    basis = star_pair_basis(STAR_LENGTHS, 6)
    with pytest.raises(HermiticityError):
        assemble_matrix(star_operator(STAR_LENGTHS, basis.graph, symmetric=False), basis)
    raw = assemble_matrix(star_operator(STAR_LENGTHS, basis.graph, symmetric=False), basis,
                          raw=True)
    assert raw.hermiticity_defect > 1e-3


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 1.0), st.floats(1.1, 2.0))
def test_symmetric_star_hermitian_property(L1, L2):
    try:
        basis = star_pair_basis((L1, L2), 5)
    except ResonantLengthsError:
        assume(False)
    cm = assemble_matrix(star_operator((L1, L2), basis.graph), basis)
    assert cm.hermiticity_defect <= HERMITICITY_TOL
    np.testing.assert_array_equal(cm.matrix, cm.matrix.T)


def test_profile_parse():
    p = Profile.parse("x*(1-x)")
    assert p.harmonic is None
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(p.evaluate(x).astype(float), x * (1 - x), atol=1e-18)
    np.testing.assert_allclose(p.derivative(x).astype(float), 1 - 2 * x, atol=1e-18)
    q = Profile.parse("cbrt(2)*cos(pi*x/(3*cbrt(2)))")
    assert q.harmonic == "cos"
    assert float(q.freq) == pytest.approx(np.pi / (3 * 2 ** (1 / 3)), rel=1e-15)
    assert float(q.evaluate(0.0)) == pytest.approx(2 ** (1 / 3), rel=1e-15)


@pytest.mark.parametrize("text", ["cos(x)*sin(x)", "cos(x**2)", "exp(x)", "1/x"])
def test_profile_rejects(text):
    with pytest.raises(ExpressionError):
        Profile.parse(text)


def test_operator_validation():
    basis = tadpole_basis(3)
    prof = Profile.parse("1")
    with pytest.raises(GraphError):
        ControlOperator((CouplingTerm("e1", "zz", prof),), basis.graph)
    with pytest.raises(GraphError):
        ControlOperator((CouplingTerm("e1", "e2", prof),), basis.graph)
    with pytest.raises(ValueError):
        ControlOperator((CouplingTerm("e1", "e1", prof, sign=2),), basis.graph)
    with pytest.raises(GraphError):
        ControlOperator((CouplingTerm("e1", "e1", prof, scale=2),), basis.graph)


def test_identity_profile_gives_identity(tadpole):
    basis, _ = tadpole
    op = ControlOperator((CouplingTerm("e1", "e1", Profile.parse("1")),), basis.graph)
    np.testing.assert_allclose(assemble_matrix(op, basis).matrix, np.eye(len(basis)),
                               atol=1e-15)
