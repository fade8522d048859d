"""Explicit eigenbases: eigenvalues, orthonormality and vertex conditions."""
import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgc import (QuantumState, ResonantLengthsError, hs_norm, star_pair_basis, tadpole_basis,
                 uniform_chain_basis)
from qgc.basis import BOUNDARY_TOL

EIG_RTOL = 1e-15
GRAM_TOL = 1e-13
STAR_LENGTHS = ("cbrt(2)", "cbrt(5)")


def test_tadpole_eigenvalues():
    mu = tadpole_basis(50).eigenvalues
    k = np.arange(1, 51)
    np.testing.assert_allclose(mu, 4 * k ** 2 * np.pi ** 2, rtol=EIG_RTOL)


def test_tadpole_gaps_increase():
    gaps = np.diff(tadpole_basis(200).eigenvalues)
    assert np.all(np.diff(gaps) > 0)
    assert gaps[0] == pytest.approx(12 * np.pi ** 2, rel=EIG_RTOL)


@pytest.mark.parametrize("factory", [
    lambda: tadpole_basis(12),
    lambda: star_pair_basis(STAR_LENGTHS, 8),
    lambda: uniform_chain_basis(1, "I1", 8),
    lambda: uniform_chain_basis("sqrt(2)", "I2", 8, n_edges=3),
    lambda: uniform_chain_basis(1, "I3", 8, n_edges=4),
])
def test_orthonormal_and_vertex_conditions(factory):
    basis = factory()
    np.testing.assert_allclose(basis.gram_matrix(), np.eye(len(basis)), atol=GRAM_TOL)
    worst = max(r["residual"] for r in basis.boundary_residuals())
    assert worst <= BOUNDARY_TOL


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40))
def test_tadpole_gram_property(n):
    np.testing.assert_allclose(tadpole_basis(n).gram_matrix(), np.eye(n), atol=GRAM_TOL)


def test_star_merge_order_and_classes():
    basis = star_pair_basis(STAR_LENGTHS, 10)
    mu = basis.eigenvalues
    assert np.all(np.diff(mu) > 0)
    assert {m.length_class for m in basis.modes} == {1, 2}
    L1, L2 = basis.params["lengths"]
    for m in basis.modes:
        L = (L1, L2)[m.length_class - 1]
        assert m.eigenvalue == pytest.approx(float((m.mode_number * np.pi / L) ** 2), rel=EIG_RTOL)


def test_star_equal_lengths_rejected():
    with pytest.raises(ResonantLengthsError):
        star_pair_basis(("1", "1"), 3)
    with pytest.raises(ResonantLengthsError):
        star_pair_basis(("1", "2"), 3)


@pytest.mark.parametrize("cls, q", [("I1", lambda k: (2 * k - 1) / 2),
                                    ("I2", lambda k: k),
                                    ("I3", lambda k: 2 * k - 1)])
def test_chain_eigenvalues(cls, q):
    L = 1.5
    basis = uniform_chain_basis(L, cls, 6)
    k = np.arange(1, 7)
    np.testing.assert_allclose(basis.eigenvalues, (q(k) * np.pi / L) ** 2, rtol=EIG_RTOL)
    assert basis.family == f"uniform_chain_{cls}"


def test_chain_rejections():
    with pytest.raises(ValueError, match="even"):
        uniform_chain_basis(1, "I3", 3, n_edges=3)
    with pytest.raises(ValueError, match="exactly two"):
        uniform_chain_basis(1, "I1", 3, n_edges=3)
    with pytest.raises(ValueError, match="unsupported"):
        uniform_chain_basis(1, "I4", 3)


def test_hs_norm():
    c = np.array([1.0, 1j, 0.5])
    expected = np.sqrt(1 + 2 ** 6 + 0.25 * 3 ** 6)
    assert hs_norm(c, 3) == pytest.approx(expected, rel=1e-15)
    assert QuantumState(c).hs_norm(0) == pytest.approx(np.linalg.norm(c), rel=1e-15)


def test_basis_state_and_truncate():
    basis = tadpole_basis(6)
    s = QuantumState.basis_state(3, 6, basis)
    assert s.norm() == 1 and s.coefficients[2] == 1
    assert len(basis.truncate(4)) == 4
    with pytest.raises(IndexError):
        QuantumState.basis_state(7, 6)
    with pytest.raises(ValueError):
        basis.truncate(0)


def test_basis_csv(tmp_path):
    path = tmp_path / "basis.csv"
    tadpole_basis(3).to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0][:2] == ["k", "mu_k"]
    assert float(rows[1][1]) == pytest.approx(4 * np.pi ** 2, rel=EIG_RTOL)
