"""Moment problems, Lie closure, rotation factorization and resonant pulses."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.stats import unitary_group

import oracles
from qgc import (GeneratorSet, MomentProblem, PiecewiseConstant, TrigSeries,
                 admissible_generators, assemble_matrix, evolve, lie_closure_rank,
                 plan_rotations, resonant_pulse, solve_moment_problem, tadpole_basis,
                 tadpole_operator, verify_moments)
from qgc.synthesis import (AssumptionViolation, generator_matrix, moments,
                           realize_phase_residual, rotation_matrix)

MOMENT_ATOL = 1e-14
# The ridge leaves residuals proportional to the target size.
RESIDUAL_RTOL = 1e-9
ROTATION_TOL = 1e-12
RWA_BUDGET = 9 * math.pi ** 3 / 4


@pytest.fixture(scope="module")
def tadpole():
    basis = tadpole_basis(6)
    return basis.eigenvalues, assemble_matrix(tadpole_operator(basis.graph), basis).matrix


def _targets(rng, mu, M, scale=0.01):
    x = np.zeros(mu.size, dtype=complex)
    x[1:] = scale * (rng.normal(size=mu.size - 1) + 1j * rng.normal(size=mu.size - 1))
    x[0] = 1j * scale * rng.normal()
    return x


def test_piecewise_moments_vs_mpmath(tadpole):
    mu, M = tadpole
    rng = np.random.default_rng(0)
    u = PiecewiseConstant(np.sort(np.concatenate([[0.0], rng.uniform(0, 1, 30), [1.0]])),
                          rng.uniform(-1, 1, 31))
    w = mu - mu[0]
    ref = oracles.piecewise_moments(u.breaks, u.values, w)
    np.testing.assert_allclose(moments(u, w), ref, rtol=0, atol=MOMENT_ATOL)


def test_trig_moments_vs_scipy_quad():
    u = TrigSeries(1.3, 0.2, [3.0, 40.0], [0.5, -0.1], [0.25, 0.3])
    for w in (0.0, 2.5, 40.0, 118.4):
        re = quad(lambda t: float(u(t)) * math.cos(w * t), 0, u.T, limit=400, epsabs=1e-14)[0]
        im = quad(lambda t: float(u(t)) * math.sin(w * t), 0, u.T, limit=400, epsabs=1e-14)[0]
        assert moments(u, [w])[0] == pytest.approx(-1j * (re + 1j * im), abs=1e-12)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10 ** 6), st.floats(0.5, 2.0))
def test_moment_solution_consistent(seed, T):
    basis = tadpole_basis(5)
    mu = basis.eigenvalues
    M = assemble_matrix(tadpole_operator(basis.graph), basis).matrix
    mp = MomentProblem.from_targets(_targets(np.random.default_rng(seed), mu, M), M, mu, T)
    u, res = solve_moment_problem(mp)
    scale = float(np.abs(mp.targets).max())
    assert res.max() <= RESIDUAL_RTOL * scale
    assert verify_moments(u, mp) <= RESIDUAL_RTOL * scale
    ref = oracles.piecewise_moments(u.breaks, u.values, mp.frequencies)
    np.testing.assert_allclose(moments(u, mp.frequencies), ref, rtol=0,
                               atol=MOMENT_ATOL * max(1.0, np.abs(ref).max()))


def test_minimum_samples(tadpole):
    mu, M = tadpole
    mp = MomentProblem.from_targets(_targets(np.random.default_rng(1), mu, M), M, mu, 1.0)
    cycles = (mu[-1] - mu[0]) / (2 * math.pi)
    assert mp.minimum_samples() == math.ceil(4 * mu.size * cycles)
    with pytest.raises(ValueError, match="resolution"):
        solve_moment_problem(mp, n_samples=mp.minimum_samples() - 1)


def test_vanishing_coupling_rejected(tadpole):
    mu, M = tadpole
    B = M.copy()
    B[3, 0] = B[0, 3] = 0.0
    with pytest.raises(AssumptionViolation):
        MomentProblem.from_targets(np.full(6, 0.01j), B, mu, 1.0)


def test_reality_condition(tadpole):
    mu, M = tadpole
    x = np.full(6, 0.01 + 0j)
    x[0] = 0.01 * M[0, 0]
    with pytest.raises(ValueError, match="purely imaginary"):
        MomentProblem.from_targets(x, M, mu, 1.0)
    MomentProblem.from_targets(x, M, mu, 1.0, enforce_reality=False)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_full_rank_fully_coupled(n):
    pairs = tuple((a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1))
    assert lie_closure_rank(GeneratorSet(n, pairs)) == n * n - 1


def test_chain_pairs_generate_su():
    assert lie_closure_rank(GeneratorSet(5, ((1, 2), (2, 3), (3, 4), (4, 5)))) == 24
    assert lie_closure_rank(GeneratorSet(3, ((1, 2),))) == 3
    assert lie_closure_rank(GeneratorSet(4, ((1, 2), (3, 4)))) == 6


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)).filter(lambda p: p[0] < p[1]),
                min_size=1, max_size=6, unique=True), st.data())
def test_rank_monotone(pairs, data):
    extra = data.draw(st.tuples(st.integers(1, 4), st.integers(1, 4)).filter(lambda p: p[0] < p[1]))
    small = lie_closure_rank(GeneratorSet(4, tuple(pairs)))
    big = lie_closure_rank(GeneratorSet(4, tuple(set(pairs) | {extra})))
    assert small <= big <= 15


def test_admissible_generators_exclude_shared_frequencies():
    basis = tadpole_basis(8)
    mu = basis.eigenvalues
    M = assemble_matrix(tadpole_operator(basis.graph), basis).matrix
    pairs = set(admissible_generators(M, mu).pairs)
    # 7^2 - 1^2 = 8^2 - 4^2 = 48
    assert (1, 7) not in pairs and (4, 8) not in pairs
    assert (1, 2) in pairs
    assert lie_closure_rank(admissible_generators(M, mu)) == 63


def test_rotation_matrix_vs_expm():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        j, k = rng.choice(np.arange(1, n + 1), 2, replace=False)
        theta, alpha = rng.uniform(-math.pi, math.pi), rng.uniform(-4, 4)
        np.testing.assert_allclose(rotation_matrix(n, j, k, theta, alpha),
                                   oracles.expm_rotation(n, j, k, theta, alpha),
                                   atol=ROTATION_TOL)
    with pytest.raises(ValueError):
        generator_matrix(3, 2, 2, 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10 ** 6))
def test_plan_reconstruction(n, seed):
    U = unitary_group.rvs(n, random_state=np.random.default_rng(seed))
    U = U / np.linalg.det(U) ** (1 / n)
    plan = plan_rotations(U)
    assert plan.reconstruction_error(U) <= ROTATION_TOL
    assert len(plan.factors) <= n * (n - 1) // 2
    assert abs(np.prod(plan.residual) - 1) <= ROTATION_TOL
    R = np.eye(n, dtype=complex)
    for f in plan.factors:
        R = R @ oracles.expm_rotation(n, f.j, f.k, f.theta, f.alpha)
    np.testing.assert_allclose(R @ np.diag(plan.residual), U, atol=ROTATION_TOL)


def test_plan_rejects_non_su():
    with pytest.raises(ValueError, match="unitary"):
        plan_rotations(np.ones((2, 2)))
    with pytest.raises(ValueError, match="determinant"):
        plan_rotations(np.diag([1j, 1.0]))


def test_phase_residual_realization():
    mu = np.array([1.0, 3.0, 7.0])
    t = 0.37
    hit = realize_phase_residual(np.exp(-1j * mu * t) * np.exp(0.4j), mu, t_max=2.0)
    assert hit.realized and hit.time == pytest.approx(t, abs=1e-8)


def test_resonant_pulse_budget(tadpole):
    mu, M = tadpole
    budgets = [resonant_pulse(1, 2, 0.0, math.pi / 2, A, M[0, 1], mu[1] - mu[0]).budget().t_linf
               for A in (0.04, 0.02, 0.01)]
    np.testing.assert_allclose(budgets, RWA_BUDGET, rtol=1e-12)
    assert oracles.rwa_t_linf(M[0, 1]) == pytest.approx(RWA_BUDGET, rel=1e-12)
    with pytest.raises(ValueError):
        resonant_pulse(1, 1, 0.0, 1.0, 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        resonant_pulse(1, 2, 0.0, 1.0, 0.1, 0.0, 1.0)


@pytest.mark.parametrize("theta, alpha", [(0.0, math.pi / 2), (0.7, 0.9), (-2.0, 0.3)])
def test_resonant_pulse_realizes_rotation(tadpole, theta, alpha):
    mu, M = tadpole
    mu2, B2 = mu[:2], M[:2, :2]
    omega = mu2[1] - mu2[0]
    u = resonant_pulse(1, 2, theta, alpha, 0.02, B2[0, 1], omega)
    final = evolve(np.array([1, 0], dtype=complex), u, mu2, B2, 2 * math.pi / omega / 20,
                   method="magnus",
                   record_every=10 ** 9).final.coefficients
    # Interaction picture, relative phase only.
    a = np.exp(1j * mu2 * u.T) * final
    target = rotation_matrix(2, 1, 2, theta, alpha)[:, 0]
    overlap = abs(np.vdot(target, a))
    assert overlap == pytest.approx(1.0, abs=1e-3)
