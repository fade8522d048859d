"""Control synthesis: moment problems, generators, Lie closure, rotations, pulses."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .signals import PiecewiseConstant, TrigSeries


def _as_matrix(Bmat) -> np.ndarray:
    return np.asarray(getattr(Bmat, "matrix", Bmat))


def _step_integrals(omega: np.ndarray, t0: np.ndarray, h: float) -> np.ndarray:
    """``int_{t0}^{t0+h} exp(i omega t) dt`` for all pairs (omega, t0)."""
    x = np.multiply.outer(omega, np.full_like(t0, h)) / 2
    return h * np.sinc(x / math.pi) * np.exp(1j * np.multiply.outer(omega, t0 + h / 2))


# Moment problem ---------------------------------------------------------------

class AssumptionViolation(ValueError):
    """A coupling required to be nonzero vanishes."""


@dataclass(frozen=True)
class MomentProblem:
    """Targets ``r_k = -i int_0^T u(t) exp(i w_k t) dt`` for a real ``u``.

    Attributes
    ----------
    frequencies : ndarray
        ``w_k = mu_k - mu_1``, strictly increasing with ``w_1 = 0``.
    targets : ndarray of complex
        ``r_k = x_k / B_k1``.
    T : float
        Horizon.
    enforce_reality : bool
        Require the zero-frequency target to be purely imaginary, which a real
        ``u`` can reach.
    """

    frequencies: np.ndarray
    targets: np.ndarray
    T: float
    enforce_reality: bool = True

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float).reshape(-1)
        r = np.asarray(self.targets, dtype=complex).reshape(-1)
        if w.size != r.size or w.size == 0:
            raise ValueError("frequencies and targets must have equal nonzero length")
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.enforce_reality:
            zero = np.abs(w) == 0
            bad = zero & (np.abs(r.real) > 1e-14 * max(1.0, float(np.abs(r).max())))
            if np.any(bad):
                raise ValueError("zero-frequency target must be purely imaginary for a real control")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "targets", r)
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_targets(cls, x, Bmat, mu, T: float, enforce_reality: bool = True,
                     tol: float = 1e-14) -> "MomentProblem":
        """Moment problem for the first-order target ``phi_1 + x``.

        Raises
        ------
        AssumptionViolation
            If some ``|B_k1| <= tol``.
        """
        x = np.asarray(x, dtype=complex).reshape(-1)
        B = _as_matrix(Bmat)
        N = x.size
        col = B[:N, 0]
        if np.any(np.abs(col) <= tol):
            k = int(np.argmin(np.abs(col))) + 1
            raise AssumptionViolation(f"B_{{{k},1}} vanishes; the moment problem is not solvable")
        mu = np.asarray(mu, dtype=float)[:N]
        return cls(mu - mu[0], x / col, T, enforce_reality)

    @property
    def N(self) -> int:
        return self.frequencies.size

    def minimum_samples(self) -> int:
        """Grid size required by the resolution rule."""
        wmax = float(self.frequencies.max())
        cycles = wmax * self.T / (2 * math.pi)
        return int(max(math.ceil(4 * self.N * cycles), math.ceil(8 * cycles), 2 * self.N))

    def constraint_matrix(self, n_samples: int) -> np.ndarray:
        """Complex ``N x n`` matrix of exact per-piece moments."""
        h = self.T / n_samples
        t0 = np.arange(n_samples) * h
        return -1j * _step_integrals(self.frequencies, t0, h)


def linearized_target(x, mu, T: float) -> np.ndarray:
    """``e^{-i mu_k T} (delta_k1 + x_k)``, the first-order reachable state."""
    x = np.asarray(x, dtype=complex)
    e1 = np.zeros_like(x)
    e1[0] = 1
    return np.exp(-1j * np.asarray(mu, dtype=float)[:x.size] * T) * (e1 + x)


def solve_moment_problem(mp: MomentProblem, n_samples: int | None = None,
                         ridge: float | None = None,
                         cond_max: float = 1e13) -> tuple[PiecewiseConstant, np.ndarray]:
    """Minimum-norm piecewise-constant solution of the moment problem.

    Unknowns are the real piece values on a uniform grid; each complex moment
    contributes a real and an imaginary row. With ``A`` the stacked matrix
    the solution is ``u = A^T (A A^T + lam I)^{-1} b``.

    Parameters
    ----------
    mp : MomentProblem
    n_samples : int, optional
        Grid size; defaults to :meth:`MomentProblem.minimum_samples`.
    ridge : float, optional
        ``lam``; defaults to ``1e-10 * ||A||_2^2``.
    cond_max : float
        Largest accepted condition number of ``A A^T + lam I``.

    Returns
    -------
    signal : PiecewiseConstant
    residuals : ndarray
        ``|moment_k(u) - r_k|`` per frequency.
    """
    n_min = mp.minimum_samples()
    n = n_min if n_samples is None else int(n_samples)
    if n < n_min:
        raise ValueError(f"n_samples={n} below the resolution requirement {n_min}")
    G = mp.constraint_matrix(n)
    A = np.vstack([G.real, G.imag])
    b = np.concatenate([mp.targets.real, mp.targets.imag])
    keep = np.linalg.norm(A, axis=1) > 0
    A, b = A[keep], b[keep]
    gram = A @ A.T
    lam = 1e-10 * float(np.linalg.norm(A, 2)) ** 2 if ridge is None else float(ridge)
    if lam < 0:
        raise ValueError("ridge must be nonnegative")
    system = gram + lam * np.eye(gram.shape[0])
    cond = np.linalg.cond(system)
    if not cond < cond_max:
        raise np.linalg.LinAlgError(
            f"moment system condition number {cond:.2e} exceeds {cond_max:.1e}; "
            "increase T or the ridge")
    coef = sla.solve(system, b, assume_a="pos")
    values = A.T @ coef
    signal = PiecewiseConstant.uniform(mp.T, values)
    residuals = np.abs(G @ values - mp.targets)
    return signal, residuals


def moments(u, frequencies) -> np.ndarray:
    """``-i int_0^T u(t) exp(i w t) dt`` by exact integration of ``u``'s form."""
    w = np.asarray(frequencies, dtype=float)
    if isinstance(u, PiecewiseConstant):
        out = np.empty(w.size, dtype=complex)
        b, v = u.breaks, u.values
        for i, om in enumerate(w):
            if om == 0:
                terms = -1j * v * np.diff(b)
            else:
                e = np.exp(1j * om * b)
                terms = -v * (e[1:] - e[:-1]) / om
            out[i] = complex(math.fsum(terms.real), math.fsum(terms.imag))
        return out
    if isinstance(u, TrigSeries):
        lam, c = u.exponential_form()
        nu = np.add.outer(w, lam)
        x = nu * u.T / 2
        integ = u.T * np.sinc(x / math.pi) * np.exp(1j * x)
        return -1j * (integ @ c)
    raise TypeError(f"unsupported signal type {type(u).__name__}")


def verify_moments(u, mp: MomentProblem) -> float:
    """Largest ``|moment_k(u) - r_k|`` from an independent exact integration."""
    return float(np.max(np.abs(moments(u, mp.frequencies) - mp.targets)))


# Generators and Lie closure ---------------------------------------------------

def generator_matrix(N: int, j: int, k: int, theta: float) -> np.ndarray:
    """``E^theta_{jk}``: ``e^{i theta}`` at ``(j, k)``, ``-e^{-i theta}`` at ``(k, j)`` (1-based)."""
    if j == k or not (1 <= j <= N and 1 <= k <= N):
        raise ValueError("need distinct indices in 1..N")
    E = np.zeros((N, N), dtype=complex)
    E[j - 1, k - 1] = np.exp(1j * theta)
    E[k - 1, j - 1] = -np.exp(-1j * theta)
    return E


@dataclass(frozen=True)
class GeneratorSet:
    """Admissible pairs ``(j, k)``, ``j < k``, 1-based."""

    N: int
    pairs: tuple[tuple[int, int], ...]

    def matrices(self) -> list[np.ndarray]:
        """``E^0_{jk}`` and ``E^{pi/2}_{jk}`` for each pair."""
        out = []
        for j, k in self.pairs:
            out.append(generator_matrix(self.N, j, k, 0.0))
            out.append(generator_matrix(self.N, j, k, math.pi / 2))
        return out


def admissible_generators(Bmat, mu, N: int | None = None, tol: float = 1e-12,
                          freq_tol: float | None = None) -> GeneratorSet:
    """Coupled pairs whose transition frequency no other coupled pair shares.

    Parameters
    ----------
    Bmat : CouplingMatrix or ndarray
    mu : array_like
    N : int, optional
    tol : float
        Couplings with ``|B_jk| <= tol`` count as zero.
    freq_tol : float, optional
        Frequencies closer than this count as equal; defaults to
        ``1e-9 * max|mu|``.
    """
    B = _as_matrix(Bmat)
    N = B.shape[0] if N is None else int(N)
    mu = np.asarray(mu, dtype=float)[:N]
    freq_tol = 1e-9 * float(np.max(np.abs(mu))) if freq_tol is None else freq_tol
    coupled = [(j, k) for j in range(N) for k in range(j + 1, N) if abs(B[j, k]) > tol]
    freqs = np.array([abs(mu[k] - mu[j]) for j, k in coupled])
    pairs = []
    for i, (j, k) in enumerate(coupled):
        clash = np.abs(freqs - freqs[i]) <= freq_tol
        if clash.sum() == 1:
            pairs.append((j + 1, k + 1))
    return GeneratorSet(N, tuple(pairs))


def _vec(X: np.ndarray) -> np.ndarray:
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def _unvec(v: np.ndarray, N: int) -> np.ndarray:
    return (v[:N * N] + 1j * v[N * N:]).reshape(N, N)


def lie_closure_rank(gens: "GeneratorSet | Iterable[np.ndarray]", N: int | None = None,
                     tol: float = 1e-9) -> int:
    """Dimension of the real Lie algebra generated by anti-Hermitian matrices.

    Generators are orthonormalized (Gram-Schmidt, twice) in the real inner
    product ``Re tr(X^H Y)``; brackets of basis elements are added until no
    new direction appears.
    """
    if isinstance(gens, GeneratorSet):
        N = gens.N
        mats = gens.matrices()
    else:
        mats = [np.asarray(g, dtype=complex) for g in gens]
        N = mats[0].shape[0] if mats else (N or 0)
    basis: list[np.ndarray] = []

    def add(X: np.ndarray) -> np.ndarray | None:
        v = _vec(X)
        scale = np.linalg.norm(v)
        if scale == 0:
            return None
        v = v / scale
        for _ in range(2):
            for q in basis:
                v = v - (q @ v) * q
        nv = np.linalg.norm(v)
        if nv <= tol:
            return None
        v = v / nv
        basis.append(v)
        return _unvec(v, N)

    frontier = [m for m in (add(X) for X in mats) if m is not None]
    while frontier:
        current = [_unvec(q, N) for q in basis]
        new = []
        for X in frontier:
            for Y in current:
                Z = add(X @ Y - Y @ X)
                if Z is not None:
                    new.append(Z)
                    current.append(Z)
        frontier = new
    return len(basis)


# Rotations --------------------------------------------------------------------

def rotation_matrix(N: int, j: int, k: int, theta: float, alpha: float) -> np.ndarray:
    """``exp(alpha E^theta_{jk})`` in closed form (1-based indices)."""
    R = np.eye(N, dtype=complex)
    c, s = math.cos(alpha), math.sin(alpha)
    a, b = j - 1, k - 1
    R[a, a] = c
    R[b, b] = c
    R[a, b] = np.exp(1j * theta) * s
    R[b, a] = -np.exp(-1j * theta) * s
    return R


@dataclass(frozen=True)
class RotationFactor:
    j: int
    k: int
    theta: float
    alpha: float

    def matrix(self, N: int) -> np.ndarray:
        return rotation_matrix(N, self.j, self.k, self.theta, self.alpha)


@dataclass(frozen=True)
class RotationPlan:
    """``target = F_1 F_2 ... F_p diag(residual)``."""

    N: int
    factors: tuple[RotationFactor, ...]
    residual: np.ndarray

    def unitary(self) -> np.ndarray:
        U = np.eye(self.N, dtype=complex)
        for f in self.factors:
            U = U @ f.matrix(self.N)
        return U @ np.diag(self.residual)

    def reconstruction_error(self, target) -> float:
        return float(np.max(np.abs(self.unitary() - np.asarray(target))))


def _wrap(theta: float) -> float:
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if t == -math.pi else t


def plan_rotations(target, tol: float = 1e-10) -> RotationPlan:
    """Factor a special-unitary matrix into planar rotations and a diagonal.

    Givens eliminations ``G_p ... G_1 U = D`` zero the sub-diagonal column by
    column; each ``G = exp(alpha E^theta)`` is inverted as
    ``exp(alpha E^(theta + pi))`` so that ``U = G_1^-1 ... G_p^-1 D``.

    Raises
    ------
    ValueError
        If ``target`` is not unitary with determinant 1 within ``tol``.
    """
    U = np.array(target, dtype=complex)
    N = U.shape[0]
    if U.shape != (N, N):
        raise ValueError("target must be square")
    if np.max(np.abs(U @ U.conj().T - np.eye(N))) > tol:
        raise ValueError("target is not unitary")
    if abs(np.linalg.det(U) - 1) > tol:
        raise ValueError("target determinant is not 1")
    W = U.copy()
    factors = []
    for c in range(N - 1):
        for r in range(N - 1, c, -1):
            if abs(W[r, c]) == 0:
                continue
            alpha = math.atan2(abs(W[r, c]), abs(W[c, c]))
            theta = float(np.angle(W[c, c]) - np.angle(W[r, c]))
            W = rotation_matrix(N, c + 1, r + 1, theta, alpha) @ W
            W[r, c] = 0
            factors.append(RotationFactor(c + 1, r + 1, _wrap(theta + math.pi), alpha))
    return RotationPlan(N, tuple(factors), np.diag(W).copy())


@dataclass(frozen=True)
class PhaseRealization:
    """Drift time matching a diagonal residual up to a global phase."""

    realized: bool
    time: float
    error: float


def realize_phase_residual(residual, mu, t_max: float, tol: float = 1e-6,
                           n_grid: int | None = None) -> PhaseRealization:
    """Search ``t`` in ``[0, t_max]`` with ``exp(-i mu_k t) ~ residual_k`` up to a global phase.

    The mismatch ``max_k |exp(-i (mu_k - mu_1) t) - d_k / d_1|`` is scanned on
    a grid and refined locally around the best candidates. The residual is
    reported as unrealized when the best mismatch exceeds ``tol``.
    """
    d = np.asarray(residual, dtype=complex)
    mu = np.asarray(mu, dtype=float)[:d.size]
    rel = d / d[0]
    nu = mu - mu[0]

    def mismatch(t):
        return float(np.max(np.abs(np.exp(-1j * nu * t) - rel)))

    if np.max(np.abs(rel - 1)) <= tol:
        return PhaseRealization(True, 0.0, float(np.max(np.abs(rel - 1))))
    wmax = float(np.max(np.abs(nu))) or 1.0
    n_grid = n_grid or int(min(2_000_000, max(1000, 20 * wmax * t_max / (2 * math.pi))))
    ts = np.linspace(0.0, t_max, n_grid)
    err = np.zeros(n_grid)
    for chunk in range(0, n_grid, 100_000):
        sl = slice(chunk, chunk + 100_000)
        err[sl] = np.max(np.abs(np.exp(-1j * np.multiply.outer(ts[sl], nu)) - rel), axis=1)
    best_t, best = 0.0, np.inf
    step = ts[1] - ts[0]
    for i in np.argsort(err)[:20]:
        res = minimize_scalar(mismatch, bounds=(max(0.0, ts[i] - step), min(t_max, ts[i] + step)),
                              method="bounded", options={"xatol": 1e-13})
        if res.fun < best:
            best, best_t = float(res.fun), float(res.x)
    return PhaseRealization(best <= tol, best_t, best)


# Resonant pulses --------------------------------------------------------------

def resonant_pulse(j: int, k: int, theta: float, alpha: float, A: float, Bjk: complex,
                   omega_jk: float, j_lower: bool = True) -> TrigSeries:
    """Rotating-wave pulse approximating ``exp(alpha E^theta_{jk})``.

    Returns ``u(t) = 2 A cos(omega_jk t + phase)`` on ``[0, T]`` with
    ``T = alpha / (A |B_jk|)``. Keeping only the co-rotating term, the
    interaction-picture generator on levels ``(j, k)`` is
    ``-i A B_jk e^{+-i phase}`` off the diagonal; the phase is chosen so
    this equals ``alpha/T * E^theta_{jk}``.

    Parameters
    ----------
    j, k : int
        Levels (1-based); only used for validation.
    theta, alpha : float
        Target rotation ``exp(alpha E^theta_{jk})``.
    A : float
        Amplitude parameter (the pulse has sup norm ``2A``).
    Bjk : complex
        Coupling ``<phi_j, B phi_k>``.
    omega_jk : float
        ``|mu_j - mu_k|``.
    j_lower : bool
        Whether ``mu_j < mu_k``.
    """
    if j == k:
        raise ValueError("need two distinct levels")
    if not omega_jk > 0:
        raise ValueError("transition frequency must be positive")
    if abs(Bjk) == 0:
        raise ValueError("coupling B_jk vanishes")
    if not A > 0:
        raise ValueError("amplitude must be positive")
    if alpha < 0:
        raise ValueError("rotation angle must be nonnegative")
    beta = float(np.angle(Bjk))
    phase = theta + math.pi / 2 - beta if j_lower else beta - theta - math.pi / 2
    T = alpha / (A * abs(Bjk))
    return TrigSeries.cosine(2 * A, omega_jk, _wrap(phase), T)
