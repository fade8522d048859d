"""Galerkin propagation of ``i d/dt psi = (diag(mu) + u(t) B) psi``."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import get_backend
from .basis import QuantumState, SpectralBasis, hs_norm
from .signals import ControlSignal, PiecewiseConstant, TrigSeries

SAMPLES_PER_PERIOD = 20


class NonContractionError(RuntimeError):
    """Picard iterates do not contract; subdivide the time interval."""


def _coeffs(psi) -> np.ndarray:
    c = psi.coefficients if isinstance(psi, QuantumState) else psi
    return np.asarray(c, dtype=complex).reshape(-1)


def _check_normalized(c: np.ndarray, tol: float = 1e-10) -> None:
    if abs(np.linalg.norm(c) - 1) > tol:
        warnings.warn(f"initial state has norm {np.linalg.norm(c):.12g}, not 1", stacklevel=3)


def _matrix(Bmat, N: int) -> np.ndarray:
    B = np.asarray(getattr(Bmat, "matrix", Bmat), dtype=complex)
    if B.shape[0] < N:
        raise ValueError("coupling matrix is smaller than the state")
    return np.ascontiguousarray(B[:N, :N])


@dataclass(frozen=True)
class Trajectory:
    """States at recorded times, with norm diagnostics."""

    times: np.ndarray
    states: np.ndarray
    hs_orders: tuple = (3.0,)
    basis: SpectralBasis | None = None

    @property
    def final(self) -> QuantumState:
        return QuantumState(self.states[-1], self.basis)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norms - self.norms[0])))

    def hs_norms(self, s: float) -> np.ndarray:
        k = np.arange(1, self.states.shape[1] + 1, dtype=float)
        return np.linalg.norm(self.states * k ** s, axis=1)

    def hs_growth(self, s: float = 3.0) -> float:
        """``max_t ||psi(t)||_(s) / ||psi(0)||_(s)``."""
        h = self.hs_norms(s)
        return float(h.max() / h[0])

    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def to_csv(self, path, target=None, target_name: str = "target") -> None:
        """Rows ``t, re c_k, im c_k, norm, hs_s`` and an optional fidelity summary row."""
        N = self.states.shape[1]
        hs = {s: self.hs_norms(s) for s in self.hs_orders}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t"]
            for k in range(1, N + 1):
                head += [f"re_c{k}", f"im_c{k}"]
            head += ["norm"] + [f"hs_{s:g}" for s in self.hs_orders]
            w.writerow(head)
            norms = self.norms
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for c in self.states[i]:
                    row += [repr(float(c.real)), repr(float(c.imag))]
                row += [repr(float(norms[i]))] + [repr(float(hs[s][i])) for s in self.hs_orders]
                w.writerow(row)
            if target is not None:
                w.writerow([f"# fidelity_to_{target_name}", repr(fidelity(self.final, target))])


def _record_steps(nsteps: int, every: int) -> np.ndarray:
    every = max(1, int(every))
    steps = list(range(every, nsteps + 1, every))
    if not steps or steps[-1] != nsteps:
        steps.append(nsteps)
    return np.asarray(steps, dtype=np.int64)


def evolve(psi0, u: ControlSignal | None, mu, Bmat, dt_max: float, *, method: str = "midpoint",
           record_every: int = 1, hs_orders=(3.0,), backend: str | None = None,
           T: float | None = None) -> Trajectory:
    """Propagate ``psi0`` under the control ``u``.

    Parameters
    ----------
    psi0 : QuantumState or array_like
        Initial coefficients; a non-normalized state triggers a warning.
    u : ControlSignal or None
        ``None`` means free drift over ``[0, T]``.
    mu : array_like
        Eigenvalues ``mu_k``.
    Bmat : CouplingMatrix or ndarray
    dt_max : float
        Largest step. Trigonometric signals require
        ``dt_max <= (shortest period) / 20``.
    method : {"midpoint", "magnus"}
        ``"midpoint"`` samples ``u`` at step midpoints and applies the exact
        exponential of ``diag(mu) + u B``. ``"magnus"`` (trigonometric signals
        only) works in the interaction picture and integrates
        ``u(t) exp(i (mu_j - mu_k) t)`` exactly over each step, removing the
        sampling error of fast drift phases. Piecewise-constant signals are
        always propagated exactly piece by piece.
    record_every : int
        Store every ``record_every``-th step (the final state is always stored).
    hs_orders : sequence of float
        Orders of the tracked ``H^s`` norms.
    backend : {"cython", "python"}, optional
    T : float, optional
        Horizon for free drift.

    Returns
    -------
    Trajectory
    """
    if not dt_max > 0:
        raise ValueError("dt_max must be positive")
    c0 = _coeffs(psi0)
    _check_normalized(c0)
    N = c0.size
    mu = np.ascontiguousarray(np.asarray(mu, dtype=float)[:N])
    B = _matrix(Bmat, N)
    kern = get_backend(backend)
    basis = psi0.basis if isinstance(psi0, QuantumState) else None

    if u is None:
        if T is None:
            raise ValueError("free drift needs a horizon T")
        u = PiecewiseConstant([0.0, float(T)], [0.0])
    if isinstance(u, PiecewiseConstant):
        lengths = np.diff(u.breaks)
        nsub = np.maximum(1, np.ceil(lengths / dt_max - 1e-12).astype(np.int64))
        dts = np.repeat(lengths / nsub, nsub)
        us = np.repeat(u.values, nsub)
        rec = _record_steps(dts.size, record_every)
        states = kern.propagate_lab(mu, B, us, dts, c0, rec)
        times = np.concatenate([[0.0], np.cumsum(dts)[rec - 1]])
        times[-1] = u.horizon
    elif isinstance(u, TrigSeries) or callable(u):
        horizon = u.horizon
        wmax = getattr(u, "max_frequency", 0.0)
        if wmax > 0 and dt_max > 2 * math.pi / wmax / SAMPLES_PER_PERIOD * (1 + 1e-12):
            raise ValueError(
                f"dt_max={dt_max:g} exceeds 1/{SAMPLES_PER_PERIOD} of the shortest signal "
                f"period {2 * math.pi / wmax:g}")
        n = max(1, int(math.ceil(horizon / dt_max - 1e-12)))
        h = horizon / n
        rec = _record_steps(n, record_every)
        if horizon == 0:
            states = np.empty((0, N), dtype=complex)
            rec = np.empty(0, dtype=np.int64)
        elif method == "midpoint":
            us = np.ascontiguousarray(u((np.arange(n) + 0.5) * h), dtype=float)
            states = kern.propagate_lab(mu, B, us, np.full(n, h), c0, rec)
        elif method == "magnus":
            if not isinstance(u, TrigSeries):
                raise ValueError("the magnus method needs a trigonometric signal")
            lam, coef = u.exponential_form()
            a = kern.propagate_magnus(mu, B, np.ascontiguousarray(lam), np.ascontiguousarray(coef),
                                      h, n, c0, rec)
            states = a * np.exp(-1j * np.outer(rec * h, mu))
        else:
            raise ValueError(f"unknown method {method!r}")
        times = np.concatenate([[0.0], rec * h])
    else:
        raise TypeError(f"unsupported control type {type(u).__name__}")
    states = np.vstack([c0[None], states])
    return Trajectory(times, states, tuple(float(s) for s in hs_orders), basis)


def _linear_weights(nu: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``w0 = int_0^h e^{i nu s}(1 - s/h) ds`` and ``w1 = int_0^h e^{i nu s} s/h ds``."""
    z = 1j * nu * h
    small = np.abs(z) < 0.5
    w0 = np.empty(nu.shape, dtype=complex)
    w1 = np.empty(nu.shape, dtype=complex)
    zs = z[small]
    s0 = np.zeros_like(zs)
    s1 = np.zeros_like(zs)
    term = np.ones_like(zs)
    for n in range(18):
        if n:
            term = term * zs / n
        s0 += term / ((n + 1) * (n + 2))
        s1 += term / (n + 2)
    w0[small], w1[small] = h * s0, h * s1
    zl = z[~small]
    e = np.exp(zl)
    w1[~small] = h * (e / zl - (e - 1) / zl ** 2)
    w0[~small] = h * ((e - 1) / zl) - w1[~small]
    return w0, w1


def _duhamel_grid(u, t0: float, t1: float, h_target: float):
    """Nodes on ``[t0, t1]`` aligned with the breakpoints of a piecewise-constant ``u``.

    Returns the nodes, one-sided control values at the left and right end of
    every panel, and ``(slice, h)`` groups of panels with equal width.
    """
    cuts = [t0, t1]
    if isinstance(u, PiecewiseConstant):
        cuts += [b for b in u.breaks if t0 < b < t1]
    cuts = np.unique(np.asarray(cuts, dtype=float))
    nodes, uL, uR, groups = [np.array([t0])], [], [], []
    start = 0
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil((b - a) / h_target - 1e-9)))
        s = np.linspace(a, b, n + 1)
        nodes.append(s[1:])
        if u is None:
            left = right = np.zeros(n)
        elif isinstance(u, PiecewiseConstant):
            left = right = np.full(n, float(u(np.array([(a + b) / 2]))[0]))
        else:
            vals = np.asarray(u(s), dtype=float)
            left, right = vals[:-1], vals[1:]
        uL.append(left)
        uR.append(right)
        groups.append((slice(start, start + n), (b - a) / n))
        start += n
    return np.concatenate(nodes), np.concatenate(uL), np.concatenate(uR), groups


def duhamel_picard(psi0, u: ControlSignal | None, mu, Bmat, T: float, n_iter: int = 200,
                   n_quad: int | None = None, tol: float = 1e-14, n_sub: int = 1,
                   return_info: bool = False):
    """Fixed point of the mild formulation by Picard iteration.

    In the interaction variable ``a(t) = e^{i A t} psi(t)`` the mild formula
    reads ``a(t) = a(t0) - i int_{t0}^t u(s) e^{iAs} B e^{-iAs} a(s) ds``. The
    integral is evaluated with the trapezoidal rule applied to ``u a`` while
    the factors ``e^{i (mu_j - mu_k) s}`` are integrated exactly against the
    linear interpolant (product trapezoid). Panels never straddle a jump of a
    piecewise-constant control. ``[0, T]`` may be split into
    ``n_sub`` pieces, each iterated to convergence before the next.

    Parameters
    ----------
    psi0 : QuantumState or array_like
    u : ControlSignal or None
    mu, Bmat : array_like
    T : float
    n_iter : int
        Iteration cap per piece.
    n_quad : int, optional
        Grid intervals over ``[0, T]``; defaults to a spacing of
        ``0.05 / max(frequency)`` with at least 2000 intervals.
    tol : float
        Stop when the sup-norm increment falls below ``tol``.
    n_sub : int
        Number of subintervals.
    return_info : bool
        Also return a dict with iteration counts, increments and the
        contraction estimate ``||u||_{L2(piece)} ||B||_2 sqrt(|piece|)``.

    Raises
    ------
    NonContractionError
        If the increments grow or the cap is reached.
    """
    c0 = _coeffs(psi0)
    N = c0.size
    mu = np.asarray(mu, dtype=float)[:N]
    B = _matrix(Bmat, N)
    nu = mu[:, None] - mu[None, :]
    wmax = max(float(np.max(np.abs(nu))), getattr(u, "max_frequency", 0.0) if u else 0.0)
    if n_quad is None:
        n_quad = max(2000, int(math.ceil(T * wmax / 0.05)))
    h_target = T / n_quad
    norm_B = float(np.linalg.norm(B, 2))
    a_start = c0.copy()
    info = {"iterations": [], "increments": [], "contraction": []}
    edges = np.linspace(0.0, T, n_sub + 1)
    for t0, t1 in zip(edges[:-1], edges[1:]):
        nodes, uL, uR, groups = _duhamel_grid(u, t0, t1, h_target)
        h = np.diff(nodes)
        u_l2 = math.sqrt(float(np.sum((uL ** 2 + uR ** 2) / 2 * h)))
        info["contraction"].append(u_l2 * norm_B * math.sqrt(t1 - t0))
        weights = []
        for sl, hs in groups:
            w0, w1 = _linear_weights(nu, hs)
            weights.append((sl, (B * w0).T, (B * w1).T))
        e_minus = np.exp(-1j * np.outer(nodes[:-1], mu))
        e_plus = np.exp(1j * np.outer(nodes[:-1], mu))
        a = np.tile(a_start, (nodes.size, 1))
        contrib = np.empty((nodes.size - 1, N), dtype=complex)
        incs = []
        for it in range(1, n_iter + 1):
            f0 = uL[:, None] * a[:-1] * e_minus
            f1 = uR[:, None] * a[1:] * e_minus
            for sl, Bw0, Bw1 in weights:
                contrib[sl] = f0[sl] @ Bw0 + f1[sl] @ Bw1
            new = np.empty_like(a)
            new[0] = a_start
            new[1:] = a_start - 1j * np.cumsum(e_plus * contrib, axis=0)
            inc = float(np.max(np.abs(new - a)))
            a = new
            incs.append(inc)
            if inc <= tol:
                break
            if len(incs) >= 4 and incs[-1] > incs[-2] > incs[-3] > incs[-4] or inc > 1e3:
                raise NonContractionError(
                    f"Picard increments grow on [{t0:g}, {t1:g}] ({inc:.2e}); subdivide the interval")
        else:
            raise NonContractionError(
                f"no convergence after {n_iter} iterations on [{t0:g}, {t1:g}] (last increment "
                f"{incs[-1]:.2e}); subdivide the interval")
        info["iterations"].append(len(incs))
        info["increments"].append(incs)
        a_start = a[-1]
    psi = QuantumState(np.exp(-1j * mu * T) * a_start,
                       psi0.basis if isinstance(psi0, QuantumState) else None)
    return (psi, info) if return_info else psi


def fidelity(psi, phi) -> float:
    """``|<phi, psi>|`` for normalized states."""
    a, b = _coeffs(psi), _coeffs(phi)
    n = min(a.size, b.size)
    for c in (a, b):
        _check_normalized(c, 1e-8)
    return float(min(1.0, abs(np.vdot(b[:n], a[:n]))))


def truncation_leakage(final_n, final_2n) -> float:
    """Relative l1 difference of retained-mode populations between two truncations."""
    p = np.abs(_coeffs(final_n)) ** 2
    q = np.abs(_coeffs(final_2n))[:p.size] ** 2
    return float(np.sum(np.abs(p - q)) / np.sum(q))
