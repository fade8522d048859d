"""Independent reference computations used by the tests.

Nothing here calls the package's quadrature, assembly or propagation code:
matrix elements come from mpmath adaptive quadrature at 30 digits, resonance
sets from an O(N^4) loop, and dynamics from an adaptive Runge-Kutta solver.
"""
from __future__ import annotations

import functools
import itertools
import math

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

mp.mp.dps = 30


def _mpf(x):
    """mpmath number from int, float, numpy scalar (incl. longdouble) or string."""
    if isinstance(x, (np.floating, np.integer)):
        return mp.mpf(str(x))
    return mp.mpf(x)


def _quad(f, a, b, pieces: int):
    pts = [a + (b - a) * mp.mpf(i) / pieces for i in range(pieces + 1)]
    return mp.quad(f, pts)


@functools.lru_cache(maxsize=None)
def tadpole_element(j: int, k: int) -> float:
    """``int_0^1 2 sin(2 j pi x) sin(2 k pi x) x (1 - x) dx``."""
    f = lambda x: 2 * mp.sin(2 * j * mp.pi * x) * mp.sin(2 * k * mp.pi * x) * x * (1 - x)
    return float(_quad(f, mp.mpf(0), mp.mpf(1), 2 * max(j, k)))


def tadpole_closed_form(k: int) -> float:
    """``-2k / ((k^2 - 1)^2 pi^2)``, the reference closed form for the coupling to the ground mode."""
    k = int(k)
    return float(-2 * mp.mpf(k) / ((k * k - 1) ** 2 * mp.pi ** 2))


@functools.lru_cache(maxsize=None)
def _cos_third(a: int, b: int):
    """``int_0^1 sin(a pi y) sin(b pi y) cos(pi y / 3) dy``."""
    f = lambda y: mp.sin(a * mp.pi * y) * mp.sin(b * mp.pi * y) * mp.cos(mp.pi * y / 3)
    return _quad(f, mp.mpf(0), mp.mpf(1), max(a, b) + 1)


def star_same_class(a: int, b: int, L) -> float:
    """Same-class element of the cosine-profile star operator.

    Both edges contribute ``int_0^L (1/L) sin(a pi x/L) sin(b pi x/L) L cos(pi x/(3L)) dx``.
    """
    return float(2 * _mpf(L) * _cos_third(a, b))


def star_cross_class(a: int, La, b: int, Lb, kappa) -> float:
    """Cross-class element with coefficient ``kappa`` and rescaled argument."""
    return float(2 * _mpf(kappa) * mp.sqrt(_mpf(La) / _mpf(Lb)) * _cos_third(a, b))


def stated_star_diagonal(m: int, L) -> float:
    return float(27 * _mpf(L) ** 2 * mp.sqrt(3) * m * m / ((36 * m * m - 1) * mp.pi))


def brute_force_resonances(mu, tol: float) -> set:
    """All ``{(j,k),(l,m)}`` with ``j != k``, ``l != m``, ``(j,k) != (l,m)`` within ``tol``."""
    mu = np.asarray(mu, dtype=float)
    n = mu.size
    out = set()
    pairs = [(j, k) for j in range(n) for k in range(n) if j != k]
    for (j, k), (l, m) in itertools.product(pairs, repeat=2):
        if (j, k) == (l, m):
            continue
        d1 = mu[j] - mu[k]
        d2 = mu[l] - mu[m]
        if abs(d1 - d2) <= tol:
            out.add(frozenset(((j + 1, k + 1), (l + 1, m + 1))))
    return out


def ivp_final_state(mu, B, u, T: float, psi0, rtol: float = 1e-12) -> np.ndarray:
    """Interaction-picture RK (DOP853) solution of ``i psi' = (diag(mu) + u B) psi``.

    Piecewise-constant controls are integrated piece by piece so that jumps
    fall on solver restarts.
    """
    mu = np.asarray(mu, dtype=float)
    B = np.asarray(B, dtype=complex)
    nu = mu[:, None] - mu[None, :]
    n = mu.size

    def rhs(t, y, val):
        a = y[:n] + 1j * y[n:]
        da = -1j * val(t) * (np.exp(1j * nu * t) * B) @ a
        return np.concatenate([da.real, da.imag])

    breaks = getattr(u, "breaks", None)
    pieces = list(zip(breaks[:-1], breaks[1:])) if breaks is not None else [(0.0, T)]
    y = np.concatenate([np.real(psi0), np.imag(psi0)]).astype(float)
    for t0, t1 in pieces:
        if breaks is not None:
            c = float(u(np.array([0.5 * (t0 + t1)]))[0])
            val = lambda t, c=c: c
        else:
            val = lambda t: float(u(np.array([t]))[0])
        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                        args=(val,))
        y = sol.y[:, -1]
    return np.exp(-1j * mu * T) * (y[:n] + 1j * y[n:])


def expm_rotation(N: int, j: int, k: int, theta: float, alpha: float) -> np.ndarray:
    """``expm(alpha E^theta_{jk})`` by scipy's Pade approximant."""
    E = np.zeros((N, N), dtype=complex)
    E[j - 1, k - 1] = np.exp(1j * theta)
    E[k - 1, j - 1] = -np.exp(-1j * theta)
    return expm(alpha * E)


def piecewise_moments(breaks, values, omegas) -> np.ndarray:
    """``-i int u(t) exp(i w t) dt`` for piecewise-constant ``u`` at 30 digits."""
    out = []
    for w in omegas:
        total = mp.mpc(0)
        for a, b, v in zip(breaks[:-1], breaks[1:], values):
            a, b, v, wm = mp.mpf(float(a)), mp.mpf(float(b)), mp.mpf(float(v)), mp.mpf(float(w))
            if wm == 0:
                total += v * (b - a)
            else:
                total += v * (mp.expj(wm * b) - mp.expj(wm * a)) / (1j * wm)
        out.append(complex(-1j * total))
    return np.array(out)


def second_order_shift(mu, B, k: int) -> float:
    """Rayleigh-Schrodinger coefficient ``sum_{j != k} |B_jk|^2 / (mu_k - mu_j)``."""
    mu = np.asarray(mu, dtype=float)
    B = np.asarray(B)
    i = k - 1
    return float(sum(abs(B[j, i]) ** 2 / (mu[i] - mu[j]) for j in range(mu.size) if j != i))


def rwa_t_linf(B12: float) -> float:
    """``T * ||u||_inf`` for a pi/2 rotation: ``(pi/2)/(A|B|) * 2A = pi/|B|``."""
    return math.pi / abs(B12)
