"""NumPy propagation kernels, used when the compiled extension is unavailable.

Both kernels share the signature of their compiled counterparts in
``_kernels.pyx``. Step propagators are built in batches with a batched
Hermitian eigendecomposition; consecutive steps between two recording points
are multiplied by pairwise tree reduction.
"""
from __future__ import annotations

import numpy as np


def _chunk_size(n: int) -> int:
    return max(256, (1 << 20) // max(1, n * n))


def _chain_product(U: np.ndarray) -> np.ndarray:
    """``U[-1] @ ... @ U[0]``."""
    while U.shape[0] > 1:
        if U.shape[0] % 2:
            U = np.concatenate([U, np.eye(U.shape[1], dtype=U.dtype)[None]])
        U = U[1::2] @ U[0::2]
    return U[0]


def _apply(U: np.ndarray, start: int, psi: np.ndarray, record_steps: np.ndarray, r: int,
           out: np.ndarray) -> tuple[np.ndarray, int]:
    """Apply steps ``start+1 .. start+len(U)`` to ``psi``, recording as requested."""
    stop = start + U.shape[0]
    pos = start
    while pos < stop:
        nxt = stop
        if r < record_steps.size and record_steps[r] <= stop:
            nxt = int(record_steps[r])
        if nxt > pos:
            psi = _chain_product(U[pos - start:nxt - start]) @ psi
            pos = nxt
        while r < record_steps.size and record_steps[r] == pos:
            out[r] = psi
            r += 1
    return psi, r


def _exp_steps(H: np.ndarray, tau) -> np.ndarray:
    w, V = np.linalg.eigh(H)
    phase = np.exp(-1j * w * np.asarray(tau)[..., None])
    return (V * phase[:, None, :]) @ V.conj().transpose(0, 2, 1)


def propagate_lab(mu, B, u, dt, psi0, record_steps) -> np.ndarray:
    """Steps ``psi <- exp(-i (diag(mu) + u_n B) dt_n) psi``.

    Returns the states after the step counts listed in ``record_steps``.
    """
    mu = np.asarray(mu, dtype=float)
    B = np.asarray(B, dtype=complex)
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    record_steps = np.asarray(record_steps, dtype=np.int64)
    n = mu.size
    out = np.empty((record_steps.size, n), dtype=complex)
    psi = np.array(psi0, dtype=complex)
    A = np.diag(mu).astype(complex)
    r = 0
    chunk = _chunk_size(n)
    for s in range(0, u.size, chunk):
        e = min(u.size, s + chunk)
        U = _exp_steps(A[None] + u[s:e, None, None] * B[None], dt[s:e])
        psi, r = _apply(U, s, psi, record_steps, r, out)
    return out


def propagate_magnus(mu, B, lam, coef, h, nsteps, a0, record_steps) -> np.ndarray:
    """Interaction-picture first-order Magnus steps for ``u = sum c_r exp(i lam_r t)``.

    On step ``[t0, t0 + h]`` the generator is
    ``Omega_jk = B_jk * int u(t) exp(i (mu_j - mu_k) t) dt`` (integrated
    exactly) and ``a <- exp(-i Omega) a``.
    """
    mu = np.asarray(mu, dtype=float)
    B = np.asarray(B, dtype=complex)
    lam = np.asarray(lam, dtype=float)
    coef = np.asarray(coef, dtype=complex)
    record_steps = np.asarray(record_steps, dtype=np.int64)
    n = mu.size
    nu = mu[:, None] - mu[None, :]
    out = np.empty((record_steps.size, n), dtype=complex)
    a = np.array(a0, dtype=complex)
    r = 0
    chunk = _chunk_size(n * max(1, lam.size))
    for s in range(0, int(nsteps), chunk):
        e = min(int(nsteps), s + chunk)
        tmid = (np.arange(s, e) + 0.5) * h
        integ = np.zeros((e - s, n, n), dtype=complex)
        for lr, cr in zip(lam, coef):
            f = nu + lr
            integ += cr * h * np.sinc(f * h / (2 * np.pi)) * np.exp(1j * f[None] * tmid[:, None, None])
        U = _exp_steps(B[None] * integ, 1.0)
        a, r = _apply(U, s, a, record_steps, r, out)
    return out
