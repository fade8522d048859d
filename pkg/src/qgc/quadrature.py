"""Extended-precision Gauss-Legendre quadrature and compensated summation.

Matrix elements of the control operator decay like ``k**-3``, so a relative
accuracy of 1e-10 at ``k = 100`` needs an absolute accuracy near 1e-17. Nodes,
weights and integrands are therefore handled in ``np.longdouble`` and sums
are accumulated with Neumaier's compensated algorithm.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

LD = np.longdouble
PI = LD("3.14159265358979323846264338327950288")


@lru_cache(maxsize=64)
def _legendre_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.polynomial.legendre.leggauss(n)[0].astype(LD)

    def evaluate(x):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for k in range(2, n + 1):
            p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
        dp = n * (x * p1 - p0) / (x * x - 1)
        return p1, dp

    # Newton polish of the double-precision roots.
    for _ in range(3):
        p, dp = evaluate(x)
        x = x - p / dp
    _, dp = evaluate(x)
    w = 2 / ((1 - x * x) * dp * dp)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a=0, b=1) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[a, b]`` in long double.

    Parameters
    ----------
    n : int
        Number of nodes, at least 1.
    a, b : real
        Interval end points.

    Returns
    -------
    nodes, weights : ndarray of longdouble
    """
    if n < 1:
        raise ValueError("quadrature order must be positive")
    x, w = _legendre_nodes(int(n))
    a, b = LD(a), LD(b)
    half = (b - a) / 2
    return a + (x + 1) * half, w * half


def compensated_sum(terms: np.ndarray, axis: int = -1) -> np.ndarray:
    """Neumaier-compensated sum of ``terms`` along ``axis``.

    The loop runs over the summation axis and is vectorized over the others,
    which suits the typical shape (matrix entries x quadrature nodes).
    """
    terms = np.moveaxis(np.asarray(terms), axis, 0)
    total = np.zeros(terms.shape[1:], dtype=terms.dtype)
    comp = np.zeros_like(total)
    for t in terms:
        s = total + t
        big = np.abs(total) >= np.abs(t)
        comp += np.where(big, (total - s) + t, (t - s) + total)
        total = s
    return total + comp


def order_for(max_mode_number: int, max_phase: float = 0.0) -> int:
    """Quadrature order for integrands built from modes on one edge.

    Parameters
    ----------
    max_mode_number : int
        Largest mode number among the modes involved.
    max_phase : float
        Largest total phase ``(sum of wavenumbers) * edge length`` of the
        integrand. Gauss-Legendre needs roughly ``phase / 2`` nodes to resolve
        it, so the rule never goes below ``0.6 * phase + 20``.
    """
    return int(max(32, 4 * int(max_mode_number), int(np.ceil(0.6 * max_phase)) + 20))


def compensated_gram(left: np.ndarray, weights: np.ndarray, right: np.ndarray,
                     block: int = 32) -> np.ndarray:
    """Compensated ``sum_n weights[n] * left[:, n] * right[:, n].T``.

    Nodes are grouped in blocks of ``block``; each block is summed directly
    (its rounding error is at most ``block`` ulps) and the block partials are
    combined with :func:`compensated_sum`.

    Parameters
    ----------
    left : ndarray, shape (P, n)
    weights : ndarray, shape (n,)
    right : ndarray, shape (Q, n)

    Returns
    -------
    ndarray, shape (P, Q)
        Accumulated in the common dtype of the inputs.
    """
    dtype = np.result_type(left, weights, right)
    n = left.shape[1]
    nb = -(-n // block)
    pad = nb * block - n
    wl = np.pad((left * weights).astype(dtype), ((0, 0), (0, pad)))
    r = np.pad(right.astype(dtype), ((0, 0), (0, pad)))
    wl = wl.reshape(left.shape[0], nb, block).transpose(1, 0, 2)
    r = r.reshape(right.shape[0], nb, block).transpose(1, 2, 0)
    partials = np.matmul(wl, r)
    return compensated_sum(partials, axis=0)
