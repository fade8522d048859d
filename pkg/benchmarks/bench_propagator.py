"""Compare the compiled and NumPy propagation kernels.

Usage::

    python3 benchmarks/bench_propagator.py [--steps 20000] [--sizes 4 10 20] [--repeat 3]

Each row times one kernel call on the tadpole operator with a resonant cosine
control and reports the final-state difference between the two backends.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from qgc import assemble_matrix, tadpole_basis, tadpole_operator
from qgc._backend import available, get_backend
from qgc.signals import TrigSeries


def _inputs(N: int, steps: int):
    basis = tadpole_basis(N)
    B = np.ascontiguousarray(assemble_matrix(tadpole_operator(basis.graph), basis).matrix,
                             dtype=complex)
    mu = np.ascontiguousarray(basis.eigenvalues)
    omega = mu[1] - mu[0]
    u = TrigSeries.cosine(0.5, omega, 0.0, 1.0)
    h = 1.0 / steps
    us = np.ascontiguousarray(u((np.arange(steps) + 0.5) * h))
    psi0 = np.zeros(N, dtype=complex)
    psi0[0] = 1
    lam, coef = u.exponential_form()
    rec = np.array([steps], dtype=np.int64)
    return mu, B, us, h, psi0, np.ascontiguousarray(lam), np.ascontiguousarray(coef), rec


def _time(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = math.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--sizes", type=int, nargs="+", default=[4, 10, 20])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = available()
    print(f"backends: {', '.join(backends)}; steps per call: {args.steps}")
    print(f"{'kernel':<8} {'N':>3} " + " ".join(f"{b + ' [s]':>12}" for b in backends)
          + f" {'speedup':>8} {'max |diff|':>11}")
    for N in args.sizes:
        mu, B, us, h, psi0, lam, coef, rec = _inputs(N, args.steps)
        dts = np.full(us.size, h)
        for kernel in ("lab", "magnus"):
            times, finals = [], []
            for name in backends:
                k = get_backend(name)
                if kernel == "lab":
                    fn = lambda k=k: k.propagate_lab(mu, B, us, dts, psi0, rec)
                else:
                    fn = lambda k=k: k.propagate_magnus(mu, B, lam, coef, h, args.steps, psi0, rec)
                t, out = _time(fn, args.repeat)
                times.append(t)
                finals.append(out[-1])
            speed = times[-1] / times[0] if len(times) > 1 else 1.0
            diff = float(np.max(np.abs(finals[0] - finals[-1])))
            print(f"{kernel:<8} {N:>3} " + " ".join(f"{t:>12.4f}" for t in times)
                  + f" {speed:>8.2f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
