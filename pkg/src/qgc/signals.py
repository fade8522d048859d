"""Real control signals with exact budget norms."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class Budget:
    """Control budget: total variation, sup norm and horizon times sup norm."""

    bv: float
    linf: float
    t_linf: float

    def as_dict(self) -> dict:
        return {"bv": self.bv, "linf": self.linf, "t_linf": self.t_linf}


class ControlSignal:
    """Base class for real scalar controls on ``[0, horizon]``."""

    horizon: float

    def __call__(self, t) -> np.ndarray:
        raise NotImplementedError

    @property
    def max_frequency(self) -> float:
        return 0.0

    def budget(self) -> Budget:
        raise NotImplementedError

    def header(self) -> dict:
        raise NotImplementedError

    def l2_norm(self) -> float:
        raise NotImplementedError


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype).reshape(-1)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PiecewiseConstant(ControlSignal):
    """``u(t) = values[i]`` on ``[breaks[i], breaks[i+1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b, v = _frozen(self.breaks), _frozen(self.values)
        if b.size != v.size + 1 or v.size == 0:
            raise ValueError("need len(breaks) == len(values) + 1 >= 2")
        if b[0] != 0 or np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must start at 0 and increase strictly")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, T: float, values) -> "PiecewiseConstant":
        values = np.asarray(values, dtype=float)
        return cls(np.linspace(0.0, T, values.size + 1), values)

    @property
    def horizon(self) -> float:
        return float(self.breaks[-1])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, self.values.size - 1)
        return self.values[i]

    def budget(self) -> Budget:
        linf = float(np.max(np.abs(self.values)))
        return Budget(float(np.sum(np.abs(np.diff(self.values)))), linf, self.horizon * linf)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values ** 2 * np.diff(self.breaks))))

    def header(self) -> dict:
        return {"form": "piecewise_constant", "breaks": [repr(float(b)) for b in self.breaks],
                "values": [repr(float(v)) for v in self.values]}


def _abs_sin_integral(theta: float) -> float:
    """``int_0^theta |sin s| ds`` for any real ``theta``."""
    if theta < 0:
        return -_abs_sin_integral(-theta)
    n, r = divmod(theta, math.pi)
    return 2.0 * n + (1.0 - math.cos(r))


@dataclass(frozen=True, eq=False)
class TrigSeries(ControlSignal):
    """``u(t) = offset + sum_m (p_m cos(w_m t) + q_m sin(w_m t))`` on ``[0, T]``."""

    T: float
    offset: float
    omegas: np.ndarray
    cos_coeffs: np.ndarray
    sin_coeffs: np.ndarray

    def __post_init__(self):
        w, p, q = _frozen(self.omegas), _frozen(self.cos_coeffs), _frozen(self.sin_coeffs)
        if not (w.size == p.size == q.size):
            raise ValueError("omegas, cos_coeffs and sin_coeffs must have equal length")
        if self.T < 0 or np.any(w < 0):
            raise ValueError("horizon and frequencies must be nonnegative")
        object.__setattr__(self, "omegas", w)
        object.__setattr__(self, "cos_coeffs", p)
        object.__setattr__(self, "sin_coeffs", q)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def cosine(cls, amplitude: float, omega: float, phase: float, T: float) -> "TrigSeries":
        """``amplitude * cos(omega t + phase)``."""
        return cls(T, 0.0, [omega], [amplitude * math.cos(phase)], [-amplitude * math.sin(phase)])

    @property
    def horizon(self) -> float:
        return self.T

    @property
    def max_frequency(self) -> float:
        return float(self.omegas.max()) if self.omegas.size else 0.0

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        wt = np.multiply.outer(t, self.omegas)
        return self.offset + np.cos(wt) @ self.cos_coeffs + np.sin(wt) @ self.sin_coeffs

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        wt = np.multiply.outer(t, self.omegas)
        return np.cos(wt) @ (self.omegas * self.sin_coeffs) - np.sin(wt) @ (self.omegas * self.cos_coeffs)

    def exponential_form(self) -> tuple[np.ndarray, np.ndarray]:
        """Frequencies ``lam`` and coefficients ``c`` with ``u = sum c_r exp(i lam_r t)``."""
        lam = np.concatenate([[0.0], self.omegas, -self.omegas])
        c = np.concatenate([[self.offset], (self.cos_coeffs - 1j * self.sin_coeffs) / 2,
                            (self.cos_coeffs + 1j * self.sin_coeffs) / 2])
        return lam, c.astype(complex)

    def _critical_points(self) -> np.ndarray:
        if self.T == 0 or self.max_frequency == 0:
            return np.array([0.0, self.T])
        n = int(np.ceil(64 * self.T * self.max_frequency / (2 * math.pi))) + 2
        grid = np.linspace(0.0, self.T, n)
        d = self.derivative(grid)
        roots = [brentq(lambda s: float(self.derivative(s)), grid[i], grid[i + 1], xtol=1e-14)
                 for i in np.nonzero(d[:-1] * d[1:] < 0)[0]]
        roots += list(grid[1:-1][d[1:-1] == 0])
        return np.unique(np.concatenate([[0.0], roots, [self.T]]))

    def budget(self) -> Budget:
        nz = np.nonzero((self.cos_coeffs != 0) | (self.sin_coeffs != 0))[0]
        if self.T == 0:
            return Budget(0.0, 0.0, 0.0)
        if nz.size <= 1 and (nz.size == 0 or self.omegas[nz[0]] > 0):
            # Offset plus one harmonic: R cos(w t - phi0).
            if nz.size == 0:
                a = abs(self.offset)
                return Budget(0.0, a, self.T * a)
            m = nz[0]
            R = math.hypot(self.cos_coeffs[m], self.sin_coeffs[m])
            phi0 = math.atan2(self.sin_coeffs[m], self.cos_coeffs[m])
            w = float(self.omegas[m])
            bv = R * (_abs_sin_integral(w * self.T - phi0) - _abs_sin_integral(-phi0))
            if w * self.T >= 2 * math.pi:
                linf = abs(self.offset) + R
            else:
                ts = [0.0, self.T]
                for target in (0.0, math.pi):
                    base = (phi0 + target) / w
                    period = 2 * math.pi / w
                    s = base - math.floor(base / period) * period
                    while s <= self.T:
                        ts.append(s)
                        s += period
                linf = float(np.max(np.abs(self(np.array(ts)))))
            return Budget(float(bv), float(linf), self.T * float(linf))
        pts = self._critical_points()
        vals = self(pts)
        linf = float(np.max(np.abs(vals)))
        return Budget(float(np.sum(np.abs(np.diff(vals)))), linf, self.T * linf)

    def l2_norm(self) -> float:
        lam, c = self.exponential_form()
        # |u|^2 = sum_rs c_r conj(c_s) exp(i (lam_r - lam_s) t)
        nu = lam[:, None] - lam[None, :]
        x = nu * self.T / 2
        integ = self.T * np.sinc(x / math.pi) * np.exp(1j * x)
        return float(np.sqrt(max(np.real(c @ integ @ c.conj()), 0.0)))

    def header(self) -> dict:
        return {"form": "trig_series", "T": repr(self.T), "offset": repr(self.offset),
                "omegas": [repr(float(w)) for w in self.omegas],
                "cos_coeffs": [repr(float(p)) for p in self.cos_coeffs],
                "sin_coeffs": [repr(float(q)) for q in self.sin_coeffs]}


def budget_report(u: ControlSignal) -> Budget:
    """``(BV, L_inf, T * L_inf)`` computed from the signal's representation."""
    return u.budget()


def signal_to_csv(u: ControlSignal, path, n_points: int = 1001) -> None:
    """Write a ``# qgc-signal`` JSON header then ``t,u`` samples."""
    with open(path, "w", newline="") as fh:
        fh.write("# qgc-signal " + json.dumps(u.header(), sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["t", "u"])
        for t in np.linspace(0.0, u.horizon, n_points):
            w.writerow([repr(float(t)), repr(float(u(t)))])


def signal_from_header(header: dict) -> ControlSignal:
    if header["form"] == "piecewise_constant":
        return PiecewiseConstant([float(b) for b in header["breaks"]],
                                 [float(v) for v in header["values"]])
    if header["form"] == "trig_series":
        return TrigSeries(float(header["T"]), float(header["offset"]),
                          [float(w) for w in header["omegas"]],
                          [float(p) for p in header["cos_coeffs"]],
                          [float(q) for q in header["sin_coeffs"]])
    raise ValueError(f"unknown signal form {header['form']!r}")


def signal_from_csv(path) -> ControlSignal:
    """Rebuild the exact signal from the header written by :func:`signal_to_csv`."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("# qgc-signal "):
        raise ValueError("missing qgc-signal header")
    return signal_from_header(json.loads(first[len("# qgc-signal "):]))
