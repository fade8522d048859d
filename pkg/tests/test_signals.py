"""Control signals: budget norms, L2 norm and CSV round trip."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from qgc import PiecewiseConstant, TrigSeries, budget_report
from qgc.signals import signal_from_csv, signal_to_csv

BUDGET_RTOL = 1e-12
SAMPLED_RTOL = 1e-4


def test_piecewise_budget():
    u = PiecewiseConstant([0.0, 0.5, 1.0, 2.0], [1.0, -2.0, 0.5])
    b = budget_report(u)
    assert (b.bv, b.linf, b.t_linf) == (5.5, 2.0, 4.0)
    assert u.l2_norm() == pytest.approx(math.sqrt(0.5 + 2.0 + 0.25), rel=BUDGET_RTOL)
    np.testing.assert_array_equal(u(np.array([0.0, 0.49, 0.5, 1.99, 2.0])),
                                  [1.0, 1.0, -2.0, 0.5, 0.5])


def test_cosine_budget_whole_periods():
    w = 2 * math.pi * 3
    u = TrigSeries.cosine(0.7, w, 0.0, 2.0)
    b = u.budget()
    assert b.linf == pytest.approx(0.7, rel=BUDGET_RTOL)
    assert b.bv == pytest.approx(4 * 0.7 * 6, rel=BUDGET_RTOL)
    assert b.t_linf == pytest.approx(1.4, rel=BUDGET_RTOL)


def test_short_cosine_linf():
    u = TrigSeries.cosine(1.0, 1.0, 0.3, 1.0)
    assert u.budget().linf == pytest.approx(math.cos(0.3), rel=BUDGET_RTOL)


def _sampled_budget(u, n=400_001):
    t = np.linspace(0, u.horizon, n)
    v = u(t)
    return float(np.sum(np.abs(np.diff(v)))), float(np.max(np.abs(v)))


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.lists(st.tuples(st.floats(0.1, 30), st.floats(-1, 1),
                                            st.floats(-1, 1)), min_size=1, max_size=3),
       st.floats(0.2, 3.0))
def test_trig_budget_vs_sampling(offset, harmonics, T):
    w, p, q = zip(*harmonics)
    u = TrigSeries(T, offset, w, p, q)
    bv, linf = _sampled_budget(u)
    b = u.budget()
    assert b.linf >= linf - 1e-12
    assert b.linf == pytest.approx(linf, rel=SAMPLED_RTOL, abs=1e-9)
    assert b.bv == pytest.approx(bv, rel=SAMPLED_RTOL, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(0.0, 20), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.1, 3.0))
def test_trig_l2_vs_quad(offset, w, p, q, T):
    u = TrigSeries(T, offset, [w], [p], [q])
    ref = math.sqrt(quad(lambda t: float(u(t)) ** 2, 0, T, limit=200, epsabs=1e-13)[0])
    assert u.l2_norm() == pytest.approx(ref, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("u", [
    PiecewiseConstant.uniform(1.5, [0.1, -1 / 3, 2.0]),
    TrigSeries(2.0, 0.1, [1.0, math.pi], [1 / 3, 0.0], [0.0, -0.25]),
])
def test_csv_roundtrip(tmp_path, u):
    path = tmp_path / "u.csv"
    signal_to_csv(u, path, n_points=11)
    v = signal_from_csv(path)
    t = np.linspace(0, u.horizon, 101)
    np.testing.assert_array_equal(u(t), v(t))
    assert v.header() == u.header()


def test_signal_validation(tmp_path):
    with pytest.raises(ValueError):
        PiecewiseConstant([0.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        PiecewiseConstant([0.1, 1.0], [1.0])
    with pytest.raises(ValueError):
        PiecewiseConstant([0.0, 1.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        TrigSeries(1.0, 0.0, [-1.0], [1.0], [0.0])
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u\n0,1\n")
    with pytest.raises(ValueError):
        signal_from_csv(bad)
