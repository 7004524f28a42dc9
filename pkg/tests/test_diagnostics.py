import math

import numpy as np
import pytest

from inversive_flow import InversiveError, MonodromyClass
from inversive_flow.diagnostics import (TimeSeries, class_of_spiral, dissipation_report,
                                        fit_decay_rate, fit_to_class, length, lox_length_bound,
                                        match_loxodrome, measured_class, monotonicity_report,
                                        predict_limit_Q, run_report, sobolev_seminorm)
from inversive_flow.flow import FlowState, constant_state, dispersion, evolve, noisy_state

ELL_HALF = 2 * math.pi / math.sqrt(2)


def test_length_and_seminorms():
    N, ell = 64, 3.0
    u = np.arange(N) / N
    state = FlowState(0.5 + np.cos(2 * np.pi * u), np.full(N, ell))
    assert length(state) == pytest.approx(ell, abs=1e-14)
    # Parseval: int (c + cos)^2 ds = ell (c^2 + 1/2), and the p-th derivative picks up (2 pi/ell)^(2p)
    assert sobolev_seminorm(state, 0) == pytest.approx(ell * 0.75, rel=1e-13)
    for p in (1, 2, 3):
        assert sobolev_seminorm(state, p) == pytest.approx(ell / 2 * (2 * np.pi / ell) ** (2 * p), rel=1e-12)
    assert sobolev_seminorm(constant_state(0.3, 2.0, 32), 2) < 1e-28
    with pytest.raises(ValueError):
        sobolev_seminorm(state, -1)


def test_length_bound_log_spirals():
    one = lox_length_bound(class_of_spiral(1.0))
    assert one.corrected == pytest.approx(2 * math.pi, rel=1e-14)
    assert one.printed == pytest.approx(math.pi * math.sqrt(2), rel=1e-14)
    half = lox_length_bound(class_of_spiral(0.5))
    assert half.corrected == pytest.approx(2 * math.pi / math.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("a", [1.0, 0.5])
def test_length_bound_equals_measured_loxodrome_length(a):
    cls = class_of_spiral(a)
    q0, ell = match_loxodrome(cls)
    assert q0 == pytest.approx((1 - a * a) / (4 * a), abs=1e-8)
    assert ell == pytest.approx(lox_length_bound(cls).corrected, abs=1e-6)
    # and the class measured from the flow state of that loxodrome agrees
    m = measured_class(constant_state(q0, ell, 32))
    assert m.n == 1 and m.r == pytest.approx(cls.r, rel=1e-8)


def test_length_bound_monotone_in_n():
    vals = [lox_length_bound(MonodromyClass(0.3, 0.4, n)).corrected for n in range(0, 5)]
    assert np.all(np.diff(vals) > 0)


def test_predict_limit_Q():
    assert predict_limit_Q(class_of_spiral(1.0)) == pytest.approx(0.0, abs=1e-15)
    assert predict_limit_Q(class_of_spiral(0.5)) == pytest.approx(0.375, abs=1e-15)
    assert predict_limit_Q(class_of_spiral(0.5), "numeric") == pytest.approx(0.375, abs=1e-8)
    cls = MonodromyClass(0.2, 0.7, 2)
    assert predict_limit_Q(cls, "numeric") == pytest.approx(predict_limit_Q(cls), abs=1e-7)
    with pytest.raises(ValueError):
        predict_limit_Q(cls, "guess")


def test_fit_to_class_places_profile():
    N = 64
    u = np.arange(N) / N
    target = class_of_spiral(0.5)
    Q, ell = fit_to_class(0.375 + 0.05 * np.sin(2 * np.pi * u), target)
    m = measured_class(FlowState(Q, np.full(N, ell)))
    assert m.n == 1 and m.r == pytest.approx(target.r, rel=1e-7)
    assert abs(m.theta) < 1e-7 or abs(m.theta - math.pi) < 1e-7


def test_fit_decay_rate():
    t = np.linspace(0.0, 2.0, 40)
    lam, r2 = fit_decay_rate(TimeSeries(t, 3.0 * np.exp(-1.7 * t)), window=(0.0, 2.0))
    assert abs(lam - 1.7) < 1e-10 and r2 == pytest.approx(1.0, abs=1e-14)
    lam, r2 = fit_decay_rate(TimeSeries(t, np.full(40, 2.0)))
    assert abs(lam) < 1e-13 and r2 == 1.0
    with pytest.raises(InversiveError) as exc:
        fit_decay_rate(TimeSeries(t, np.cos(t)), window=(0.0, 2.0))
    assert exc.value.code == "NONPOSITIVE_VALUES"
    with pytest.raises(ValueError):
        TimeSeries([0.0, 0.0], [1.0, 1.0])


def test_fit_decay_rate_small_perturbation():
    N, Q0, eps = 32, 0.375, 1e-5
    u = np.arange(N) / N
    state = FlowState(Q0 + eps * np.cos(2 * np.pi * u), np.full(N, ELL_HALF))
    traj = evolve(state, 1.5, stop_on_convergence=False)
    lam, r2 = fit_decay_rate(TimeSeries.from_trajectory(traj, "normQs2"))
    expect = 2 * abs(dispersion(2 * math.pi / ELL_HALF, Q0))
    assert abs(lam / expect - 1) < 0.05 and r2 > 0.999


def test_dissipation_report():
    rep = dissipation_report(constant_state(0.4, 3.0, 32))
    assert abs(rep.left) < 1e-14 and abs(rep.right) < 1e-14
    for seed in range(5):
        state = noisy_state(0.375, ELL_HALF, N=128, amplitude=0.5, max_mode=6, seed=seed)
        rep = dissipation_report(state)
        assert rep.residual < 1e-8
        assert rep.young_holds
        # the variant with the second derivative in the last term fails on generic data
        assert rep.residual_printed > 1e-3
    # the identity is exact for non-uniform densities too
    u = np.arange(128) / 128
    state = FlowState(0.375 + 0.3 * np.sin(2 * np.pi * u), 4.0 * (1 + 0.1 * np.cos(2 * np.pi * u)))
    assert dissipation_report(state).residual < 1e-8


def test_monotonicity_and_run_report():
    state = noisy_state(0.375, ELL_HALF, N=64, amplitude=0.5, max_mode=8, seed=3)
    traj = evolve(state, 0.2)
    mono = monotonicity_report(traj)
    assert mono.ok(1e-7)
    assert mono.dell_checked_steps > 0
    text = run_report(traj, measured_class(state))
    for key in ("termination:", "predicted Q_inf:", "length bound: corrected", "dl/dt vs int Q_s^2"):
        assert key in text
    lox = evolve(constant_state(0.375, ELL_HALF, 32), 1.0)
    assert "already loxodromic" in run_report(lox)
