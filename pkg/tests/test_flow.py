import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from inversive_flow import InversiveError
from inversive_flow.flow import (FlowState, StepperConfig, band_limited_noise, commutator_C,
                                 constant_state, dispersion, evolve, integrate_ds, noisy_state,
                                 remesh, rhs_Q, s_derivative, s_derivatives, step)

ELL = 2 * math.pi / math.sqrt(2)


def warped(N=64, ell=5.0, eps=0.05):
    """rho = ell (1 + eps cos 2 pi u) and f = sin(2 pi s/ell), with s(u) known."""
    u = np.arange(N) / N
    s = ell * (u + eps * np.sin(2 * np.pi * u) / (2 * np.pi))
    rho = ell * (1 + eps * np.cos(2 * np.pi * u))
    return u, s, rho


# -------------------------------------------------------------- FlowState


def test_flow_state_validation():
    with pytest.raises(InversiveError) as exc:
        FlowState(np.array([0.0, np.nan]), np.ones(2))
    assert exc.value.code == "NONFINITE"
    with pytest.raises(InversiveError) as exc:
        FlowState(np.zeros(4), np.array([1.0, 1.0, 0.0, 1.0]))
    assert exc.value.code == "RHO_NONPOSITIVE"
    st_ = constant_state(0.3, 2.0, N=16)
    assert st_.ell == 2.0 and st_.N == 16
    with pytest.raises(ValueError):
        st_.Q[0] = 1.0


# ------------------------------------------------------------ derivatives


def test_s_derivative_constant_and_uniform():
    N, ell = 64, 3.0
    u = np.arange(N) / N
    rho = np.full(N, ell)
    for p in range(1, 7):
        assert np.max(np.abs(s_derivative(np.full(N, 2.5), rho, p))) < 1e-12
    d1 = s_derivative(np.sin(2 * np.pi * u), rho, 1)
    assert np.max(np.abs(d1 - 2 * np.pi / ell * np.cos(2 * np.pi * u))) < 1e-12


@pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
def test_s_derivative_warped_density(p):
    # roundoff grows like (N/ell)^p, which sets the looser high-order tolerances
    ell = 5.0
    u, s, rho = warped(N=64, ell=ell)
    f = np.sin(2 * np.pi * s / ell)
    exact = (2 * np.pi / ell) ** p * np.sin(2 * np.pi * s / ell + p * np.pi / 2)
    got = s_derivative(f, rho, p)
    tol = {5: 1e-8, 6: 3e-7}.get(p, 1e-9)
    assert np.max(np.abs(got - exact)) < tol * np.max(np.abs(exact))
    assert np.allclose(s_derivatives(f, rho, 6)[p], got)


def test_resolution_error(rng):
    N = 64
    f = rng.normal(size=N)
    with pytest.raises(InversiveError) as exc:
        s_derivative(f, np.ones(N), 1)
    assert exc.value.code == "RESOLUTION"


# ----------------------------------------------------- commutator and rhs


def test_commutator_constant_and_identity():
    N = 64
    u, s, rho = warped(N=N)
    assert np.max(np.abs(commutator_C(np.full(N, 0.7), rho))) < 1e-12
    Q = 0.375 + 0.2 * np.sin(2 * np.pi * s / 5.0) + 0.1 * np.cos(4 * np.pi * s / 5.0)
    d = s_derivatives(Q, rho, 4)
    # with f = -Q_s the variation formula reads C = -(f_sss/2 + 2 Q f_s + Q_s f)
    f, f_s, f_sss = -d[1], -d[2], -d[4]
    assert np.allclose(commutator_C(Q, rho), -(0.5 * f_sss + 2 * Q * f_s + d[1] * f), atol=1e-12)


def test_rhs_fixed_point():
    for Q0 in (0.0, 0.375, -2.0):
        Q = np.full(64, Q0)
        assert np.max(np.abs(rhs_Q(Q, np.full(64, 4.0)))) <= 1e-12 * max(1.0, abs(Q0))


@pytest.mark.parametrize("Q0, m", [(0.0, 1), (0.375, 1), (0.375, 3), (1.2, 2)])
def test_rhs_linearisation(Q0, m):
    N, ell, eps = 64, ELL, 1e-6
    u = np.arange(N) / N
    mode = np.cos(2 * np.pi * m * u)
    r = rhs_Q(Q0 + eps * mode, np.full(N, ell))
    omega = 2 * np.pi * m / ell
    # compare the Fourier coefficient: pointwise values carry amplified roundoff
    coeff = np.fft.rfft(r / eps)[m] * 2 / N
    assert abs(coeff - dispersion(omega, Q0)) < 1e-6 * abs(dispersion(omega, Q0))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 50), st.floats(-20, 20))
def test_dispersion_negative(omega, Q0):
    assert dispersion(omega, Q0) < 0


# ------------------------------------------------------------------- step


def test_step_fixed_point():
    state = constant_state(0.375, ELL, N=64)
    res = step(state, StepperConfig(), 0.01)
    assert res.state.t == pytest.approx(0.01)
    assert np.max(np.abs(res.state.Q - 0.375)) <= 1e-12
    assert abs(res.state.ell - ELL) <= 1e-12


@pytest.mark.parametrize("scheme", ["IMEX", "ERK"])
def test_single_mode_decay_rate(scheme):
    # a coarse grid keeps the explicit scheme's h^6 step ceiling affordable
    N, Q0, eps = 16, 0.375, 1e-6
    u = np.arange(N) / N
    state = FlowState(Q0 + eps * np.cos(2 * np.pi * u), np.full(N, ELL))
    cfg = StepperConfig(scheme=scheme, rtol=1e-9)
    traj = evolve(state, 0.5, cfg, stop_on_convergence=False)
    amp = 2 * abs(np.fft.rfft(traj.final.Q)[1]) / N
    rate = math.log(amp / eps) / traj.final.t
    sigma = dispersion(2 * np.pi / ELL, Q0)
    assert abs(rate / sigma - 1) < 0.02


def test_dell_matches_dissipation():
    state = noisy_state(0.375, ELL, N=128, amplitude=0.3, max_mode=4, seed=5)
    res = step(state, StepperConfig(), 1e-4)
    mid = res.mid
    qs = s_derivative(mid.Q, mid.rho, 1)
    rate = (res.state.ell - state.ell) / res.dt_used
    assert abs(rate / integrate_ds(qs**2, mid.rho) - 1) < 0.01


def test_erk_agrees_with_imex():
    # small amplitude and low modes keep the two discretisations' truncation errors apart
    state = noisy_state(0.375, ELL, N=16, amplitude=0.05, max_mode=2, seed=2)
    a = evolve(state, 0.05, StepperConfig(scheme="IMEX", rtol=1e-9), stop_on_convergence=False)
    b = evolve(state, 0.05, StepperConfig(scheme="ERK", rtol=1e-9), stop_on_convergence=False)
    assert abs(a.final.ell - b.final.ell) < 1e-10
    # compare the shapes after remeshing both to uniform density
    assert np.max(np.abs(remesh(a.final).Q - remesh(b.final).Q)) < 1e-6


def test_dt_underflow():
    state = noisy_state(0.375, ELL, N=64, amplitude=0.5, seed=1)
    cfg = StepperConfig(dt_init=1e-2, dt_min=1e-3, dt_max=1e-2, rtol=1e-14, atol=1e-20)
    with pytest.raises(InversiveError) as exc:
        step(state, cfg)
    assert exc.value.code == "DT_UNDERFLOW"
    assert exc.value.state is not None
    with pytest.raises(InversiveError) as exc:
        evolve(state, 1.0, cfg)
    assert exc.value.trajectory.reason == "DT_UNDERFLOW"


# ----------------------------------------------------------------- remesh


def test_remesh_identity_on_uniform():
    state = noisy_state(0.375, ELL, N=64, amplitude=0.3, seed=3)
    out = remesh(state)
    assert np.max(np.abs(out.Q - state.Q)) < 1e-12
    assert np.max(np.abs(out.rho - state.rho)) < 1e-12


def test_remesh_preserves_geometry():
    ell = 5.0
    u, s, rho = warped(N=128, ell=ell)
    Q = 0.375 + 0.2 * np.sin(2 * np.pi * s / ell) + 0.1 * np.cos(4 * np.pi * s / ell)
    state = FlowState(Q, rho)
    out = remesh(state)
    assert np.allclose(out.rho, ell, atol=1e-12)
    assert abs(out.ell - state.ell) < 1e-10
    assert abs(integrate_ds(out.Q**2, out.rho) - integrate_ds(Q**2, rho)) < 1e-8
    # the new grid is uniform in s, so Q there is the exact profile at s = ell u
    exact = 0.375 + 0.2 * np.sin(2 * np.pi * u) + 0.1 * np.cos(4 * np.pi * u)
    assert np.max(np.abs(out.Q - exact)) < 1e-10


# ----------------------------------------------------------------- evolve


def test_evolve_from_loxodrome_converges_immediately():
    traj = evolve(constant_state(0.375, ELL, N=64), 5.0)
    assert traj.reason == "converged" and traj.steps == 0
    assert len(traj.records) == 1


def test_evolve_observer_and_snapshots():
    calls = []
    state = noisy_state(0.375, ELL, N=64, amplitude=0.2, max_mode=4, seed=9)
    traj = evolve(state, 0.01, observer=lambda st_, rec: calls.append(rec.t), snapshot_every=5)
    assert traj.reason == "t_end"
    assert len(calls) == traj.steps
    assert traj.final.t == pytest.approx(0.01)
    assert len(traj.snapshots) == 1 + traj.steps // 5 + (traj.steps % 5 != 0)
    assert np.all(np.diff([r.ell for r in traj.records]) >= -1e-14)


def test_band_limited_noise():
    a = band_limited_noise(64, 0.5, 8, seed=11)
    b = band_limited_noise(64, 0.5, 8, seed=11)
    assert np.array_equal(a, b)
    assert abs(np.max(np.abs(a)) - 0.5) < 1e-15
    assert abs(np.mean(a)) < 1e-15
    spec = np.abs(np.fft.rfft(a))
    assert np.max(spec[9:]) < 1e-12 and np.min(spec[1:9]) > 0
    assert not np.array_equal(a, band_limited_noise(64, 0.5, 8, seed=12))
