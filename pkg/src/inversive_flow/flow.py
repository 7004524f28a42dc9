"""The inversive curve-lengthening flow as a periodic PDE system for (Q, rho).

On a fixed grid u_i = i/N of one period the state is the invariant Q and the
density rho = ds/du.  The flow reads

    dQ/dt   = 1/4 Q^(6) + 2 Q Q^(4) + 3 Q_s Q^(3) + 2 Q_ss^2 + (4Q^2 + 1) Q_ss + 2 Q Q_s^2
    drho/dt = -C rho,     C = 1/2 Q^(4) + 2 Q Q_ss + Q_s^2

with d/ds = rho^-1 d/du.  Derivatives are Fourier collocation; the stiff
linear part is integrated exactly by an exponential Runge-Kutta scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from .errors import InversiveError
from .mobius import MonodromyClass

RESOLUTION_FRACTION = 0.01
CONVERGED_QS = 1e-10
CONVERGED_CONFIRMATIONS = 3


@dataclass(frozen=True)
class FlowState:
    """Periodic fields Q and rho on u_i = i/N, with time and monodromy class."""

    Q: np.ndarray
    rho: np.ndarray
    t: float = 0.0
    cls: Optional[MonodromyClass] = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        rho = np.array(self.rho, dtype=float)
        if Q.shape != rho.shape or Q.ndim != 1:
            raise ValueError("Q and rho must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(rho))):
            raise InversiveError("NONFINITE", "state contains non-finite values")
        if np.any(rho <= 0):
            err = InversiveError("RHO_NONPOSITIVE", f"min rho = {rho.min():.3g}")
            err.state = None
            raise err
        Q.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "rho", rho)

    @property
    def N(self) -> int:
        return len(self.Q)

    @property
    def ell(self) -> float:
        return float(np.mean(self.rho))

    @property
    def u(self) -> np.ndarray:
        return np.arange(self.N) / self.N


@dataclass(frozen=True)
class StepperConfig:
    dt_init: float = 1e-4
    dt_min: float = 1e-12
    dt_max: float = 0.05
    rtol: float = 1e-8
    atol: float = 1e-12
    scheme: str = "IMEX"
    remesh_interval: int = 20
    remesh_threshold: float = 0.02
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.scheme not in ("IMEX", "ERK"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.remesh_interval < 1:
            raise ValueError("remesh_interval must be positive")


# ---------------------------------------------------------------- spectral


def wavenumbers(N: int) -> np.ndarray:
    """Angular wavenumbers 2 pi j of the rfft modes on u in [0, 1)."""
    return 2.0 * np.pi * np.arange(N // 2 + 1)


def _dmult(N: int, p: int) -> np.ndarray:
    m = (1j * wavenumbers(N)) ** p
    if p % 2 == 1 and N % 2 == 0:
        m[-1] = 0.0
    return m


def _check_resolution(fhat: np.ndarray, N: int, scale: float = 1.0) -> None:
    power = np.abs(fhat[1:]) ** 2
    total = power.sum()
    cut = N // 3
    tail = power[cut:].sum()
    floor = (1e-10 * max(scale, 1.0) * N) ** 2
    if tail > RESOLUTION_FRACTION * total and tail > floor:
        raise InversiveError(
            "RESOLUTION", f"{tail / total:.2%} of the spectral energy lies above mode {cut}"
        )


def _uniform(rho: np.ndarray) -> bool:
    return float(np.ptp(rho)) <= 1e-14 * float(np.max(rho))


def s_derivatives(f, rho, p_max: int, check: bool = True) -> List[np.ndarray]:
    """[f, f_s, ..., f^(p_max)] with f_s = rho^-1 f_u, by Fourier collocation."""
    f = np.asarray(f, dtype=float)
    rho = np.asarray(rho, dtype=float)
    N = len(f)
    fhat = np.fft.rfft(f)
    if check:
        _check_resolution(fhat, N, float(np.max(np.abs(f))))
    out = [f]
    if _uniform(rho):
        r = float(rho[0])
        for p in range(1, p_max + 1):
            out.append(np.fft.irfft(fhat * _dmult(N, p), N) / r**p)
        return out
    d1 = _dmult(N, 1)
    g = f
    ghat = fhat
    for p in range(1, p_max + 1):
        g = np.fft.irfft(ghat * d1, N) / rho
        out.append(g)
        if p < p_max:
            ghat = np.fft.rfft(g)
    return out


def s_derivative(f, rho, p: int, check: bool = True) -> np.ndarray:
    """p-th invariant-arclength derivative of a periodic field (1 <= p <= 6)."""
    if not 1 <= p <= 6:
        raise ValueError("derivative order must be in 1..6")
    return s_derivatives(f, rho, p, check)[p]


def commutator_from_derivs(d) -> np.ndarray:
    Q, Q1, Q2 = d[0], d[1], d[2]
    return 0.5 * d[4] + 2.0 * Q * Q2 + Q1 * Q1


def rhs_from_derivs(d) -> np.ndarray:
    Q, Q1, Q2, Q3, Q4, Q6 = d[0], d[1], d[2], d[3], d[4], d[6]
    return (0.25 * Q6 + 2.0 * Q * Q4 + 3.0 * Q1 * Q3 + 2.0 * Q2 * Q2
            + (4.0 * Q * Q + 1.0) * Q2 + 2.0 * Q * Q1 * Q1)


def commutator_C(Q, rho, check: bool = True) -> np.ndarray:
    """C = 1/2 Q^(4) + 2 Q Q_ss + Q_s^2, so that d(ds)/dt = -C ds."""
    return commutator_from_derivs(s_derivatives(Q, rho, 4, check))


def rhs_Q(Q, rho, check: bool = True) -> np.ndarray:
    """Pointwise time derivative of Q under the flow."""
    return rhs_from_derivs(s_derivatives(Q, rho, 6, check))


def dispersion(omega, Q0):
    """Growth rate of the mode exp(i omega s) linearised about Q = Q0."""
    w2 = np.asarray(omega, dtype=float) ** 2
    return -0.25 * w2**3 + 2.0 * Q0 * w2**2 - (4.0 * Q0 * Q0 + 1.0) * w2


# ------------------------------------------------------------- time stepping


def _full_rhs_hat(Qh, rh, N, keep):
    Q = np.fft.irfft(Qh, N)
    rho = np.fft.irfft(rh, N)
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        return None
    d = s_derivatives(Q, rho, 6, check=False)
    fQ = np.fft.rfft(rhs_from_derivs(d))
    fr = np.fft.rfft(-commutator_from_derivs(d) * rho)
    fQ[keep:] = 0.0
    fr[keep:] = 0.0
    return fQ, fr


def _gauge_rhs_hat(Qh, ell, N, keep):
    """Right-hand side in the uniform-density gauge rho = ell.

    A tangential reparametrisation keeps u proportional to arc length; it
    adds the advection Q_s W with W = ell * int_0^u (C - mean C) du, which
    vanishes at the base point u = 0, and ell evolves by int Q_s^2 ds.
    """
    Q = np.fft.irfft(Qh, N)
    d = s_derivatives(Q, np.full(N, ell), 6, check=False)
    C = commutator_from_derivs(d)
    Ch = np.fft.rfft(C)
    k = wavenumbers(N)
    Wh = np.zeros_like(Ch)
    Wh[1:keep] = ell * Ch[1:keep] / (1j * k[1:keep])
    W = np.fft.irfft(Wh, N)
    W -= W[0]
    fQ = np.fft.rfft(rhs_from_derivs(d) + d[1] * W)
    fQ[keep:] = 0.0
    dell = ell * float(np.mean(d[1] ** 2))
    return fQ, dell


class _Etdrk4:
    """Cox-Matthews ETDRK4 with contour-integral coefficients.

    The state is (Q-hat, ell) in the uniform-density gauge; the linear part
    is the linearisation about the mean of Q.
    """

    n_contour = 32

    def __init__(self, N: int):
        self.N = N
        self.keep = N // 3 + 1
        self._cache = {}

    def linear_symbol(self, Qbar, rhobar):
        return dispersion(wavenumbers(self.N) / rhobar, Qbar)

    def coefficients(self, Lsym, h, key):
        if key in self._cache:
            return self._cache[key]
        Lh = Lsym * h
        M = self.n_contour
        r = Lh[:, None] + np.exp(1j * np.pi * (np.arange(1, M + 1) - 0.5) / M)[None, :]
        er = np.exp(r)
        E = np.exp(Lh)
        E2 = np.exp(Lh / 2)
        Qc = h * np.real(np.mean((np.exp(r / 2) - 1) / r, axis=1))
        f1 = h * np.real(np.mean((-4 - r + er * (4 - 3 * r + r * r)) / r**3, axis=1))
        f2 = h * np.real(np.mean((2 + r + er * (r - 2)) / r**3, axis=1))
        f3 = h * np.real(np.mean((-4 - 3 * r - r * r + er * (4 - r)) / r**3, axis=1))
        out = (E, E2, Qc, f1, f2, f3)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out

    def step(self, Qh, ell, h, Lsym, key):
        """One step; returns (Qh, ell) or None if a stage went non-finite."""
        N, keep = self.N, self.keep
        E, E2, Qc, f1, f2, f3 = self.coefficients(Lsym, h, key)
        # ell has no linear part: its coefficients are the L = 0 limits
        h2, h6 = h / 2.0, h / 6.0

        def nonlin(q, l):
            if not (l > 0 and np.isfinite(l) and np.all(np.isfinite(q))):
                return None
            fQ, fl = _gauge_rhs_hat(q, l, N, keep)
            g = fQ - Lsym * q
            # modes above the dealiasing cut evolve under the linear part alone
            g[keep:] = 0.0
            return g, fl

        n0 = nonlin(Qh, ell)
        if n0 is None:
            return None
        aQ = E2 * Qh + Qc * n0[0]
        al = ell + h2 * n0[1]
        na = nonlin(aQ, al)
        if na is None:
            return None
        bQ = E2 * Qh + Qc * na[0]
        bl = ell + h2 * na[1]
        nb = nonlin(bQ, bl)
        if nb is None:
            return None
        cQ = E2 * aQ + Qc * (2 * nb[0] - n0[0])
        cl = al + h2 * (2 * nb[1] - n0[1])
        nc = nonlin(cQ, cl)
        if nc is None:
            return None
        Qn = E * Qh + f1 * n0[0] + 2 * f2 * (na[0] + nb[0]) + f3 * nc[0]
        ln = ell + h6 * (n0[1] + 2 * (na[1] + nb[1]) + nc[1])
        if not (np.all(np.isfinite(Qn)) and np.isfinite(ln)):
            return None
        return Qn, ln


def _bs32(Qh, rh, h, N, keep):
    """Bogacki-Shampine 3(2) step; returns (high, low) pairs or None."""

    def f(q, r):
        return _full_rhs_hat(q, r, N, keep)

    k1 = f(Qh, rh)
    if k1 is None:
        return None
    k2 = f(Qh + 0.5 * h * k1[0], rh + 0.5 * h * k1[1])
    if k2 is None:
        return None
    k3 = f(Qh + 0.75 * h * k2[0], rh + 0.75 * h * k2[1])
    if k3 is None:
        return None
    yQ = Qh + h * (2 / 9 * k1[0] + 1 / 3 * k2[0] + 4 / 9 * k3[0])
    yr = rh + h * (2 / 9 * k1[1] + 1 / 3 * k2[1] + 4 / 9 * k3[1])
    k4 = f(yQ, yr)
    if k4 is None:
        return None
    zQ = Qh + h * (7 / 24 * k1[0] + 1 / 4 * k2[0] + 1 / 3 * k3[0] + 1 / 8 * k4[0])
    zr = rh + h * (7 / 24 * k1[1] + 1 / 4 * k2[1] + 1 / 3 * k3[1] + 1 / 8 * k4[1])
    return (yQ, yr), (zQ, zr)


def erk_dt_ceiling(state: FlowState) -> float:
    """Explicit stability limit, set by the largest retained sixth-order mode."""
    omega = 2.0 * np.pi * (state.N // 3) / float(np.min(state.rho))
    return 2.5 / (0.25 * omega**6)


@dataclass(frozen=True)
class StepResult:
    state: FlowState
    dt_used: float
    dt_next: float
    mid: Optional[FlowState]
    rejected: int


def _error_norm(dQh, drho, ref, cfg):
    N = len(ref.Q)
    dQ = float(np.max(np.abs(np.fft.irfft(dQh, N))))
    sQ = cfg.rtol * float(np.max(np.abs(ref.Q))) + cfg.atol
    sr = cfg.rtol * float(np.max(ref.rho)) + cfg.atol
    return max(dQ / sQ, float(drho) / sr)


def step(state: FlowState, cfg: StepperConfig, dt: Optional[float] = None,
         _integrator: Optional[_Etdrk4] = None) -> StepResult:
    """Advance by one accepted adaptive step.

    IMEX: ETDRK4 in the uniform-density gauge, with the linearisation about
    the mean of Q as the exactly integrated part and step doubling for the
    error estimate; a state with non-uniform rho is remeshed first.  ERK:
    Bogacki-Shampine 3(2) on the (Q, rho) system under the explicit
    stability ceiling.
    """
    N = state.N
    keep = N // 3 + 1
    _check_resolution(np.fft.rfft(state.Q), N, float(np.max(np.abs(state.Q))))
    dt = cfg.dt_init if dt is None else dt
    dt = min(dt, cfg.dt_max)
    rejected = 0
    if cfg.scheme == "IMEX" and not _uniform(state.rho):
        state = remesh(state, check=False)
    Qh = np.fft.rfft(state.Q)
    if cfg.scheme == "ERK":
        rh = np.fft.rfft(state.rho)
        dt = min(dt, erk_dt_ceiling(state))
    else:
        integ = _integrator or _Etdrk4(N)
        ell = state.ell
        Qbar = float(np.mean(state.Q))
        Lsym = integ.linear_symbol(Qbar, ell)
        key = (Qbar, ell)
    while True:
        if dt < cfg.dt_min:
            err = InversiveError("DT_UNDERFLOW", f"dt = {dt:.3g} below dt_min at t = {state.t:.6g}")
            err.state = state
            raise err
        mid_state = None
        if cfg.scheme == "IMEX":
            one = integ.step(Qh, ell, dt, Lsym, key + (dt,))
            half = integ.step(Qh, ell, dt / 2, Lsym, key + (dt / 2,))
            two = None if half is None else integ.step(half[0], half[1], dt / 2, Lsym, key + (dt / 2,))
            if one is None or two is None:
                err_n = np.inf
            else:
                err_n = _error_norm(one[0] - two[0], abs(one[1] - two[1]), state, cfg)
            order = 4
        else:
            res = _bs32(Qh, rh, dt, N, keep)
            if res is None:
                err_n = np.inf
            else:
                (yQ, yr), (zQ, zr) = res
                dr = np.max(np.abs(np.fft.irfft(yr - zr, N)))
                err_n = _error_norm(yQ - zQ, dr, state, cfg)
            order = 2
        if np.isfinite(err_n) and err_n <= 1.0:
            if cfg.scheme == "IMEX":
                Qn = np.fft.irfft(two[0], N)
                rn = np.full(N, two[1])
                mid_state = FlowState(np.fft.irfft(half[0], N), np.full(N, half[1]),
                                      state.t + dt / 2, state.cls)
            else:
                Qn = np.fft.irfft(yQ, N)
                rn = np.fft.irfft(yr, N)
            if np.any(rn <= 0):
                err = InversiveError("RHO_NONPOSITIVE", f"min rho = {rn.min():.3g} at t = {state.t + dt:.6g}")
                err.state = state
                raise err
            new_state = FlowState(Qn, rn, state.t + dt, state.cls)
            fac = 5.0 if err_n == 0 else min(5.0, max(0.2, 0.9 * err_n ** (-1.0 / (order + 1))))
            dt_next = min(dt * fac, cfg.dt_max)
            if cfg.scheme == "ERK":
                dt_next = min(dt_next, erk_dt_ceiling(new_state))
            return StepResult(new_state, dt, dt_next, mid_state, rejected)
        rejected += 1
        if np.isfinite(err_n):
            dt *= max(0.1, 0.9 * err_n ** (-1.0 / (order + 1)))
        else:
            dt *= 0.25


# ------------------------------------------------------------------ remesh


def _trig_eval(fhat: np.ndarray, N: int, x: np.ndarray) -> np.ndarray:
    """Evaluate the real trigonometric interpolant with rfft coefficients at x."""
    j = np.arange(len(fhat))
    w = np.full(len(fhat), 2.0)
    w[0] = 1.0
    if N % 2 == 0:
        w[-1] = 1.0
    phase = np.exp(2j * np.pi * np.outer(x, j))
    return (phase @ (w * fhat)).real / N


def remesh(state: FlowState, check: bool = True) -> FlowState:
    """Resample so that rho is constant (u proportional to invariant arc length)."""
    N = state.N
    if check:
        _check_resolution(np.fft.rfft(state.Q), N, float(np.max(np.abs(state.Q))))
    if _uniform(state.rho):
        return FlowState(state.Q, np.full(N, state.ell), state.t, state.cls)
    ell = state.ell
    rhat = np.fft.rfft(state.rho)
    k = wavenumbers(N)
    # s(u) = ell u + periodic part, with the periodic part from rho - ell
    phat = np.zeros_like(rhat)
    phat[1:] = rhat[1:] / (1j * k[1:])
    if N % 2 == 0:
        phat[-1] = 0.0
    p0 = _trig_eval(phat, N, np.zeros(1))[0]
    target = np.arange(N) / N
    x = target.copy()
    for _ in range(50):
        g = x + (_trig_eval(phat, N, x) - p0) / ell - target
        dg = _trig_eval(rhat, N, x) / ell
        dx = g / dg
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    Qn = _trig_eval(np.fft.rfft(state.Q), N, x)
    return FlowState(Qn, np.full(N, ell), state.t, state.cls)


# ------------------------------------------------------------------ evolve


def integrate_ds(f, rho) -> float:
    """Periodic integral of f ds = f rho du (spectrally exact trapezoid rule)."""
    return float(np.mean(np.asarray(f) * np.asarray(rho)))


@dataclass
class StepRecord:
    """Per-step bookkeeping used for monotonicity and Lyapunov checks.

    ``dissipated`` and ``lyap_increment`` are Simpson time integrals over the
    step of int Q_s^2 ds and of the dissipation bound
    (1/22)||Q_sss||^2 + (5/4)||Q_s Q||^2 + 2||Q_s||^2.  The first record of a
    trajectory describes the initial state and has dt = 0.
    """

    t: float
    dt: float
    ell: float
    dell: float
    dissipated: float
    normQ2: float
    normQs2: float
    lyap_increment: float


@dataclass
class Trajectory:
    snapshots: List[FlowState] = field(default_factory=list)
    records: List[StepRecord] = field(default_factory=list)
    reason: str = ""
    steps: int = 0
    rejected: int = 0
    remeshes: int = 0

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1]


def _norms(state: FlowState):
    d = s_derivatives(state.Q, state.rho, 3, check=False)
    r = state.rho
    Qs2 = integrate_ds(d[1] ** 2, r)
    lyap = (integrate_ds(d[3] ** 2, r) / 22.0 + 1.25 * integrate_ds((d[1] * d[0]) ** 2, r)
            + 2.0 * Qs2)
    return integrate_ds(d[0] ** 2, r), Qs2, lyap


def evolve(state0: FlowState, t_end: float, cfg: StepperConfig = StepperConfig(),
           observer: Optional[Callable] = None, snapshot_every: int = 10,
           stop_on_convergence: bool = True) -> Trajectory:
    """Integrate to ``t_end`` or until ||Q_s||_2 < 1e-10 three steps running.

    ``observer(state, record)`` is called after every accepted step.  A
    snapshot is stored every ``snapshot_every`` accepted steps and at the end.
    On a fatal stepper error the exception gets a ``trajectory`` attribute
    holding everything up to the last good state.
    """
    traj = Trajectory()
    state = state0
    traj.snapshots.append(state)
    Q2, Qs2, lyap = _norms(state)
    traj.records.append(StepRecord(state.t, 0.0, state.ell, 0.0, 0.0, Q2, Qs2, 0.0))
    if stop_on_convergence and math.sqrt(Qs2) < CONVERGED_QS:
        traj.reason = "converged"
        return traj
    dt = cfg.dt_init
    integ = _Etdrk4(state.N)
    confirmations = 0
    since_remesh = 0
    while state.t < t_end * (1 - 1e-14):
        if traj.steps >= cfg.max_steps:
            traj.reason = "max_steps"
            break
        h = min(dt, t_end - state.t)
        try:
            res = step(state, cfg, h, integ)
        except InversiveError as exc:
            traj.reason = exc.code
            if traj.snapshots[-1] is not state:
                traj.snapshots.append(state)
            exc.trajectory = traj
            raise
        new = res.state
        traj.steps += 1
        traj.rejected += res.rejected
        Q2n, Qs2n, lyapn = _norms(new)
        if res.mid is not None:
            _, Qs2m, lyapm = _norms(res.mid)
            dissipated = res.dt_used * (Qs2 + 4 * Qs2m + Qs2n) / 6.0
            lyap_int = res.dt_used * (lyap + 4 * lyapm + lyapn) / 6.0
        else:
            dissipated = res.dt_used * 0.5 * (Qs2 + Qs2n)
            lyap_int = res.dt_used * 0.5 * (lyap + lyapn)
        rec = StepRecord(new.t, res.dt_used, new.ell, new.ell - state.ell, dissipated,
                         Q2n, Qs2n, lyap_int)
        traj.records.append(rec)
        state, Q2, Qs2, lyap = new, Q2n, Qs2n, lyapn
        # only enlarge dt from the controller; the final clipped step must not shrink it
        dt = res.dt_next if h == dt or res.dt_next > dt else dt
        since_remesh += 1
        drift = float(np.max(np.abs(state.rho / state.ell - 1.0)))
        if since_remesh >= cfg.remesh_interval or drift > cfg.remesh_threshold:
            state = remesh(state, check=False)
            since_remesh = 0
            traj.remeshes += 1
        if observer is not None:
            observer(state, rec)
        if traj.steps % snapshot_every == 0:
            traj.snapshots.append(state)
        if math.sqrt(Qs2) < CONVERGED_QS:
            confirmations += 1
            if stop_on_convergence and confirmations >= CONVERGED_CONFIRMATIONS:
                traj.reason = "converged"
                break
        else:
            confirmations = 0
    else:
        traj.reason = "t_end"
    if traj.snapshots[-1] is not state:
        traj.snapshots.append(state)
    return traj


# ------------------------------------------------------------ initial data


def constant_state(Q0: float, ell: float, N: int = 256, cls=None) -> FlowState:
    return FlowState(np.full(N, float(Q0)), np.full(N, float(ell)), 0.0, cls)


def band_limited_noise(N: int, amplitude: float, max_mode: int, seed: int) -> np.ndarray:
    """Random real field with modes 1..max_mode, scaled to max |noise| = amplitude."""
    rng = np.random.default_rng(seed)
    coef = np.zeros(N // 2 + 1, dtype=complex)
    m = min(max_mode, N // 2 - 1)
    coef[1 : m + 1] = rng.normal(size=m) + 1j * rng.normal(size=m)
    f = np.fft.irfft(coef, N)
    return amplitude * f / np.max(np.abs(f))


def noisy_state(Q0: float, ell: float, N: int = 256, amplitude: float = 0.5,
                max_mode: int = 8, seed: int = 0) -> FlowState:
    """Q0 plus band-limited noise on a uniform-density period of length ell."""
    return FlowState(Q0 + band_limited_noise(N, amplitude, max_mode, seed),
                     np.full(N, float(ell)), 0.0, None)


def with_class(state: FlowState, cls: MonodromyClass) -> FlowState:
    return replace(state, cls=cls)
