"""Scalar functionals of flow states and checks of the flow's estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root

from .errors import InversiveError
from .flow import (FlowState, Trajectory, commutator_from_derivs, integrate_ds,
                   rhs_from_derivs, s_derivatives)
from .frenet import monodromy_class, normal_form, path_monodromy, path_turning, periodic_path
from .mobius import MonodromyClass


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_trajectory(cls, traj: Trajectory, name: str) -> "TimeSeries":
        """Series of a StepRecord field (e.g. 'ell', 'normQs2') over a trajectory."""
        return cls([r.t for r in traj.records], [getattr(r, name) for r in traj.records])


def length(state: FlowState) -> float:
    """Inversive length of one period, the integral of rho over u."""
    return state.ell


def sobolev_seminorm(state: FlowState, p: int) -> float:
    """Integral of (Q^(p))^2 ds."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return integrate_ds(state.Q**2, state.rho)
    d = s_derivatives(state.Q, state.rho, p)
    return integrate_ds(d[p] ** 2, state.rho)


@dataclass(frozen=True)
class LengthBound:
    corrected: float
    printed: float


def lox_length_bound(cls: MonodromyClass) -> LengthBound:
    """Upper bound for the length of an L-cocompact admissible period.

    ``corrected`` is sqrt((2 pi n + 2 theta) log(1/r^2)), attained by the
    loxodrome of the class; ``printed`` uses log(1/r) in place of log(1/r^2)
    and is reported for comparison only.
    """
    turning = cls.turning
    return LengthBound(math.sqrt(turning * math.log(1.0 / cls.r**2)),
                       math.sqrt(turning * math.log(1.0 / cls.r)))


def spiral_parameter(cls: MonodromyClass) -> float:
    """Growth parameter a of the loxodrome in the class (k = 1/(a w))."""
    return math.log(1.0 / cls.r**2) / cls.turning


def class_of_spiral(a: float, n: int = 1) -> MonodromyClass:
    """Class of the spiral with parameter a and n turns per period, theta = 0."""
    return MonodromyClass(math.exp(-math.pi * n * a), 0.0, n)


def _class_residual(Q, ell, target: MonodromyClass, upsample=8):
    N = len(Q)
    path = periodic_path(np.asarray(Q, dtype=float), np.full(N, ell), upsample)
    cls = normal_form(path_monodromy(path))
    turning = path_turning(path, cls.T)
    return np.array([math.log(cls.r) - math.log(target.r), turning - target.turning])


def match_loxodrome(cls: MonodromyClass, N: int = 64) -> Tuple[float, float]:
    """Numerically find (Q0, ell) whose loxodrome has the monodromy class ``cls``.

    Solves for the pair by measuring r and the total turning of integrated
    constant-Q paths; raises NO_MATCH when the solver does not converge.
    """
    def F(x):
        Q0, log_ell = x
        try:
            return _class_residual(np.full(N, Q0), math.exp(log_ell), cls)
        except InversiveError:
            return np.array([1e3, 1e3])

    # a = 1 loxodrome (Q = 0) turns by ell per unit length: start there
    x0 = np.array([0.0, math.log(cls.turning)])
    sol = root(F, x0, method="hybr", options={"xtol": 1e-13})
    if not sol.success or np.max(np.abs(F(sol.x))) > 1e-9:
        raise InversiveError("NO_MATCH", f"no loxodrome found for class r={cls.r}, theta={cls.theta}, n={cls.n}")
    return float(sol.x[0]), float(math.exp(sol.x[1]))


def predict_limit_Q(cls: MonodromyClass, method: str = "closed") -> float:
    """Constant Q of the loxodrome with the given monodromy class.

    ``closed``: (1 - a^2)/(4a) with a = log(1/r^2)/(2 pi n + 2 theta).
    ``numeric``: match an integrated loxodrome to the class.
    """
    if method == "closed":
        a = spiral_parameter(cls)
        return (1.0 - a * a) / (4.0 * a)
    if method == "numeric":
        return match_loxodrome(cls)[0]
    raise ValueError(f"unknown method {method!r}")


def fit_to_class(Q, target: MonodromyClass, ell0: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """Shift the mean of Q and choose the period length so (Q, ell) has class ``target``.

    Keeps the fluctuating part of Q; raises NO_MATCH if the solve fails.
    """
    Q = np.asarray(Q, dtype=float)
    fluct = Q - Q.mean()
    a = spiral_parameter(target)
    q_inf = (1.0 - a * a) / (4.0 * a)
    ell_guess = ell0 if ell0 is not None else math.sqrt(a) * target.turning

    def F(x):
        try:
            return _class_residual(fluct + x[0], math.exp(x[1]), target)
        except InversiveError:
            return np.array([1e3, 1e3])

    sol = root(F, np.array([q_inf, math.log(ell_guess)]), method="hybr", options={"xtol": 1e-13})
    if not sol.success or np.max(np.abs(F(sol.x))) > 1e-8:
        raise InversiveError("NO_MATCH", "could not place the profile in the requested class")
    return fluct + sol.x[0], float(math.exp(sol.x[1]))


def fit_decay_rate(series: TimeSeries, window: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """Least-squares exponential rate on a window (default: last third).

    Returns (lambda, R^2) with values ~ C exp(-lambda t).
    """
    t, v = series.times, series.values
    if window is None:
        window = (t[0] + 2.0 * (t[-1] - t[0]) / 3.0, t[-1])
    sel = (t >= window[0]) & (t <= window[1])
    t, v = t[sel], v[sel]
    if len(t) < 2:
        raise ValueError("window holds fewer than two points")
    if np.any(v <= 0):
        raise InversiveError("NONPOSITIVE_VALUES", "logarithmic fit needs positive values")
    y = np.log(v)
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return float(-slope), r2


@dataclass(frozen=True)
class DissipationReport:
    """Both sides of the identity for d/dt of the integral of Q^2 ds."""

    left: float
    right: float
    residual: float
    right_printed: float
    residual_printed: float
    young_bound: float

    @property
    def young_holds(self) -> bool:
        return self.right <= self.young_bound + 1e-12 * max(1.0, abs(self.young_bound))


def dissipation_report(state: FlowState, atol: float = 1e-14) -> DissipationReport:
    """Compare 2 int Q Q_t ds - int C Q^2 ds with its integrated-by-parts form.

    The right side is -1/2 int Q3^2 - 15 int Q^2 Q1^2 - 2 int Q1^2 - 5 int Q3 Q1 Q.
    The variant with -2 int Q2^2 in place of -2 int Q1^2 is reported as
    ``right_printed``; it does not hold in general.
    """
    d = s_derivatives(state.Q, state.rho, 6)
    rho = state.rho
    Q, Q1, Q2, Q3 = d[0], d[1], d[2], d[3]
    left = 2.0 * integrate_ds(Q * rhs_from_derivs(d), rho) - integrate_ds(commutator_from_derivs(d) * Q * Q, rho)
    common = (-0.5 * integrate_ds(Q3**2, rho) - 15.0 * integrate_ds(Q * Q * Q1 * Q1, rho)
              - 5.0 * integrate_ds(Q3 * Q1 * Q, rho))
    right = common - 2.0 * integrate_ds(Q1**2, rho)
    right_printed = common - 2.0 * integrate_ds(Q2**2, rho)
    scale = max(abs(left), atol)
    young = (-2.0 * integrate_ds(Q1**2, rho) - integrate_ds(Q3**2, rho) / 22.0
             - 1.25 * integrate_ds(Q * Q * Q1 * Q1, rho))
    return DissipationReport(left, right, abs(left - right) / scale, right_printed,
                             abs(left - right_printed) / scale, young)


@dataclass(frozen=True)
class MonotonicityReport:
    ell_max_decrease: float
    normQ2_max_increase: float
    lyapunov_max_increase: float
    dell_max_relerr: float
    dell_checked_steps: int

    def ok(self, tol: float, dell_tol: float = 0.01) -> bool:
        return (self.ell_max_decrease <= tol and self.normQ2_max_increase <= tol
                and self.lyapunov_max_increase <= tol and self.dell_max_relerr <= dell_tol)


def lyapunov_series(traj: Trajectory) -> TimeSeries:
    """||Q||^2 plus the accumulated dissipation bound; nonincreasing in theory."""
    acc = np.cumsum([r.lyap_increment for r in traj.records])
    vals = np.array([r.normQ2 for r in traj.records]) + acc
    return TimeSeries([r.t for r in traj.records], vals)


def monotonicity_report(traj: Trajectory, dell_floor: float = 1e-10) -> MonotonicityReport:
    """Largest violations of the monotone quantities, relative to their scale.

    The length increment is compared with the Simpson-integrated dissipation
    only on steps where the increment exceeds ``dell_floor`` times ell, since
    smaller increments are lost in rounding of ell itself.
    """
    recs = traj.records
    ell = np.array([r.ell for r in recs])
    q2 = np.array([r.normQ2 for r in recs])
    lyap = lyapunov_series(traj).values
    d_ell = -np.min(np.append(np.diff(ell), 0.0)) / ell.max()
    d_q2 = np.max(np.append(np.diff(q2), 0.0)) / max(q2.max(), 1e-300)
    d_ly = np.max(np.append(np.diff(lyap), 0.0)) / max(lyap.max(), 1e-300)
    errs = [abs(r.dell / r.dissipated - 1.0) for r in recs[1:]
            if r.dell > dell_floor * r.ell and r.dissipated > 0]
    return MonotonicityReport(float(d_ell), float(d_q2), float(d_ly),
                              float(max(errs)) if errs else 0.0, len(errs))


def run_report(traj: Trajectory, cls: Optional[MonodromyClass] = None) -> str:
    """Plain-text summary of a trajectory."""
    first, last = traj.snapshots[0], traj.final
    lines = [
        f"termination: {traj.reason}",
        f"steps accepted: {traj.steps}  rejected: {traj.rejected}  remeshes: {traj.remeshes}",
        f"time: {first.t:.6g} -> {last.t:.6g}",
        f"length: {first.ell:.12g} -> {last.ell:.12g}",
        f"int Q^2 ds: {traj.records[0].normQ2:.6e} -> {traj.records[-1].normQ2:.6e}",
        f"int Q_s^2 ds: {traj.records[0].normQs2:.6e} -> {traj.records[-1].normQs2:.6e}",
        f"terminal Q: mean {np.mean(last.Q):.12g}  spread {np.ptp(last.Q):.3e}",
    ]
    if traj.steps == 0 and traj.reason == "converged":
        lines.append("initial data already loxodromic: no decay to observe")
    if cls is not None:
        bound = lox_length_bound(cls)
        lines += [
            f"monodromy class: r={cls.r:.12g} theta={cls.theta:.12g} n={cls.n}",
            f"predicted Q_inf: {predict_limit_Q(cls):.12g}  measured: {np.mean(last.Q):.12g}",
            f"length bound: corrected {bound.corrected:.12g}  printed variant {bound.printed:.12g}",
        ]
    mono = monotonicity_report(traj)
    lines += [
        f"max relative decrease of length: {mono.ell_max_decrease:.3e}",
        f"max relative increase of int Q^2: {mono.normQ2_max_increase:.3e}",
        f"max relative increase of Lyapunov sum: {mono.lyapunov_max_increase:.3e}",
        f"dl/dt vs int Q_s^2: max rel. error {mono.dell_max_relerr:.3e} over {mono.dell_checked_steps} steps",
    ]
    if len(traj.records) >= 6:
        try:
            lam, r2 = fit_decay_rate(TimeSeries.from_trajectory(traj, "normQs2"))
            lines.append(f"decay rate of int Q_s^2 (last third): {lam:.6g}  R^2 = {r2:.6f}")
        except (InversiveError, ValueError) as exc:
            lines.append(f"decay rate: unavailable ({exc})")
    return "\n".join(lines) + "\n"


def measured_class(state: FlowState) -> MonodromyClass:
    """Monodromy class (with winding) of a flow state."""
    return monodromy_class(state.Q, state.rho)
