"""Serret-Frenet integration of the inversive Gauss map.

The Gauss map of an admissible curve solves dG/ds = M(s) G with
M = [[0, -1], [Q + i/2, 0]] in the invariant arc length s, and the curve
is X = G^{-1}[0; 1].  This module integrates that system, evaluates the
constant-Q (loxodrome) closed form, and extracts periodic monodromy.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import InversiveError
from .invariants import SampledCurve
from .mobius import MobiusMap, MonodromyClass, normal_form, three_point_map

RENORM_LIMIT = 1e-3


def frenet_matrix(Q):
    """M(Q) = [[0, -1], [Q + i/2, 0]], broadcast over array-valued Q."""
    Q = np.asarray(Q, dtype=float)
    M = np.zeros(Q.shape + (2, 2), dtype=complex)
    M[..., 0, 1] = -1.0
    M[..., 1, 0] = Q + 0.5j
    return M


@dataclass(frozen=True)
class GaussPath:
    """Gauss maps G[i] (det 1) sampled at s[i], with the invariant Q[i]."""

    s: np.ndarray
    G: np.ndarray
    Q: np.ndarray
    det_drift: float = 0.0

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i) -> MobiusMap:
        return MobiusMap(self.G[i])

    def inverse_columns(self):
        """Homogeneous curve point W = G^-1 [0;1] and its s-derivative G^-1 [1;0]."""
        G = self.G
        W = np.stack([-G[:, 0, 1], G[:, 0, 0]], axis=-1)
        dW = np.stack([G[:, 1, 1], -G[:, 1, 0]], axis=-1)
        return W, dW


@dataclass(frozen=True)
class LoxodromeSpec:
    Q0: float
    G_init: MobiusMap = None

    def __post_init__(self):
        if self.G_init is None:
            object.__setattr__(self, "G_init", MobiusMap.identity())


def _midpoints(Q, s, periodic):
    if periodic:
        n = len(Q)
        coef = np.fft.rfft(Q)
        shift = np.exp(1j * np.pi * np.arange(len(coef)) / n)
        if n % 2 == 0:
            shift[-1] = 0.0
        return np.fft.irfft(coef * shift, n)
    return CubicSpline(s, Q)(0.5 * (s[:-1] + s[1:]))


def integrate_gauss(
    Q: Union[Sequence[float], Callable],
    h: float,
    G_init: Optional[MobiusMap] = None,
    n_steps: Optional[int] = None,
    periodic: bool = False,
) -> GaussPath:
    """Classical RK4 on dG/ds = M(Q(s)) G with per-step det renormalisation.

    ``Q`` is either a callable of s or samples on the grid s_i = i*h.  For
    samples, half-step values come from a cubic spline (or from the Fourier
    interpolant when ``periodic`` is set, in which case the path runs one
    full period, i.e. ``len(Q)`` steps).
    """
    G0 = np.eye(2, dtype=complex) if G_init is None else np.array(G_init.matrix)
    if callable(Q):
        if n_steps is None:
            raise ValueError("n_steps is required when Q is a callable")
        s = h * np.arange(n_steps + 1)
        q_nodes = np.asarray(Q(s), dtype=float)
        q_mid = np.asarray(Q(s[:-1] + 0.5 * h), dtype=float)
    else:
        q = np.asarray(Q, dtype=float)
        if periodic:
            q_nodes = np.r_[q, q[0]]
            q_mid = _midpoints(q, None, True)
        else:
            q_nodes = q
            s_tmp = h * np.arange(len(q))
            q_mid = _midpoints(q, s_tmp, False)
        s = h * np.arange(len(q_nodes))
    M_nodes = frenet_matrix(q_nodes)
    M_mid = frenet_matrix(q_mid)
    n = len(s)
    G = np.empty((n, 2, 2), dtype=complex)
    G[0] = G0
    drift = 0.0
    g = G0
    for i in range(n - 1):
        k1 = M_nodes[i] @ g
        k2 = M_mid[i] @ (g + 0.5 * h * k1)
        k3 = M_mid[i] @ (g + 0.5 * h * k2)
        k4 = M_nodes[i + 1] @ (g + h * k3)
        g = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        err = abs(det - 1.0)
        if err > RENORM_LIMIT:
            raise InversiveError("STEP_TOO_LARGE", f"det drift {err:.3g} at step {i}")
        drift = max(drift, err)
        g = g / np.sqrt(det)
        G[i + 1] = g
    return GaussPath(s, G, q_nodes, drift)


def _lox_exp(Q0, s):
    """exp(s M) for constant Q0, vectorised over s; shape (len(s), 2, 2)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    q = Q0 + 0.5j
    rq = np.sqrt(complex(q))
    x = rq * s
    small = np.abs(x) < 1e-4
    cosx = np.cos(x)
    sinc = np.where(small, s * (1 - x**2 / 6 + x**4 / 120), np.sin(x) / rq)
    M = frenet_matrix(Q0)
    out = cosx[:, None, None] * np.eye(2) + sinc[:, None, None] * M
    return out


def loxodrome(spec: LoxodromeSpec, s: float) -> MobiusMap:
    """Closed form G(s) = exp(s M) G_init for constant Q."""
    E = _lox_exp(spec.Q0, s)[0]
    return MobiusMap(E @ spec.G_init.matrix)


def loxodrome_path(spec: LoxodromeSpec, s: Sequence[float]) -> GaussPath:
    s = np.asarray(s, dtype=float)
    G = _lox_exp(spec.Q0, s) @ spec.G_init.matrix
    return GaussPath(s, G, np.full(len(s), float(spec.Q0)))


def spiral_frame(Q0: float) -> MobiusMap:
    """G_init for which the loxodrome projects to z = exp((-a + i) tau), z(0) = 1.

    Here tau = 2 Re(sqrt(Q0 + i/2)) s, the spiral runs inward counter-clockwise
    (the admissible orientation) and a = Im(sqrt q)/Re(sqrt q).
    """
    M = frenet_matrix(Q0)
    w, V = np.linalg.eig(M)
    # order so that the first eigenvalue is -i sqrt(q)
    rq = np.sqrt(complex(Q0 + 0.5j))
    if abs(w[0] - (-1j * rq)) > abs(w[1] - (-1j * rq)):
        V = V[:, ::-1]
    Vinv = np.linalg.inv(V)
    c = Vinv @ np.array([0.0, 1.0])
    # X(s) = G_init^-1 exp(-sM) [0;1]; with G_init^-1 = P V^-1 the ratio of
    # eigen-components evolves as exp(-2 i sqrt(q) s) -> swap for inward spiral
    mu2 = c[1] / c[0]
    P = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    D = np.diag([np.sqrt(mu2), 1.0 / np.sqrt(mu2)])
    Ginv = D @ P @ Vinv
    # the frame above traces exp((a - i) tau) * (-1); z -> -1/z turns it inward
    flip = MobiusMap([[0.0, 1.0], [-1.0, 0.0]])
    return MobiusMap(Ginv).inverse() @ flip


def path_points(path: GaussPath, base: Optional[MobiusMap] = None) -> np.ndarray:
    """Plane points z(s) of X(s) = G(s)^-1 [0; 1], optionally moved by ``base``."""
    z, _ = _project(path, base)
    return z


def _project(path: GaussPath, base: Optional[MobiusMap]):
    G = path.G
    if base is not None:
        G = G @ base.inverse().matrix
    W = np.stack([-G[:, 0, 1], G[:, 0, 0]], axis=-1)
    scale = np.abs(W).max(axis=1)
    if np.any(np.abs(W[:, 1]) <= 1e-12 * scale):
        raise InversiveError("PROJECTION_AT_INFINITY", "a sample projects to infinity")
    return W[:, 0] / W[:, 1], W[:, 1]


def reconstruct_curve(path: GaussPath, base: Optional[MobiusMap] = None) -> SampledCurve:
    """Project X(s) = G(s)^-1 [0;1] to the plane, with Euclidean arc length.

    ``base`` optionally post-composes a Moebius map (to move a pole away).
    """
    z, w2 = _project(path, base)
    # dz/ds = 1 / W2^2 because det(G^-1) = 1
    speed = 1.0 / np.abs(w2) ** 2
    s = path.s
    if len(s) > 6:
        u = make_interp_spline(s, speed, k=5).antiderivative()(s)
    else:
        u = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(s))])
    u = u - u[0]
    return SampledCurve(u, z)


def taylor_gauss_inverse(Q, Q_s, Q_ss, Q_sss, s) -> MobiusMap:
    """G(0) G^-1(s) through the s^4 term, from the jet of Q at s = 0."""
    q = Q + 0.5j
    w = Q_ss - Q * Q + 0.25 - 1j * Q
    I = np.eye(2)
    c1 = np.array([[0, -1], [q, 0]])
    c2 = np.array([[q, 0], [Q_s, q]])
    c3 = np.array([[2 * Q_s, q], [w, Q_s]])
    c4 = np.array([[3 * Q_ss - Q * Q + 0.25 - 1j * Q, 2 * Q_s],
                   [Q_sss - 4 * Q * Q_s - 2j * Q_s, w]])
    P = I - s * c1 - s**2 / 2 * c2 - s**3 / 6 * c3 - s**4 / 24 * c4
    return MobiusMap(P)


def gauss_inverse_series(Q_derivs, order: int) -> np.ndarray:
    """Power series of G(0) G^-1(s) from the derivatives Q, Q_s, Q_ss, ... at 0."""
    from . import series

    qc = series.taylor(Q_derivs)
    K = len(qc)
    Mser = np.zeros((K, 2, 2), dtype=complex)
    Mser[0] = frenet_matrix(qc[0])
    Mser[1:, 1, 0] = qc[1:]
    return series.matrix_linear_ode(-Mser, np.eye(2), order)


def variation_generator(f, f_s, f_ss, f_sss, f_ssss, Q, Q_s, Q_ss) -> np.ndarray:
    """Traceless T with dG/dt = T G under the normal variation dX/dt = f N."""
    A = 0.25 * f_sss + Q * f_s + 0.5 * Q_s * f - 0.5j * f_s
    B = -1j * f
    C = (-0.25 * f_ssss - Q * f_ss - 1.5 * Q_s * f_s - 0.5 * (Q_ss + 1.0) * f
         + 1j * (0.5 * f_ss + Q * f))
    return np.array([[A, B], [C, -A]], dtype=complex)


def _fourier_upsample(f, factor):
    n = len(f)
    m = n * factor
    coef = np.fft.rfft(f)
    out = np.zeros(m // 2 + 1, dtype=complex)
    out[: len(coef)] = coef
    if n % 2 == 0:
        out[n // 2] *= 0.5
    return np.fft.irfft(out, m) * factor


def periodic_path(Q, rho, upsample: int = 8) -> GaussPath:
    """Gauss path over one period of a periodic (Q, rho) state, G(0) = I.

    Integrates dG/du = rho(u) M(Q(u)) G on a Fourier-refined u-grid with RK4;
    the returned ``s`` holds invariant arc length at the refined nodes.
    """
    Q = np.asarray(Q, dtype=float)
    rho = np.asarray(rho, dtype=float)
    n = len(Q)
    m = 2 * upsample * n
    q_f = _fourier_upsample(Q, 2 * upsample)
    r_f = _fourier_upsample(rho, 2 * upsample)
    du = 2.0 / m
    q_f = np.r_[q_f, q_f[0]]
    r_f = np.r_[r_f, r_f[0]]
    A = r_f[:, None, None] * frenet_matrix(q_f)
    nodes = upsample * n
    G = np.empty((nodes + 1, 2, 2), dtype=complex)
    g = np.eye(2, dtype=complex)
    G[0] = g
    drift = 0.0
    for i in range(nodes):
        a0, am, a1 = A[2 * i], A[2 * i + 1], A[2 * i + 2]
        k1 = a0 @ g
        k2 = am @ (g + 0.5 * du * k1)
        k3 = am @ (g + 0.5 * du * k2)
        k4 = a1 @ (g + du * k3)
        g = g + (du / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        drift = max(drift, abs(det - 1.0))
        g = g / np.sqrt(det)
        G[i + 1] = g
    # invariant arc length at the nodes: cumulative integral of rho
    r_nodes = r_f[::2]
    s = np.concatenate([[0.0], np.cumsum(du / 6.0 * (r_f[0:-2:2] + 4 * r_f[1:-1:2] + r_f[2::2]))])
    return GaussPath(s, G, q_f[::2], drift)


def path_monodromy(path: GaussPath) -> MobiusMap:
    """L with X(s + period) = L X(s), for a path spanning one period from G = I."""
    return MobiusMap(path.G[-1]).inverse() @ MobiusMap(path.G[0])


def path_turning(path: GaussPath, T: MobiusMap) -> float:
    """Total Euclidean turning of the projected curve T X along the path."""
    Ginv = np.linalg.inv(path.G)
    W = np.einsum("ij,njk->nik", T.matrix, Ginv)[:, :, 1]
    # tangent of the projected curve is 1/W2^2
    ang = np.unwrap(np.angle(W[:, 1]))
    return float(-2.0 * (ang[-1] - ang[0]))


def monodromy_class(Q, rho, upsample: int = 8, tol: float = 0.05) -> MonodromyClass:
    """Conjugacy class and winding integer of a periodic (Q, rho) state."""
    path = periodic_path(Q, rho, upsample)
    L = path_monodromy(path)
    cls = normal_form(L)
    turning = path_turning(path, cls.T)
    x = (turning - 2 * cls.theta) / (2 * math.pi)
    n = int(round(x))
    if abs(x - n) > tol:
        raise InversiveError("NONINTEGRAL", f"winding residual {abs(x - n):.3g}")
    return cls.with_winding(n)


def monodromy_trace(Q, rho, upsample: int = 8) -> complex:
    """Trace of the per-period monodromy, sign fixed by Re >= 0 (PSL)."""
    path = periodic_path(Q, rho, upsample)
    tr = path_monodromy(path).trace
    return -tr if tr.real < 0 else tr


def best_fit_mobius(z_src, z_dst) -> MobiusMap:
    """Moebius map through three well-separated correspondences src -> dst."""
    z_src = np.asarray(z_src)
    z_dst = np.asarray(z_dst)
    n = len(z_src)
    idx = [0, n // 3, (2 * n) // 3]
    return three_point_map(z_src[idx], z_dst[idx])


def alignment_error(z_src, z_dst) -> tuple:
    """Max distance after best-fit alignment, relative to the target diameter."""
    M = best_fit_mobius(z_src, z_dst)
    moved = M.act(z_src)
    diam = np.ptp(z_dst.real) + np.ptp(z_dst.imag)
    diam = max(float(np.max(np.abs(z_dst - z_dst.mean()))) * 2, 1e-300) if diam == 0 else diam
    err = float(np.max(np.abs(moved - z_dst))) / diam
    return err, M


@dataclass(frozen=True)
class RoundTrip:
    """Outcome of measuring Q on a curve and rebuilding the curve from it."""

    error: float
    alignment: MobiusMap
    s: np.ndarray
    Q: np.ndarray
    rebuilt: np.ndarray
    target: np.ndarray


def roundtrip(curve: SampledCurve, window=(1.0 / 3.0, 2.0 / 3.0),
              smoothing: Optional[float] = None) -> RoundTrip:
    """curve -> Q(s) -> Serret-Frenet integration -> best-fit Moebius alignment.

    Only the fraction ``window`` of the samples is rebuilt, because spline
    derivatives are least accurate near the ends of the data.  The rebuilt
    points are compared with the input at equal invariant arc length, and
    the error is the largest distance after alignment relative to the
    diameter of the compared piece.
    """
    from .invariants import (curvature_jet, fundamental_invariant_raw, gauss_map_at,
                             invariant_arclength)

    jet = curvature_jet(curve, smoothing)
    s = invariant_arclength(jet)
    Q = fundamental_invariant_raw(jet)
    n = len(curve)
    i0, i1 = int(window[0] * (n - 1)), int(window[1] * (n - 1))
    if i1 - i0 < 8:
        raise InversiveError("TOO_FEW_SAMPLES", "round-trip window holds fewer than 8 samples")
    sl = slice(i0, i1 + 1)
    q_spline = make_interp_spline(s[sl], Q[sl], k=5)
    m = i1 - i0
    h = (s[i1] - s[i0]) / m
    path = integrate_gauss(lambda x: q_spline(x + s[i0]), h, gauss_map_at(curve, jet, i0).G, m)
    rebuilt = reconstruct_curve(path).z
    grid = s[i0] + h * np.arange(m + 1)
    zs = make_interp_spline(s, np.c_[curve.z.real, curve.z.imag], k=7)(grid)
    target = zs[:, 0] + 1j * zs[:, 1]
    err, M = alignment_error(rebuilt, target)
    return RoundTrip(err, M, s[sl], Q[sl], rebuilt, target)
