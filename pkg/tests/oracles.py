"""Exact jets of analytic test curves, used as independent oracles.

Everything here works with truncated Taylor series, so no spline or
finite-difference error enters the reference values.
"""

import numpy as np

from inversive_flow import series
from inversive_flow.frenet import gauss_inverse_series
from inversive_flow.invariants import gauss_frame_from_jet

ORDER = 9


def euclidean_jet(zc):
    """(z0, phi, k, k_u, k_uu, k_uuu) at x = 0 of the curve with series zc(x)."""
    x, y = zc.real.astype(float), zc.imag.astype(float)
    dx, dy = series.deriv(x), series.deriv(y)
    ddx, ddy = series.deriv(dx), series.deriv(dy)
    v = series.sqrt(series.mul(dx, dx) + series.mul(dy, dy))
    cross = series.mul(dx, ddy) - series.mul(dy, ddx)
    k = series.div(cross, series.power(v, 3)[: len(cross)])
    out = [k]
    for _ in range(3):
        d = series.deriv(out[-1])
        out.append(series.div(d, v[: len(d)]))
    return (zc[0], float(np.arctan2(dy[0], dx[0])), *[float(c[0]) for c in out])


def curve_series(G_base, Q_derivs, f_derivs=None, eps=0.0, order=ORDER):
    """Series in h of z(s0 + h) for the curve with Gauss map G_base at s0.

    With ``f_derivs`` the curve is pushed along its inversive normal: the
    chart point [0;1] at each s is replaced by [i eps f(s); 1].
    """
    P = gauss_inverse_series(Q_derivs, order)
    Ginv = np.einsum("ij,kjl->kil", np.linalg.inv(G_base), P)
    w = np.zeros(order, dtype=complex)
    if f_derivs is not None:
        w[: len(f_derivs)] = 1j * eps * series.taylor(f_derivs)[:order]
    num = series.mul(Ginv[:, 0, 0], w) + Ginv[:, 0, 1]
    den = series.mul(Ginv[:, 1, 0], w) + Ginv[:, 1, 1]
    return series.div(num, den)


def gauss_frame_exact(G_base, Q_derivs, f_derivs=None, eps=0.0):
    """Gauss map at s0 of the (possibly perturbed) curve, from exact jets."""
    z0, phi, k, k1, k2, _ = euclidean_jet(curve_series(G_base, Q_derivs, f_derivs, eps))
    return gauss_frame_from_jet(z0, phi, k, k1, k2).matrix


def q_from_series(zc):
    """Q at x = 0 from the exact Euclidean jet."""
    _, _, k, k1, k2, k3 = euclidean_jet(zc)
    return 0.25 * k**2 / k1 + (5.0 / 16.0) * k2**2 / k1**3 - 0.25 * k3 / k1**2
