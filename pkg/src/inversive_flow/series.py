"""Truncated power series in one real variable.

A series is a 1-D coefficient array ``c`` standing for sum c[j] x**j.
Results keep the length of the shortest operand (derivatives lose one
coefficient).  Used to evaluate exact jets of analytic test curves.
"""

import numpy as np


def mul(a, b):
    n = min(len(a), len(b))
    return np.convolve(a[:n], b[:n])[:n]


def reciprocal(a):
    a = np.asarray(a)
    if a[0] == 0:
        raise ZeroDivisionError("series has zero constant term")
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = 1.0 / a[0]
    for m in range(1, len(a)):
        out[m] = -np.dot(a[1 : m + 1], out[m - 1 :: -1][:m]) / a[0]
    return out


def div(a, b):
    return mul(a, reciprocal(b))


def sqrt(a):
    a = np.asarray(a)
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = np.sqrt(a[0])
    for m in range(1, len(a)):
        acc = np.dot(out[1:m], out[m - 1 : 0 : -1]) if m > 1 else 0.0
        out[m] = (a[m] - acc) / (2 * out[0])
    return out


def power(a, p):
    out = np.zeros_like(a, dtype=np.result_type(a, float))
    out[0] = 1.0
    for _ in range(p):
        out = mul(out, a)
    return out


def deriv(a):
    a = np.asarray(a)
    return a[1:] * np.arange(1, len(a))


def integ(a, c0=0.0):
    a = np.asarray(a)
    out = np.zeros(len(a) + 1, dtype=a.dtype)
    out[0] = c0
    out[1:] = a / np.arange(1, len(a) + 1)
    return out


def taylor(f_derivs):
    """Series coefficients from derivative values f(0), f'(0), f''(0), ..."""
    d = np.asarray(f_derivs)
    fact = np.cumprod(np.r_[1.0, np.arange(1, len(d))])
    return d / fact


def evaluate(a, x):
    return np.polynomial.polynomial.polyval(x, a)


def matrix_linear_ode(M, Y0, order):
    """Series of Y with Y' = Y M(x), Y(0) = Y0, for a 2x2 matrix series M.

    ``M`` has shape (K, 2, 2); returns shape (order, 2, 2).
    """
    K = M.shape[0]
    Y = np.zeros((order, 2, 2), dtype=complex)
    Y[0] = Y0
    for m in range(order - 1):
        acc = np.zeros((2, 2), dtype=complex)
        for j in range(m + 1):
            if m - j < K:
                acc += Y[j] @ M[m - j]
        Y[m + 1] = acc / (m + 1)
    return Y
