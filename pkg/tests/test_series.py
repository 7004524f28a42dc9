import numpy as np

from inversive_flow import series


def test_reciprocal_and_division():
    a = np.array([2.0, 1.0, -0.5, 0.25, 0.0])
    one = series.mul(a, series.reciprocal(a))
    assert np.allclose(one, [1, 0, 0, 0, 0], atol=1e-15)
    assert np.allclose(series.div(a, a), [1, 0, 0, 0, 0], atol=1e-15)


def test_sqrt_squares_back():
    a = np.array([4.0, 1.0, 3.0, -2.0, 0.5])
    r = series.sqrt(a)
    assert np.allclose(series.mul(r, r), a, atol=1e-14)


def test_exp_series_from_ode():
    # Y' = Y M with constant M gives the exponential
    M = np.array([[[0.0, -1.0], [0.3 + 0.5j, 0.0]]])
    Y = series.matrix_linear_ode(M, np.eye(2), 12)
    x = 0.4
    approx = np.einsum("k,kij->ij", x ** np.arange(12), Y)
    from scipy.linalg import expm
    assert np.max(np.abs(approx - expm(x * M[0]))) < 1e-12


def test_taylor_and_evaluate():
    c = series.taylor([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    assert abs(series.evaluate(c, 0.3) - np.exp(0.3)) < 1e-12
    assert np.allclose(series.deriv(series.integ(c)), c)
