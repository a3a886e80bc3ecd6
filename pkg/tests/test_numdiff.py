import numpy as np
import pytest

from parstab import numdiff


def f(x):
    return np.sin(x[0]) * np.exp(x[1]) + x[0] ** 3 * x[1]


def grad_f(x):
    return np.array(
        [np.cos(x[0]) * np.exp(x[1]) + 3 * x[0] ** 2 * x[1], np.sin(x[0]) * np.exp(x[1]) + x[0] ** 3]
    )


@pytest.mark.parametrize("x", [np.array([0.3, -0.7]), np.array([1.5, 0.2]), np.array([-2.0, 1.0])])
def test_gradient_richardson(x):
    assert numdiff.max_relative_error(numdiff.gradient(f, x), grad_f(x)) < 1e-10


def test_jacobian_of_gradient_is_hessian():
    x = np.array([0.4, 0.1])
    hess = np.array(
        [
            [-np.sin(x[0]) * np.exp(x[1]) + 6 * x[0] * x[1], np.cos(x[0]) * np.exp(x[1]) + 3 * x[0] ** 2],
            [np.cos(x[0]) * np.exp(x[1]) + 3 * x[0] ** 2, np.sin(x[0]) * np.exp(x[1])],
        ]
    )
    assert numdiff.max_relative_error(numdiff.jacobian(grad_f, x), hess) < 1e-9


def test_second_derivative():
    x = np.array([0.4, 0.1])
    exact = -np.sin(0.4) * np.exp(0.1) + 6 * 0.4 * 0.1
    assert numdiff.second_derivative(f, x, 0, h=1e-3) == pytest.approx(exact, rel=1e-7)


def test_richardson_beats_plain_central_difference():
    x = np.array([1.0, 0.5])
    h = 1e-2
    plain = numdiff._central(f, x, 0, h)
    rich = numdiff.derivative(f, x, 0, h)
    assert abs(rich - grad_f(x)[0]) < abs(plain - grad_f(x)[0]) / 100


def test_max_relative_error_floor():
    assert numdiff.max_relative_error([1e-15], [0.0]) == pytest.approx(1e-3)
