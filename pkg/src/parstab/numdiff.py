"""Central finite differences with one Richardson extrapolation step."""

import numpy as np


def _central(f, x, i, h):
    e = np.zeros_like(x)
    e[i] = h
    return (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)


def derivative(f, x, i, h=1e-5):
    """d f / d x_i at ``x``; ``f`` may be scalar- or array-valued.

    Combines steps ``h`` and ``h/2`` so the O(h^2) error term cancels.
    """
    x = np.asarray(x, dtype=float)
    d1 = _central(f, x, i, h)
    d2 = _central(f, x, i, h / 2.0)
    return (4.0 * d2 - d1) / 3.0


def gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    return np.array([derivative(f, x, i, h) for i in range(x.size)])


def jacobian(f, x, h=1e-5):
    """Rows are outputs, columns are inputs."""
    x = np.asarray(x, dtype=float)
    return np.stack([derivative(f, x, i, h) for i in range(x.size)], axis=-1)


def second_derivative(f, x, i, h=1e-5):
    """Central second difference along x_i, Richardson-extrapolated."""
    x = np.asarray(x, dtype=float)

    def d2(step):
        e = np.zeros_like(x)
        e[i] = step
        return (f(x + e) - 2.0 * f(x) + f(x - e)) / step**2

    return (4.0 * d2(h / 2.0) - d2(h)) / 3.0


def max_relative_error(approx, reference, floor=1e-12):
    """Norm-wise relative error ``max|approx - ref| / max(max|ref|, floor)``."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = max(float(np.max(np.abs(reference))), floor)
    return float(np.max(np.abs(approx - reference))) / scale
