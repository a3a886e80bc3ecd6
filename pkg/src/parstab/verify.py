"""Self-checks run by ``parstab verify``.

Each function returns plain numbers so the CLI can assemble a JSON report.
"""

from __future__ import annotations

import numpy as np

from .clf import GeneratorPair
from .sontag import Branch, candidate_controls, closed_form_lhv, sontag_feedback


def _central_batch(f, x, i, h):
    e = np.zeros(x.shape[-1])
    e[i] = h
    return (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h)


def _richardson_batch(f, x, i, h):
    return (4.0 * _central_batch(f, x, i, h / 2.0) - _central_batch(f, x, i, h)) / 3.0


def derivative_errors(clf, states, h=1e-5):
    """Worst norm-wise relative error of the analytic gradient and Hessian.

    Gradient is compared with Richardson-extrapolated central differences of
    V, Hessian with the same differences of the analytic gradient. Errors are
    ``max|analytic - fd| / max(max|fd|, 1e-12)`` per state.
    """
    x = np.atleast_2d(np.asarray(states, dtype=float))
    n = x.shape[1]
    fd_grad = np.stack([_richardson_batch(clf.value, x, i, h) for i in range(n)], axis=-1)
    fd_hess = np.stack([_richardson_batch(clf.gradient, x, i, h) for i in range(n)], axis=-1)
    grad = clf.gradient(x)
    hess = clf.hessian(x)

    def worst(approx, ref):
        axes = tuple(range(1, ref.ndim))
        scale = np.maximum(np.max(np.abs(ref), axis=axes), 1e-12)
        return float(np.max(np.max(np.abs(approx - ref), axis=axes) / scale))

    return worst(grad, fd_grad), worst(hess, fd_hess)


def hessian_asymmetry(clf, states):
    h = clf.hessian(np.atleast_2d(np.asarray(states, dtype=float)))
    diff = np.abs(h - np.swapaxes(h, -1, -2))
    scale = np.maximum(np.max(np.abs(h), axis=(-2, -1)), 1e-300)
    return float(np.max(np.max(diff, axis=(-2, -1)) / scale))


def random_triples(rng, count, k):
    """(a, b, alpha) spread over several orders of magnitude."""
    a = rng.standard_normal(count) * 10.0 ** rng.uniform(-3, 3, count)
    b = rng.standard_normal((count, k)) * (10.0 ** rng.uniform(-3, 3, count))[:, None]
    alpha = np.abs(rng.standard_normal(count)) * 10.0 ** rng.uniform(-3, 3, count)
    return a, b, alpha


def piecewise_identity_error(a, b, alpha, tol_b=1e-12):
    """Worst relative gap between a + b.h and the branchwise closed form."""
    pair = GeneratorPair(a, b)
    fb = sontag_feedback(pair, alpha, tol_b)
    ref = closed_form_lhv(pair, alpha, tol_b)
    scale = np.maximum(np.abs(ref), 1e-300)
    nonzero = fb.branch != Branch.ZERO_B
    return float(np.max(np.abs(fb.lhv - ref)[nonzero] / scale[nonzero]))


def boundary_triples(rng, count, k):
    """Triples sitting exactly on 2 sqrt(a^2 + |b|^4) = alpha."""
    b = rng.standard_normal((count, k)) * (10.0 ** rng.uniform(-2, 2, count))[:, None]
    nb2 = np.sum(b * b, axis=1)
    a = nb2 * rng.uniform(-5.0, 5.0, count)
    alpha = 2.0 * np.hypot(a, nb2)
    return a, b, alpha


def boundary_gap(a, b, alpha):
    """Worst gap between the two non-zero branch controls, relative to the
    natural control scale (|a| + sqrt(a^2 + |b|^4)) / |b|."""
    u_rad, u_floor = candidate_controls(GeneratorPair(a, b), alpha)
    nb2 = np.sum(b * b, axis=-1)
    scale = (np.abs(a) + np.hypot(a, nb2)) / np.sqrt(nb2)
    return float(np.max(np.max(np.abs(u_rad - u_floor), axis=-1) / scale))
