"""Stochastic double integrator with a free integrating coordinate.

    dx1 = x2 dt,  dx2 = u dt + lam x2 dw,  dx3 = x1 dt

y = (x1, x2); x3 stays bounded whenever x1 decays, so this model separates the
behaviour of the feedback law from any instability of the free coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..clf import Clf
from ..core import Partition, StochasticControlSystem


@dataclass(frozen=True)
class LinearTestParams:
    lam: float = 0.5
    k1: float = 2.0
    k2: float = 1.0
    gamma: float = 1.0
    H: float = 10.0

    def __post_init__(self):
        if not self.gamma > 0 or not self.H > 0:
            raise ValueError("gamma and H must be positive")


def linear_system(p: LinearTestParams = LinearTestParams()) -> StochasticControlSystem:
    def drift(x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], np.zeros_like(x[..., 0]), x[..., 0]], axis=-1)

    def input(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (3, 1))
        g[..., 1, 0] = 1.0
        return g

    def diffusion(x, u):
        x = np.asarray(x, dtype=float)
        return p.lam * x[..., 1][..., None, None] * input(x)

    return StochasticControlSystem(
        n=3, k=1, k_w=1, drift=drift, input=input, diffusion=diffusion,
        partition=Partition(3, (0, 1), p.H), name="custom-linear-test",
    )


def linear_clf(p: LinearTestParams = LinearTestParams()) -> Clf:
    P = np.array([[(p.k2 + 1.0) ** 2, p.k1], [p.k1, p.k1**2 + p.k2**2 + p.k2]])
    hess = np.zeros((3, 3))
    hess[:2, :2] = P

    def value(x):
        y = np.asarray(x, dtype=float)[..., :2]
        return 0.5 * np.einsum("...i,ij,...j->...", y, P, y)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., :2] = np.einsum("ij,...j->...i", P, x[..., :2])
        return out

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(hess, x.shape[:-1] + (3, 3)).copy()

    clf = Clf(value, gradient, hessian, p.gamma, quadratic_form=P, name="linear V")
    clf.require_definite()
    return clf


def sample_states(rng, count, y_radius=1.0, z_box=5.0):
    ang = rng.uniform(0.0, 2.0 * np.pi, count)
    r = y_radius * np.sqrt(rng.random(count))
    return np.stack(
        [r * np.cos(ang), r * np.sin(ang), rng.uniform(-z_box, z_box, count)], axis=1
    )


DEFAULT_XI = (0.1, 0.1, 0.0)
