"""Inverted pendulum carrying a spring-suspended moving mass.

State ``x = (phi, y, dphi, dy)``; the control is the angular acceleration
input ``u`` with multiplicative noise ``lam * dphi`` on the same channel.
Stabilization is sought for ``(phi, dphi)`` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..clf import Clf
from ..core import Partition, StochasticControlSystem


@dataclass(frozen=True)
class PendulumParams:
    M: float = 1.0  # carrier mass, kg
    m: float = 0.1  # moving point mass, kg
    ell: float = 1.0  # pivot to suspension distance, m
    I: float = 1.0  # carrier moment of inertia about the pivot, kg m^2
    kappa: float = 10.0  # spring stiffness, N/m
    g: float = 9.81
    lam: float = 0.5
    k1: float = 2.0
    k2: float = 1.0
    gamma: float = 1.0
    H: float = math.pi / 2

    def __post_init__(self):
        for name in ("M", "m", "ell", "I", "kappa", "g"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.gamma > 0 or not self.H > 0:
            raise ValueError("gamma and H must be positive")
        for name in ("lam", "k1", "k2"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def input_gain(x, p: PendulumParams):
    """Coefficient of the control in the dy equation, -(ell + (I + m y^2)/(m ell))."""
    x2 = x[..., 1]
    return -p.ell - (p.I + p.m * x2**2) / (p.m * p.ell)


def q(x, p: PendulumParams):
    x1, x2, x3, x4 = (x[..., i] for i in range(4))
    denom = p.I + p.m * x2**2
    spring_gravity = 2.0 * x2**3 * p.kappa + (2.0 * p.m + p.M) / (2.0 * p.m) * (
        p.I / p.m + x2**2
    ) * p.g * np.sin(x1)
    return spring_gravity / denom - 2.0 * x2 * x3 * x4 / p.ell + p.g * x2 * np.cos(x1) / p.ell


def pendulum_system(p: PendulumParams = PendulumParams()) -> StochasticControlSystem:
    def drift(x):
        x = np.asarray(x, dtype=float)
        zero = np.zeros_like(x[..., 0])
        return np.stack([x[..., 2], x[..., 3], zero, q(x, p)], axis=-1)

    def input(x):
        x = np.asarray(x, dtype=float)
        zero = np.zeros_like(x[..., 0])
        col = np.stack([zero, zero, zero + 1.0, input_gain(x, p)], axis=-1)
        return col[..., None]

    def diffusion(x, u):
        x = np.asarray(x, dtype=float)
        return p.lam * x[..., 2][..., None, None] * input(x)

    return StochasticControlSystem(
        n=4,
        k=1,
        k_w=1,
        drift=drift,
        input=input,
        diffusion=diffusion,
        partition=Partition(4, (0, 2), p.H),
        name="pendulum",
    )


def quadratic_form(p: PendulumParams):
    """P with V = 1/2 (phi, dphi) P (phi, dphi)^T."""
    return np.array(
        [[(p.k2 + 1.0) ** 2, p.k1], [p.k1, p.k1**2 + p.k2**2 + p.k2]], dtype=float
    )


def pendulum_clf(p: PendulumParams = PendulumParams()) -> Clf:
    """2V = (k1^2 + k2^2 + k2) dphi^2 + 2 k1 phi dphi + (k2 + 1)^2 phi^2.

    Raises IndefiniteClf when the 2x2 form is not positive definite.
    """
    P = quadratic_form(p)
    idx = [0, 2]

    def value(x):
        y = np.asarray(x, dtype=float)[..., idx]
        return 0.5 * np.einsum("...i,ij,...j->...", y, P, y)

    def gradient(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., idx] = np.einsum("ij,...j->...i", P, x[..., idx])
        return out

    hess = np.zeros((4, 4))
    hess[np.ix_(idx, idx)] = P

    def hessian(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(hess, x.shape[:-1] + (4, 4)).copy()

    clf = Clf(value, gradient, hessian, p.gamma, quadratic_form=P, name="pendulum V")
    clf.require_definite()
    return clf


def sample_states(rng, count, y_radius=1.0, z_box=5.0):
    """Uniform in the disk ||(phi, dphi)|| <= y_radius times |y|, |dy| <= z_box."""
    ang = rng.uniform(0.0, 2.0 * np.pi, count)
    r = y_radius * np.sqrt(rng.random(count))
    x = np.empty((count, 4))
    x[:, 0] = r * np.cos(ang)
    x[:, 2] = r * np.sin(ang)
    x[:, 1] = rng.uniform(-z_box, z_box, count)
    x[:, 3] = rng.uniform(-z_box, z_box, count)
    return x


DEFAULT_XI = (0.1, 0.0, 0.1, 0.0)
