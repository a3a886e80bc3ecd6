"""Three-wheeled trolley with a rod pendulum mounted on a transverse hinge.

Simulation happens in the transformed coordinates

    z1 = x3,  z2 = x1 cos x3 + x2 sin x3,  z3 = x1 sin x3 - x2 cos x3,
    z4 = alpha,  z5 = d alpha / dt

with controls v1 = u1 - u2 and v2 = (u1 + u2) - v1 z3. Stabilization is sought
for (z1, z2, z3); the rod angle and rate are left free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..clf import Clf
from ..core import Partition, StochasticControlSystem


@dataclass(frozen=True)
class TrolleyParams:
    lam: float = 0.5
    gamma: float = 1.0
    H: float = 10.0
    origin_guard: float = 1e-9

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")
        if not self.gamma > 0 or not self.H > 0 or not self.origin_guard > 0:
            raise ValueError("gamma, H and origin_guard must be positive")


def _cols(x, count):
    x = np.asarray(x, dtype=float)
    return [x[..., i] for i in range(count)]


def control_drift(z, v):
    z1, z2, z3, z4, z5 = _cols(z, 5)
    v1, v2 = _cols(v, 2)
    rod = (v2 + v1 * z3 + v1 * np.sin(z4)) * v1 * np.cos(z4) - np.sin(z4)
    return np.stack([v1, v2, v1 * z2, z5, rod], axis=-1)


def trolley_system(p: TrolleyParams = TrolleyParams()) -> StochasticControlSystem:
    def drift(z):
        z = np.asarray(z, dtype=float)
        zero = np.zeros_like(z[..., 0])
        return np.stack([zero, zero, zero, z[..., 4], -np.sin(z[..., 3])], axis=-1)

    def input(z):
        # affine part only; the rod row is quadratic in v and lives in control_drift
        z = np.asarray(z, dtype=float)
        g = np.zeros(z.shape[:-1] + (5, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = 1.0
        g[..., 2, 0] = z[..., 1]
        return g

    def diffusion(z, v):
        z = np.asarray(z, dtype=float)
        v = np.asarray(v, dtype=float)
        s = np.zeros(z.shape[:-1] + (5, 1))
        s[..., 1, 0] = p.lam * z[..., 1]
        s[..., 4, 0] = p.lam * z[..., 1] * v[..., 0] * np.cos(z[..., 3])
        return s

    return StochasticControlSystem(
        n=5,
        k=2,
        k_w=1,
        drift=drift,
        input=input,
        diffusion=diffusion,
        partition=Partition(5, (0, 1, 2), p.H),
        control_dependent_rows=(4,),
        full_drift=control_drift,
        name="trolley",
    )


def _power_terms(z, guard):
    """Pieces of (r/2)^(1 + z3^2/2) with their removable limits at r = 0.

    Returns r, s, ok, q = (r/2)^s, p = (r/2)^(1+s), L = ln(r/2), dq = s (r/2)^(s-1).
    Where the planar radius is below ``guard`` the r-power terms are set to
    their limits, which are zero except for q at z3 = 0.
    """
    z1, z2, z3 = _cols(z, 3)
    r = z1 * z1 + z2 * z2
    s = 0.5 * z3 * z3
    ok = r >= guard * guard
    w = np.where(ok, 0.5 * r, 1.0)
    q = np.where(ok, w**s, np.where(s == 0, 1.0, 0.0))
    p = np.where(ok, w * q, 0.0)
    L = np.where(ok, np.log(w), 0.0)
    dq = np.where(ok, s * q / w, 0.0)
    return r, s, ok, q, p, L, dq


def trolley_clf(p: TrolleyParams = TrolleyParams()) -> Clf:
    """V = 2 z3 - 1/2 r (1 + z3^2) + 2 (r/2)^(1 + z3^2/2),  r = z1^2 + z2^2."""
    guard = p.origin_guard

    def value(z):
        z3 = np.asarray(z, dtype=float)[..., 2]
        r, s, ok, q, pw, L, dq = _power_terms(z, guard)
        return 2.0 * z3 - 0.5 * r * (1.0 + z3 * z3) + 2.0 * pw

    def gradient(z):
        z = np.asarray(z, dtype=float)
        z1, z2, z3 = _cols(z, 3)
        r, s, ok, q, pw, L, dq = _power_terms(z, guard)
        radial = np.where(ok, 2.0 * (1.0 + s) * q, 0.0) - (1.0 + z3 * z3)
        out = np.zeros_like(z)
        out[..., 0] = radial * z1
        out[..., 1] = radial * z2
        out[..., 2] = 2.0 - r * z3 + 2.0 * pw * L * z3
        return out

    def hessian(z):
        z = np.asarray(z, dtype=float)
        z1, z2, z3 = _cols(z, 3)
        r, s, ok, q, pw, L, dq = _power_terms(z, guard)
        base = -(1.0 + z3 * z3) + 2.0 * (1.0 + s) * q
        curv = 2.0 * (1.0 + s) * dq
        mixed = z3 * (-2.0 + 2.0 * q + 2.0 * (1.0 + s) * q * L)
        h = np.zeros(z.shape[:-1] + (5, 5))
        h[..., 0, 0] = base + curv * z1 * z1
        h[..., 1, 1] = base + curv * z2 * z2
        h[..., 0, 1] = h[..., 1, 0] = curv * z1 * z2
        h[..., 0, 2] = h[..., 2, 0] = mixed * z1
        h[..., 1, 2] = h[..., 2, 1] = mixed * z2
        h[..., 2, 2] = -r + 2.0 * pw * L * (1.0 + L * z3 * z3)
        return h

    return Clf(value, gradient, hessian, p.gamma, name="trolley V")


def trolley_coordinates(z):
    """z-frame state -> world state (x1, x2, x3, alpha, omega)."""
    z1, z2, z3, z4, z5 = _cols(z, 5)
    c, s = np.cos(z1), np.sin(z1)
    return np.stack([z2 * c + z3 * s, z2 * s - z3 * c, z1, z4, z5], axis=-1)


def world_to_z(x):
    x1, x2, x3, alpha, omega = _cols(x, 5)
    c, s = np.cos(x3), np.sin(x3)
    return np.stack([x3, x1 * c + x2 * s, x1 * s - x2 * c, alpha, omega], axis=-1)


def control_transform(v, z3):
    """(v1, v2) -> wheel controls (u1, u2)."""
    v1, v2 = _cols(v, 2)
    z3 = np.asarray(z3, dtype=float)
    common = v2 + v1 * z3
    return np.stack([0.5 * (common + v1), 0.5 * (common - v1)], axis=-1)


def inverse_control_transform(u, z3):
    u1, u2 = _cols(u, 2)
    v1 = u1 - u2
    return np.stack([v1, (u1 + u2) - v1 * np.asarray(z3, dtype=float)], axis=-1)


def world_rhs(x, u):
    """Rolling constraints plus the rod's Lagrange equation, in world coordinates."""
    x1, x2, x3, alpha, omega = _cols(x, 5)
    u1, u2 = _cols(u, 2)
    dx1 = (u1 + u2) * np.cos(x3)
    dx2 = (u1 + u2) * np.sin(x3)
    dx3 = u1 - u2
    domega = (dx1 * np.cos(x3) + dx2 * np.sin(x3) + dx3 * np.sin(alpha)) * dx3 * np.cos(
        alpha
    ) - np.sin(alpha)
    return np.stack([dx1, dx2, dx3, omega, domega], axis=-1)


def sample_states(rng, count, y_radius=1.0, z_box=5.0, min_planar_radius=1e-6):
    """Uniform in the ball ||(z1, z2, z3)|| <= y_radius with ||(z1, z2)|| above
    ``min_planar_radius``; rod angle and rate uniform in [-z_box, z_box]."""
    out = np.empty((0, 5))
    while len(out) < count:
        d = rng.standard_normal((count, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        y = d * (y_radius * rng.random(count) ** (1.0 / 3.0))[:, None]
        keep = np.hypot(y[:, 0], y[:, 1]) > min_planar_radius
        z = np.concatenate(
            [y[keep], rng.uniform(-z_box, z_box, (int(keep.sum()), 2))], axis=1
        )
        out = np.concatenate([out, z])
    return out[:count]


DEFAULT_XI = (0.1, 0.1, 0.1, 0.0, 0.0)
