"""Partitioned states and control-affine Ito systems.

A system is described by callbacks that broadcast over leading axes: a state
batch of shape ``(..., n)`` maps to drift ``(..., n)``, input matrix
``(..., n, k)`` and diffusion ``(..., n, k_w)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericalBlowup

Array = np.ndarray


@dataclass(frozen=True)
class Partition:
    """Split of the state into stabilized (y) and free (z) coordinates.

    ``H`` bounds the y-part: the working domain is ``{x : ||y|| <= H}`` with
    the z-part unconstrained.
    """

    n: int
    y_indices: tuple
    H: float

    def __post_init__(self):
        idx = tuple(int(i) for i in self.y_indices)
        object.__setattr__(self, "y_indices", idx)
        if not 1 <= len(idx) <= self.n:
            raise ValueError(f"need 1 <= m <= n, got m={len(idx)}, n={self.n}")
        if len(set(idx)) != len(idx) or any(i < 0 or i >= self.n for i in idx):
            raise ValueError(f"y_indices must be distinct and in [0, {self.n})")
        if not self.H > 0:
            raise ValueError("H must be positive")

    @property
    def m(self) -> int:
        return len(self.y_indices)

    @property
    def p(self) -> int:
        return self.n - self.m

    @property
    def z_indices(self) -> tuple:
        return tuple(i for i in range(self.n) if i not in self.y_indices)

    def y(self, x) -> Array:
        return np.asarray(x)[..., list(self.y_indices)]

    def z(self, x) -> Array:
        return np.asarray(x)[..., list(self.z_indices)]

    def y_norm(self, x) -> Array:
        return np.sqrt(np.sum(self.y(x) ** 2, axis=-1))

    def inside(self, x) -> Array:
        return self.y_norm(x) <= self.H


@dataclass(frozen=True)
class PartitionedState:
    x: Array
    partition: Partition

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.shape != (self.partition.n,):
            raise ValueError(f"state must have shape ({self.partition.n},), got {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def y(self) -> Array:
        return self.partition.y(self.x)

    @property
    def z(self) -> Array:
        return self.partition.z(self.x)

    @property
    def y_norm(self) -> float:
        return float(self.partition.y_norm(self.x))

    @property
    def inside_domain(self) -> bool:
        return self.y_norm <= self.partition.H


def y_norm(x, partition: Optional[Partition] = None):
    """Euclidean norm of the y-components of ``x``.

    ``x`` may be a :class:`PartitionedState` or an array together with its
    partition; arrays broadcast over leading axes.
    """
    if isinstance(x, PartitionedState):
        return x.y_norm
    if partition is None:
        raise TypeError("a partition is required for raw arrays")
    return partition.y_norm(x)


@dataclass(frozen=True)
class StochasticControlSystem:
    """dx = (f(x) + g(x) u) dt + sum_i sigma_i(x, u) dw_i.

    ``full_drift`` overrides ``f + g u`` on the simulation path for systems
    whose drift is not affine in ``u`` on some rows; those rows, and any rows
    where the diffusion depends on ``u``, are listed in ``control_dependent_rows``
    so the generator evaluation can prove they never reach V.
    """

    n: int
    k: int
    k_w: int
    drift: Callable[[Array], Array]
    input: Callable[[Array], Array]
    diffusion: Callable[[Array, Array], Array]
    partition: Partition
    control_dependent_rows: tuple = ()
    full_drift: Optional[Callable[[Array, Array], Array]] = None
    name: str = "system"

    def __post_init__(self):
        if self.partition.n != self.n:
            raise ValueError("partition dimension does not match the system")
        object.__setattr__(self, "control_dependent_rows", tuple(self.control_dependent_rows))

    def zero_control(self, x) -> Array:
        return np.zeros(np.shape(x)[:-1] + (self.k,))

    def closed_drift(self, x, u) -> Array:
        if self.full_drift is not None:
            return self.full_drift(x, u)
        return self.drift(x) + np.einsum("...ij,...j->...i", self.input(x), u)


def _as_array(x):
    if isinstance(x, PartitionedState):
        return x.x
    return np.asarray(x, dtype=float)


def _first_bad(v):
    bad = np.argwhere(~np.isfinite(v))
    return tuple(int(i) for i in bad[0])


def closed_loop_rhs(system: StochasticControlSystem, feedback, x):
    """Drift and diffusion of the closed loop under ``u = feedback(x)``.

    ``feedback`` returns either a control array or an object with a ``u``
    attribute (such as the result of a Sontag controller).
    """
    x = _as_array(x)
    if not np.all(np.isfinite(x)):
        raise NumericalBlowup("non-finite state", _first_bad(x))
    u = feedback(x)
    u = np.asarray(getattr(u, "u", u), dtype=float)
    drift = system.closed_drift(x, u)
    diffusion = system.diffusion(x, u)
    for label, v in (("drift", drift), ("diffusion", diffusion)):
        if not np.all(np.isfinite(v)):
            raise NumericalBlowup(f"non-finite {label}", _first_bad(v))
    return drift, diffusion


def zero_feedback(system: StochasticControlSystem):
    return lambda x: system.zero_control(x)


def check_dimensions(system: StochasticControlSystem, x: Sequence[float]):
    """Evaluate every callback once at ``x`` and validate output shapes."""
    x = np.asarray(x, dtype=float)
    u = system.zero_control(x)
    shapes = {
        "drift": (np.shape(system.drift(x)), (system.n,)),
        "input": (np.shape(system.input(x)), (system.n, system.k)),
        "diffusion": (np.shape(system.diffusion(x, u)), (system.n, system.k_w)),
    }
    for label, (got, want) in shapes.items():
        if got != want:
            raise ValueError(f"{label} has shape {got}, expected {want}")
