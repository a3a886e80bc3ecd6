"""Registered models: the two mechanical examples and a linear test system."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Callable

from . import linear, pendulum, trolley
from .linear import LinearTestParams, linear_clf, linear_system
from .pendulum import PendulumParams, pendulum_clf, pendulum_system
from .trolley import (
    TrolleyParams,
    control_transform,
    trolley_clf,
    trolley_coordinates,
    trolley_system,
    world_to_z,
)


@dataclass(frozen=True)
class Model:
    name: str
    params: Any
    system: Any
    clf: Any
    sampler: Callable
    default_xi: tuple


_REGISTRY = {
    "pendulum": (PendulumParams, pendulum_system, pendulum_clf, pendulum.sample_states, pendulum.DEFAULT_XI),
    "trolley": (TrolleyParams, trolley_system, trolley_clf, trolley.sample_states, trolley.DEFAULT_XI),
    "custom-linear-test": (LinearTestParams, linear_system, linear_clf, linear.sample_states, linear.DEFAULT_XI),
}

MODEL_NAMES = tuple(_REGISTRY)


def param_fields(name):
    return tuple(f.name for f in dataclasses.fields(_REGISTRY[name][0]))


def build_model(name: str, **overrides) -> Model:
    """Instantiate a registered model; unknown parameter names raise ValueError."""
    try:
        params_cls, make_system, make_clf, sampler, xi = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}") from None
    unknown = set(overrides) - set(param_fields(name))
    if unknown:
        raise ValueError(f"unknown {name} parameters: {sorted(unknown)}")
    params = params_cls(**overrides)
    return Model(name, params, make_system(params), make_clf(params), sampler, xi)


__all__ = [
    "Model", "MODEL_NAMES", "build_model", "param_fields",
    "PendulumParams", "pendulum_system", "pendulum_clf",
    "TrolleyParams", "trolley_system", "trolley_clf", "trolley_coordinates", "world_to_z",
    "control_transform", "LinearTestParams", "linear_system", "linear_clf",
]
