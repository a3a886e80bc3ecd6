"""Universal partial-stabilizing feedback built from the generator pair (a, b).

    h = 0                                     if b = 0
    h = -b (a + sqrt(a^2 + |b|^4)) / |b|^2    if 2 sqrt(a^2 + |b|^4) >= alpha
    h = -b (2a + alpha) / (2 |b|^2)           otherwise

Under this law L_h V equals a, -sqrt(a^2 + |b|^4) and -alpha/2 on the three
branches. Everything here broadcasts over leading batch axes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .clf import Clf, GeneratorPair, generator_pair
from .core import StochasticControlSystem, _as_array
from .errors import NumericalBlowup

Array = np.ndarray

DEFAULT_TOL_B = 1e-12


class Branch(enum.IntEnum):
    ZERO_B = 0
    RADICAL = 1
    ALPHA_FLOOR = 2


@dataclass(frozen=True)
class FeedbackResult:
    u: Array
    branch: Array
    a: Array
    b: Array
    lhv: Array


def _split(pair, alpha_y):
    a = np.asarray(pair.a, dtype=float)
    b = np.asarray(pair.b, dtype=float)
    alpha_y = np.asarray(alpha_y, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(alpha_y))):
        raise NumericalBlowup("non-finite input to the feedback law")
    if np.any(alpha_y < 0):
        raise ValueError("alpha_y must be nonnegative")
    nb2 = np.sum(b * b, axis=-1)
    rad = np.hypot(a, nb2)
    return a, b, alpha_y, nb2, rad


def _branches(nb2, rad, alpha_y, tol_b):
    zero = np.sqrt(nb2) <= tol_b
    radical = ~zero & (2.0 * rad >= alpha_y)
    return np.where(zero, Branch.ZERO_B, np.where(radical, Branch.RADICAL, Branch.ALPHA_FLOOR))


def _coefficients(a, alpha_y, nb2, rad, safe):
    with np.errstate(divide="ignore", invalid="ignore"):
        # a + rad == |b|^4 / (rad - a); the second form avoids cancellation for a < 0
        c_rad = np.where(a >= 0, (a + rad) / safe, safe / (rad - a))
        c_floor = (2.0 * a + alpha_y) / (2.0 * safe)
    return c_rad, c_floor


def candidate_controls(pair: GeneratorPair, alpha_y):
    """Controls of the two b != 0 branches, regardless of which one applies."""
    a, b, alpha_y, nb2, rad = _split(pair, alpha_y)
    safe = np.where(nb2 > 0, nb2, 1.0)
    c_rad, c_floor = _coefficients(a, alpha_y, nb2, rad, safe)
    return -c_rad[..., None] * b, -c_floor[..., None] * b


def sontag_feedback(pair: GeneratorPair, alpha_y, tol_b: float = DEFAULT_TOL_B) -> FeedbackResult:
    """Evaluate the feedback law on one pair or a batch of pairs."""
    a, b, alpha_y, nb2, rad = _split(pair, alpha_y)
    branch = _branches(nb2, rad, alpha_y, tol_b)
    safe = np.where(branch == Branch.ZERO_B, 1.0, nb2)
    c_rad, c_floor = _coefficients(a, alpha_y, nb2, rad, safe)
    coef = np.select([branch == Branch.RADICAL, branch == Branch.ALPHA_FLOOR], [c_rad, c_floor], 0.0)
    u = -coef[..., None] * b
    lhv = a + np.sum(b * u, axis=-1)
    return FeedbackResult(u=u, branch=np.asarray(branch, dtype=np.int8), a=a, b=b, lhv=lhv)


def closed_form_lhv(pair: GeneratorPair, alpha_y, tol_b: float = DEFAULT_TOL_B):
    """L_h V predicted branch by branch, without forming the control."""
    a, b, alpha_y, nb2, rad = _split(pair, alpha_y)
    branch = _branches(nb2, rad, alpha_y, tol_b)
    return np.select(
        [branch == Branch.ZERO_B, branch == Branch.RADICAL], [a, -rad], -0.5 * alpha_y
    )


class SontagController:
    """State feedback x -> FeedbackResult for a system and its CLF."""

    def __init__(self, system: StochasticControlSystem, clf: Clf, tol_b: float = DEFAULT_TOL_B):
        self.system = system
        self.clf = clf
        self.tol_b = tol_b

    def __call__(self, x) -> FeedbackResult:
        x = _as_array(x)
        pair = generator_pair(self.system, self.clf, x)
        alpha_y = self.clf.alpha(self.system.partition.y_norm(x))
        return sontag_feedback(pair, alpha_y, self.tol_b)

    def control(self, x) -> Array:
        return self(x).u
